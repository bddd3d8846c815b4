import json
from json import JSONDecodeError
from pathlib import Path
from typing import List, Optional, Sequence, Union

from kern_core.domain.eval_report import EvalReport
from kern_core.exceptions.FormatException import FormatException
from kern_core.storage.storage import StorageBase
from kern_core.utils.file_utils import atomic_write


class ReportStorage(StorageBase):
    """A JSON document with the evaluation reports plus any extra summary fields."""

    def __init__(self, path: Union[str, Path]):
        super().__init__(Path(path))

    def save(self, reports: Sequence[EvalReport], extra: Optional[dict] = None):
        document = dict(extra or {})
        document["reports"] = [r.to_dict() for r in reports]

        with atomic_write(self.path) as f:
            json.dump(document, f, indent=2, sort_keys=True)
            f.write("\n")

    def load(self) -> List[EvalReport]:
        if not self.exists():
            raise FormatException("report file does not exist", str(self.path))

        try:
            document = json.loads(self.path.read_text(encoding="utf-8"))
            return [EvalReport.parse(r) for r in document["reports"]]
        except (JSONDecodeError, KeyError, TypeError, ValueError) as e:
            raise FormatException(f"report is incorrect: {e}", str(self.path))


def save_text(path: Union[str, Path], text: str):
    with atomic_write(path) as f:
        f.write(text)
        if not text.endswith("\n"):
            f.write("\n")
