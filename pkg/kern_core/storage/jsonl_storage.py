import json
from json import JSONDecodeError
from pathlib import Path
from typing import Iterable, Iterator, Union

import jsonschema

from jsonschema import ValidationError

from kern_core.exceptions.FormatException import FormatException
from kern_core.storage.storage import StorageBase
from kern_core.utils.file_utils import atomic_write


class JsonLinesStorage(StorageBase):
    """One JSON object per line, each checked against ``_recordSchema``."""

    _recordSchema: dict = {"type": "object"}

    def __init__(self, path: Union[str, Path]):
        super().__init__(Path(path))

    def iter_records(self) -> Iterator[dict]:
        if not self.exists():
            raise FormatException("file does not exist", str(self.path))

        with self.path.open(encoding="utf-8") as f:
            for line_number, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                except JSONDecodeError as e:
                    raise FormatException(f"invalid JSON: {e.msg}", str(self.path), line_number)
                try:
                    jsonschema.validate(record, self._recordSchema)
                except ValidationError as e:
                    raise FormatException(f"record is incorrect: {e.message}", str(self.path), line_number)

                yield line_number, record

    def save_records(self, records: Iterable[dict]):
        with atomic_write(self.path) as f:
            for record in records:
                f.write(json.dumps(record, separators=(",", ":")))
                f.write("\n")
