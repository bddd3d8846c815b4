import json
from json import JSONDecodeError
from pathlib import Path
from typing import Union

from kern_core.domain.run_manifest import RunManifest
from kern_core.exceptions.FormatException import FormatException
from kern_core.storage.storage import StorageBase
from kern_core.utils.file_utils import atomic_write


class ManifestStorage(StorageBase):
    def __init__(self, path: Union[str, Path]):
        super().__init__(Path(path))

    def save(self, manifest: RunManifest):
        with atomic_write(self.path) as f:
            json.dump(manifest.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")

    def load(self) -> RunManifest:
        if not self.exists():
            raise FormatException("run manifest does not exist", str(self.path))

        try:
            return RunManifest.parse(json.loads(self.path.read_text(encoding="utf-8")))
        except (JSONDecodeError, KeyError, ValueError) as e:
            raise FormatException(f"run manifest is incorrect: {e}", str(self.path))
