import json
import zipfile
from json import JSONDecodeError
from pathlib import Path
from typing import Union

import numpy as np

from loguru import logger

from kern_core.configuration.synth_config import SynthConfig
from kern_core.exceptions.FormatException import FormatException
from kern_core.exceptions.ValidationException import ValidationException
from kern_core.storage.storage import StorageBase
from kern_core.synth_gen import GroundTruthProcess
from kern_core.utils.file_utils import atomic_write

PROCESS_ARRAYS = ("category_marginal", "cooccurrence", "relation_prior", "prototypes")
SETTINGS_ENTRY = "settings"

# Fixed member timestamps keep the archive byte-identical across runs
ARCHIVE_TIMESTAMP = (1980, 1, 1, 0, 0, 0)


class ProcessStorage(StorageBase):
    """
    The generating process of a synthetic dataset as an uncompressed numpy archive:
    the distributions plus the synthetic settings, as JSON, that scenes are drawn with.
    """

    def __init__(self, path: Union[str, Path]):
        super().__init__(Path(path))

    def save(self, process: GroundTruthProcess):
        if process.config is None:
            raise ValidationException("Only processes built from synthetic settings can be saved")

        logger.debug(f"Save synthetic process to '{self.path}'")

        entries = {name: getattr(process, name) for name in PROCESS_ARRAYS}
        entries[SETTINGS_ENTRY] = np.array(json.dumps(process.config.to_dict(), sort_keys=True))

        with atomic_write(self.path, mode="wb") as f:
            with zipfile.ZipFile(f, mode="w", compression=zipfile.ZIP_STORED) as archive:
                for name, value in entries.items():
                    info = zipfile.ZipInfo(f"{name}.npy", date_time=ARCHIVE_TIMESTAMP)
                    with archive.open(info, mode="w", force_zip64=True) as member:
                        np.lib.format.write_array(member, np.asanyarray(value), allow_pickle=False)

    def load(self) -> GroundTruthProcess:
        if not self.exists():
            raise FormatException("process file does not exist", str(self.path))

        try:
            with np.load(self.path, allow_pickle=False) as archive:
                missing = [name for name in PROCESS_ARRAYS + (SETTINGS_ENTRY,) if name not in archive.files]
                if missing:
                    raise FormatException(f"process file lacks arrays {missing}", str(self.path))
                arrays = [archive[name] for name in PROCESS_ARRAYS]
                settings = json.loads(str(archive[SETTINGS_ENTRY][()]))
        except (OSError, ValueError, JSONDecodeError) as e:
            raise FormatException(f"cannot read process file: {e}", str(self.path))

        try:
            config = SynthConfig()
            config.update(settings)
            process = GroundTruthProcess(*arrays, config=config)
            process.validate()
        except ValidationException as e:
            raise FormatException(f"process file is inconsistent: {e.message}", str(self.path))

        return process
