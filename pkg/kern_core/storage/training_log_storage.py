import csv
from pathlib import Path
from typing import List, NamedTuple, Optional, Sequence, Union

from kern_core.exceptions.FormatException import FormatException
from kern_core.storage.storage import StorageBase
from kern_core.utils.file_utils import atomic_write

TRAINING_LOG_COLUMNS = ("epoch", "loss", "val_mr50", "lr")


class EpochRecord(NamedTuple):
    epoch: int
    loss: float
    val_metric: Optional[float]
    learning_rate: float


class TrainingLogStorage(StorageBase):
    def __init__(self, path: Union[str, Path]):
        super().__init__(Path(path))

    def save(self, records: Sequence[EpochRecord]):
        with atomic_write(self.path) as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(TRAINING_LOG_COLUMNS)
            for record in records:
                writer.writerow([record.epoch, repr(record.loss),
                                 "" if record.val_metric is None else repr(record.val_metric),
                                 repr(record.learning_rate)])

    def load(self) -> List[EpochRecord]:
        if not self.exists():
            raise FormatException("training log does not exist", str(self.path))

        with self.path.open(encoding="utf-8", newline="") as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if tuple(header or ()) != TRAINING_LOG_COLUMNS:
                raise FormatException(f"unexpected header {header}", str(self.path), 1)

            records = []
            for line_number, row in enumerate(reader, start=2):
                try:
                    epoch, loss, metric, lr = row
                    records.append(EpochRecord(int(epoch), float(loss), float(metric) if metric else None, float(lr)))
                except ValueError as e:
                    raise FormatException(f"malformed row: {e}", str(self.path), line_number)

        return records
