from pathlib import Path
from typing import Union

from kern_core.exceptions.ValidationException import ValidationException

KNOWLEDGE_BASE_FILE_NAME = "knowledge.kb"
STATS_SUMMARY_FILE_NAME = "stats-summary.json"
SCHEMA_FILE_NAME = "schema.json"
PROCESS_FILE_NAME = "process.npz"
BEST_CHECKPOINT_FILE_NAME = "model-best.ckpt"
LAST_CHECKPOINT_FILE_NAME = "model-last.ckpt"
TRAINING_LOG_FILE_NAME = "training-log.csv"
VALIDATION_REPORTS_FILE_NAME = "val-reports.jsonl"
REPORT_FILE_NAME = "report.json"
REPORT_TABLE_FILE_NAME = "report.txt"
MANIFEST_FILE_NAME = "run-manifest.json"
LOG_FILE_NAME = "kern.log"


def get_output_directory_path(out_dir: Union[str, Path]) -> Path:
    path = Path(out_dir)
    if path.exists() and not path.is_dir():
        raise ValidationException(f"Output path '{path}' is not a directory")
    path.mkdir(parents=True, exist_ok=True)

    return path


def get_output_file_path(out_dir: Union[str, Path], file_name: str) -> Path:
    return get_output_directory_path(out_dir).joinpath(file_name)


def get_split_file_name(split: str) -> str:
    return f"{split}.jsonl"


def get_predictions_file_name(task_value: str) -> str:
    return f"predictions-{task_value}.jsonl"
