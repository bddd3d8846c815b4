from typing import Dict, List, Optional, Sequence

from kern_core.domain.task import Task


class EvalReport:
    """
    R@K and mR@K for one (task, constraint mode). Per-predicate tables are indexed
    by predicate - 1 (predicate 0, no-relationship, is never evaluated); entries are
    ``None`` for predicates without ground-truth occurrences.
    """

    def __init__(self, task: Task, constraint: bool, ks: Sequence[int],
                 recall: Dict[int, float], mean_recall: Dict[int, float],
                 per_predicate_recall: Dict[int, List[Optional[float]]],
                 image_count: int, gt_counts: Sequence[int]):
        self.task = task
        self.constraint = bool(constraint)
        self.ks = [int(k) for k in ks]
        self.recall = {int(k): float(v) for k, v in recall.items()}
        self.mean_recall = {int(k): float(v) for k, v in mean_recall.items()}
        self.per_predicate_recall = {int(k): list(v) for k, v in per_predicate_recall.items()}
        self.image_count = int(image_count)
        self.gt_counts = [int(c) for c in gt_counts]

    @property
    def mode_name(self) -> str:
        return "constraint" if self.constraint else "no constraint"

    def to_dict(self) -> dict:
        return {
            "task": self.task.value,
            "constraint": self.constraint,
            "ks": self.ks,
            "recall": {str(k): v for k, v in self.recall.items()},
            "mean_recall": {str(k): v for k, v in self.mean_recall.items()},
            "per_predicate_recall": {str(k): v for k, v in self.per_predicate_recall.items()},
            "image_count": self.image_count,
            "gt_counts": self.gt_counts,
        }

    @staticmethod
    def parse(json_object: dict) -> "EvalReport":
        return EvalReport(
            task=Task.parse(json_object["task"]),
            constraint=json_object["constraint"],
            ks=json_object["ks"],
            recall={int(k): v for k, v in json_object["recall"].items()},
            mean_recall={int(k): v for k, v in json_object["mean_recall"].items()},
            per_predicate_recall={int(k): v for k, v in json_object["per_predicate_recall"].items()},
            image_count=json_object["image_count"],
            gt_counts=json_object["gt_counts"])

    def format_table(self, predicate_names: Optional[Sequence[str]] = None, per_predicate: bool = False) -> str:
        lines = [f"{self.task.name} ({self.mode_name}), {self.image_count} images"]
        lines.append(f"{'':<8}" + "".join(f"{'@' + str(k):>9}" for k in self.ks))
        lines.append(f"{'  R':<8}" + "".join(f"{100 * self.recall[k]:>9.2f}" for k in self.ks))
        lines.append(f"{'  mR':<8}" + "".join(f"{100 * self.mean_recall[k]:>9.2f}" for k in self.ks))

        if per_predicate:
            lines.append("  per-predicate R@K (%), ground-truth count:")
            for index, count in enumerate(self.gt_counts):
                predicate = index + 1
                name = predicate_names[predicate] if predicate_names else str(predicate)
                cells = []
                for k in self.ks:
                    value = self.per_predicate_recall[k][index]
                    cells.append(f"{'-':>9}" if value is None else f"{100 * value:>9.2f}")
                lines.append(f"  {name:<24}" + " ".join(cells) + f"{count:>9d}")

        return "\n".join(lines)
