from typing import Dict, List, NamedTuple, Optional, Sequence

import numpy as np

from loguru import logger

from kern_core.configuration.config import Config
from kern_core.domain.annotated_image import AnnotatedImage
from kern_core.domain.eval_report import EvalReport
from kern_core.domain.knowledge_base import KnowledgeBase
from kern_core.domain.task import Task
from kern_core.kern_model import feature_dim_of
from kern_core.knowledge_stats import make_uniform_ablation
from kern_core.metrics import evaluate, format_improvement_table, mean_over_tasks, per_predicate_improvement
from kern_core.prediction_manager import PredictionManager
from kern_core.trainer import Trainer

FULL = "full"
WITHOUT_RELATION_KNOWLEDGE = "no-relation-prior"
WITHOUT_ANY_KNOWLEDGE = "no-priors"
VARIANTS = (FULL, WITHOUT_RELATION_KNOWLEDGE, WITHOUT_ANY_KNOWLEDGE)

TABLE_COLUMNS = ((Task.PredCls, 50), (Task.PredCls, 100), (Task.SGCls, 50), (Task.SGCls, 100))
IMPROVEMENT_K = 50


class AblationRow(NamedTuple):
    variant: str
    seed: int
    mean_recall: Dict[str, float]
    recall: Dict[str, float]
    predcls: Optional[EvalReport] = None

    def to_dict(self) -> dict:
        return {"variant": self.variant, "seed": self.seed, "mean_recall": self.mean_recall, "recall": self.recall}


def _column_name(task: Task, k: int) -> str:
    return f"{task.value}@{k}"


def summarize_reports(variant: str, seed: int, reports: Sequence[EvalReport]) -> AblationRow:
    """Constraint-mode cells of the ablation table for one trained variant."""
    constrained = [r for r in reports if r.constraint]
    by_task = {r.task: r for r in constrained}

    mean_recall, recall = {}, {}
    for task, k in TABLE_COLUMNS:
        if task in by_task and k in by_task[task].ks:
            mean_recall[_column_name(task, k)] = by_task[task].mean_recall[k]
            recall[_column_name(task, k)] = by_task[task].recall[k]

    averaged = mean_over_tasks(constrained).get(True, {"mean_recall": 0.0, "recall": 0.0})
    mean_recall["mean"] = averaged["mean_recall"]
    recall["mean"] = averaged["recall"]

    return AblationRow(variant, seed, mean_recall, recall, by_task.get(Task.PredCls))


class AblationResult:
    def __init__(self, rows: List[AblationRow]):
        self.rows = rows

    @property
    def seeds(self) -> List[int]:
        return sorted({row.seed for row in self.rows})

    def rows_for(self, variant: str) -> List[AblationRow]:
        return sorted((r for r in self.rows if r.variant == variant), key=lambda r: r.seed)

    def averages(self, metric: str) -> Dict[str, Dict[str, float]]:
        table = {}
        for variant in VARIANTS:
            rows = self.rows_for(variant)
            if rows:
                columns = getattr(rows[0], metric).keys()
                table[variant] = {c: float(np.mean([getattr(r, metric)[c] for r in rows])) for c in columns}

        return table

    def full_versus_ablated(self, column: str = "predcls@50") -> Dict[str, float]:
        """Seeds where the full model beats the relation-prior ablation, and the mean margin in points."""
        full = {r.seed: r.mean_recall.get(column, 0.0) for r in self.rows_for(FULL)}
        ablated = {r.seed: r.mean_recall.get(column, 0.0) for r in self.rows_for(WITHOUT_RELATION_KNOWLEDGE)}
        seeds = sorted(set(full) & set(ablated))
        margins = [100 * (full[s] - ablated[s]) for s in seeds]

        return {
            "seeds": len(seeds),
            "wins": sum(1 for m in margins if m > 0),
            "mean_margin_points": float(np.mean(margins)) if margins else 0.0,
        }

    def predicate_improvements(self, k: int = IMPROVEMENT_K) -> List[dict]:
        """
        Per-predicate PredCls R@K (constraint) of the relation-prior ablation against the
        full model, averaged over seeds. Predicates keep their ground-truth share order.
        """
        full = {r.seed: r.predcls for r in self.rows_for(FULL)}
        ablated = {r.seed: r.predcls for r in self.rows_for(WITHOUT_RELATION_KNOWLEDGE)}
        seeds = [s for s in sorted(set(full) & set(ablated))
                 if full[s] is not None and ablated[s] is not None and k in full[s].ks and k in ablated[s].ks]

        by_predicate: Dict[int, List[dict]] = {}
        for seed in seeds:
            for row in per_predicate_improvement(ablated[seed], full[seed], k):
                by_predicate.setdefault(row["predicate"], []).append(row)

        averaged = [{"predicate": predicate, "share": rows[0]["share"],
                     "baseline": float(np.mean([r["baseline"] for r in rows])),
                     "candidate": float(np.mean([r["candidate"] for r in rows])),
                     "improvement": float(np.mean([r["improvement"] for r in rows]))}
                    for predicate, rows in by_predicate.items()]
        averaged.sort(key=lambda row: (-row["share"], row["predicate"]))

        return averaged

    def to_dict(self) -> dict:
        return {
            "rows": [r.to_dict() for r in self.rows],
            "mean_recall": self.averages("mean_recall"),
            "recall": self.averages("recall"),
            "full_versus_ablated": self.full_versus_ablated(),
            "predicate_improvements": self.predicate_improvements(),
        }

    def format_table(self, predicate_names: Optional[Sequence[str]] = None) -> str:
        headers = [_column_name(task, k) for task, k in TABLE_COLUMNS] + ["mean"]
        lines = []
        for metric, title in (("mean_recall", "mR@K (constraint)"), ("recall", "R@K (constraint)")):
            lines.append(f"{title}, mean over seeds {self.seeds}")
            lines.append(f"{'':<19}" + "".join(f"{h:>13}" for h in headers))
            for variant, cells in self.averages(metric).items():
                lines.append(f"{variant:<19}" + "".join(
                    f"{100 * cells[h]:>13.2f}" if h in cells else f"{'-':>13}" for h in headers))
            lines.append("")

        comparison = self.full_versus_ablated()
        lines.append(f"full > {WITHOUT_RELATION_KNOWLEDGE} on predcls mR@50 in {comparison['wins']} of "
                     f"{comparison['seeds']} seeds, mean margin {comparison['mean_margin_points']:+.2f} points")

        improvements = self.predicate_improvements()
        if improvements:
            lines.append("")
            lines.append(f"predcls R@{IMPROVEMENT_K} per predicate, "
                         f"{WITHOUT_RELATION_KNOWLEDGE} (base) against {FULL} (new)")
            lines.append(format_improvement_table(improvements, IMPROVEMENT_K, predicate_names))

        return "\n".join(lines)


class AblationManager:
    """Trains the full model and both knowledge ablations with identical seeds and settings."""

    def __init__(self, kb: KnowledgeBase, config: Config):
        self.config = config
        self.knowledge = {
            FULL: kb,
            WITHOUT_RELATION_KNOWLEDGE: make_uniform_ablation(kb),
            WITHOUT_ANY_KNOWLEDGE: make_uniform_ablation(kb, include_objects=True),
        }

    def run_variant(self, variant: str, seed: int, train_images: Sequence[AnnotatedImage],
                    val_images: Sequence[AnnotatedImage], test_images: Sequence[AnnotatedImage]) -> AblationRow:
        kb = self.knowledge[variant]
        logger.info(f"Ablation variant '{variant}', seed {seed}")

        trainer = Trainer.create(kb, feature_dim_of(train_images), self.config, seed)
        result = trainer.train(train_images, val_images)
        trainer.model.params.load_arrays(result.best_parameters)

        tasks = [Task.parse(t) for t in self.config.eval.tasks]
        predictions = PredictionManager(trainer.model, kb, self.config.runtime.threads).predict_tasks(test_images, tasks)
        reports = evaluate(test_images, predictions, self.config.eval.ks,
                           pooling=self.config.eval.mean_recall_pooling, num_predicates=kb.num_predicates,
                           threads=self.config.runtime.threads)

        return summarize_reports(variant, seed, reports)

    def run(self, seeds: Sequence[int], train_images: Sequence[AnnotatedImage],
            val_images: Sequence[AnnotatedImage], test_images: Sequence[AnnotatedImage]) -> AblationResult:
        rows = [self.run_variant(variant, seed, train_images, val_images, test_images)
                for seed in seeds for variant in VARIANTS]

        return AblationResult(rows)
