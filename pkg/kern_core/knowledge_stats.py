#!/usr/bin/env python3

"""
Statistical knowledge counted from annotations: the object co-occurrence matrix
and the per-category-pair predicate prior, plus the FREQ baseline built on them.
"""

from typing import Iterable, List, Sequence

import numpy as np

from loguru import logger

from kern_core.domain.annotated_image import AnnotatedImage
from kern_core.domain.dataset_schema import DatasetSchema
from kern_core.domain.knowledge_base import KnowledgeBase
from kern_core.domain.predicted_graph import PairPrediction, PredictedGraph
from kern_core.exceptions.ValidationException import ValidationException


class KnowledgeCounter:
    """
    Integer counts behind the knowledge base. Counters built over disjoint parts of a
    dataset can be merged exactly before normalization.
    """

    def __init__(self, schema: DatasetSchema):
        self.schema = schema
        c, k = schema.num_categories, schema.num_predicates

        self.image_count = 0
        self.presence_counts = np.zeros(c, dtype=np.int64)
        self.joint_presence_counts = np.zeros((c, c), dtype=np.int64)
        self.relation_counts = np.zeros((c, c, k), dtype=np.int64)

    def add(self, image: AnnotatedImage):
        labels = image.labels()
        if labels.size and (labels.min() < 0 or labels.max() >= self.schema.num_categories):
            bad = int(labels[(labels < 0) | (labels >= self.schema.num_categories)][0])
            raise ValidationException(
                f"Image '{image.image_id}' has label {bad} outside [0, {self.schema.num_categories})")

        self.image_count += 1

        # Presence is image level: several instances of a category count once.
        present = np.zeros(self.schema.num_categories, dtype=np.int64)
        present[labels] = 1
        self.presence_counts += present
        self.joint_presence_counts += np.outer(present, present)

        n = labels.size
        if n < 2:
            return

        predicates = np.zeros((n, n), dtype=np.int64)
        for triplet in image.triplets:
            if not 1 <= triplet.predicate < self.schema.num_predicates:
                raise ValidationException(
                    f"Image '{image.image_id}' has predicate {triplet.predicate} "
                    f"outside [1, {self.schema.num_predicates})")
            predicates[triplet.subj, triplet.obj] = triplet.predicate

        off_diagonal = ~np.eye(n, dtype=bool)
        subj_labels = np.broadcast_to(labels[:, None], (n, n))[off_diagonal]
        obj_labels = np.broadcast_to(labels[None, :], (n, n))[off_diagonal]
        np.add.at(self.relation_counts, (subj_labels, obj_labels, predicates[off_diagonal]), 1)

    def add_all(self, images: Iterable[AnnotatedImage]) -> "KnowledgeCounter":
        for image in images:
            self.add(image)

        return self

    def merge(self, other: "KnowledgeCounter") -> "KnowledgeCounter":
        if other.schema != self.schema:
            raise ValidationException("Cannot merge counters built for different schemas")

        self.image_count += other.image_count
        self.presence_counts += other.presence_counts
        self.joint_presence_counts += other.joint_presence_counts
        self.relation_counts += other.relation_counts

        return self

    def _ensure_not_empty(self):
        if self.image_count == 0:
            raise ValidationException("Cannot count statistics over an empty dataset")

    def cooccurrence(self) -> np.ndarray:
        """Entry [c, c'] = #images with c and c' / #images with c'; zero for unobserved c'."""
        self._ensure_not_empty()

        matrix = np.zeros(self.joint_presence_counts.shape, dtype=np.float64)
        observed = self.presence_counts > 0
        matrix[:, observed] = self.joint_presence_counts[:, observed] / self.presence_counts[observed]

        return matrix

    def relation_prior(self) -> np.ndarray:
        """Counts normalized over predicates; category pairs never seen get a uniform fiber."""
        self._ensure_not_empty()

        num_predicates = self.schema.num_predicates
        totals = self.relation_counts.sum(axis=2)
        prior = np.full(self.relation_counts.shape, 1.0 / num_predicates)
        seen = totals > 0
        prior[seen] = self.relation_counts[seen] / totals[seen][:, None]

        return prior

    def observed_categories(self) -> np.ndarray:
        return self.presence_counts > 0

    def to_knowledge_base(self) -> KnowledgeBase:
        return KnowledgeBase(self.schema, self.cooccurrence(), self.relation_prior())


def count_object_cooccurrence(images: Iterable[AnnotatedImage], schema: DatasetSchema) -> np.ndarray:
    return KnowledgeCounter(schema).add_all(images).cooccurrence()


def count_relation_prior(images: Iterable[AnnotatedImage], schema: DatasetSchema) -> np.ndarray:
    return KnowledgeCounter(schema).add_all(images).relation_prior()


def build_knowledge_base(images: Iterable[AnnotatedImage], schema: DatasetSchema) -> KnowledgeBase:
    counter = KnowledgeCounter(schema).add_all(images)
    kb = counter.to_knowledge_base()
    kb.validate(counter.observed_categories())

    logger.info(f"Counted knowledge over {counter.image_count} images: "
                f"{int(counter.observed_categories().sum())}/{schema.num_categories} categories observed")

    return kb


def freq_predict(kb: KnowledgeBase, subj_label: int, obj_label: int, exclude_norel: bool = False) -> np.ndarray:
    """The stored predicate fiber; with ``exclude_norel`` class 0 is dropped and the rest renormalized."""
    distribution = np.array(kb.fiber(subj_label, obj_label), dtype=np.float64)
    if not exclude_norel:
        return distribution

    distribution[0] = 0.0
    remainder = distribution.sum()
    if remainder > 0:
        return distribution / remainder

    distribution[1:] = 1.0 / (kb.num_predicates - 1)
    return distribution


def freq_predict_image(image: AnnotatedImage, kb: KnowledgeBase, exclude_norel: bool = False) -> PredictedGraph:
    """FREQ baseline in the predicate-classification setting: ground-truth labels, prior lookup only."""
    labels = image.labels()
    object_probs = np.zeros((labels.size, kb.num_categories))
    object_probs[np.arange(labels.size), labels] = 1.0

    pairs = [PairPrediction(i, j, freq_predict(kb, int(labels[i]), int(labels[j]), exclude_norel))
             for i in range(labels.size) for j in range(labels.size) if i != j]

    return PredictedGraph(image.image_id, object_probs, pairs)


def make_uniform_ablation(kb: KnowledgeBase, include_objects: bool = False) -> KnowledgeBase:
    """
    Relation-prior ablation: every predicate fiber becomes uniform 1/K. With
    ``include_objects`` the co-occurrence matrix is flattened to 1/C as well.
    """
    c, k = kb.num_categories, kb.num_predicates
    relation_prior = np.full((c, c, k), 1.0 / k)
    cooccurrence = np.full((c, c), 1.0 / c) if include_objects else kb.cooccurrence

    return KnowledgeBase(kb.schema, cooccurrence, relation_prior)


def fiber_entropies(kb: KnowledgeBase) -> np.ndarray:
    prior = kb.relation_prior
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(prior > 0, -prior * np.log(prior), 0.0)

    return terms.sum(axis=2)


def predicate_distribution(images: Iterable[AnnotatedImage], schema: DatasetSchema) -> np.ndarray:
    """Annotated triplet counts per predicate (index 0, no-relationship, stays zero)."""
    counts = np.zeros(schema.num_predicates, dtype=np.int64)
    for image in images:
        for triplet in image.triplets:
            counts[triplet.predicate] += 1

    return counts


def summarize_knowledge(kb: KnowledgeBase, images: Sequence[AnnotatedImage], top_n: int = 10,
                        histogram_bins: int = 10) -> dict:
    schema = kb.schema
    c = kb.num_categories

    cooccurrence = kb.cooccurrence
    candidates = [(float(cooccurrence[i, j]), i, j) for i in range(c) for j in range(c) if i != j]
    candidates.sort(key=lambda t: (-t[0], t[1], t[2]))
    top_pairs = [
        {"category": schema.category_names[i], "given": schema.category_names[j], "probability": value}
        for value, i, j in candidates[:top_n] if value > 0
    ]

    max_entropy = float(np.log(kb.num_predicates))
    entropies = np.clip(fiber_entropies(kb).reshape(-1), 0.0, max_entropy)
    histogram, edges = np.histogram(entropies, bins=histogram_bins, range=(0.0, max_entropy))

    counts = predicate_distribution(images, schema)
    total = int(counts.sum())
    order = sorted(range(1, kb.num_predicates), key=lambda p: (-counts[p], p))
    distribution = [
        {"predicate": schema.predicate_names[p], "count": int(counts[p]),
         "share": float(counts[p]) / total if total else 0.0}
        for p in order
    ]

    return {
        "num_images": len(images),
        "num_categories": c,
        "num_predicates": kb.num_predicates,
        "top_cooccurrences": top_pairs,
        "fiber_entropy_histogram": {"counts": histogram.tolist(), "edges": edges.tolist()},
        "predicate_distribution": distribution,
    }


def format_summary(summary: dict) -> List[str]:
    lines = [f"{summary['num_images']} images, C={summary['num_categories']}, K={summary['num_predicates']}"]

    lines.append("Top co-occurrences P(category | given):")
    for entry in summary["top_cooccurrences"]:
        lines.append(f"  {entry['category']:<20} | {entry['given']:<20} {entry['probability']:.3f}")

    lines.append("Predicate fiber entropy histogram:")
    histogram = summary["fiber_entropy_histogram"]
    for count, low, high in zip(histogram["counts"], histogram["edges"][:-1], histogram["edges"][1:]):
        lines.append(f"  [{low:.2f}, {high:.2f}) {count}")

    lines.append("Predicate distribution:")
    for entry in summary["predicate_distribution"]:
        lines.append(f"  {entry['predicate']:<24} {entry['count']:>8d} {100 * entry['share']:6.2f}%")

    return lines
