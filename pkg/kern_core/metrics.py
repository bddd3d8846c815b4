#!/usr/bin/env python3

"""
Triplet ranking and the R@K / mR@K evaluation suite.

A predicted graph is turned into a ranked triplet list (score = P(subject label) *
P(object label) * P(predicate)), ground-truth triplets are matched greedily in
rank order, and recalls are averaged over images with at least one ground-truth
triplet. Mean recall averages per-predicate recalls over the predicates present.
"""

from concurrent.futures import ThreadPoolExecutor
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from loguru import logger

from kern_core.domain.annotated_image import AnnotatedImage
from kern_core.domain.eval_report import EvalReport
from kern_core.domain.predicted_graph import PredictedGraph
from kern_core.domain.relation_triplet import RankedTriplet, RelationTriplet
from kern_core.domain.task import Task
from kern_core.exceptions.ValidationException import ValidationException
from kern_core.utils.box_utils import box_iou

PROBABILITY_TOLERANCE = 1e-9
DEFAULT_KS = (20, 50, 100)

# Sentinel rank for ground-truth triplets that no prediction matched
UNMATCHED = np.iinfo(np.int64).max


def ground_truth_triplets(image: AnnotatedImage) -> List[RelationTriplet]:
    labels = image.labels()
    boxes = image.boxes()

    return [RelationTriplet(t.subj, t.obj, t.predicate, labels[t.subj], labels[t.obj], boxes[t.subj], boxes[t.obj])
            for t in image.triplets]


def _check_probabilities(values: np.ndarray, what: str, image_id: str):
    if values.size and (values.min() < -PROBABILITY_TOLERANCE or values.max() > 1 + PROBABILITY_TOLERANCE):
        raise ValidationException(f"Prediction '{image_id}': {what} probabilities outside [0, 1]")


def check_prediction_shapes(pred: PredictedGraph, image: AnnotatedImage, num_predicates: Optional[int] = None,
                            num_categories: Optional[int] = None):
    """Rejects predictions whose regions or distributions do not fit the evaluated image and schema."""
    # Predictions may cover a prefix of the regions when an image was truncated
    if pred.num_regions > image.num_regions:
        raise ValidationException(f"Prediction '{pred.image_id}' scores {pred.num_regions} regions, "
                                  f"the image has {image.num_regions}")

    if pred.num_regions and pred.object_probs.ndim != 2:
        raise ValidationException(f"Prediction '{pred.image_id}': object distributions are not a matrix")
    if num_categories is not None and pred.num_regions and pred.object_probs.shape[1] != num_categories:
        raise ValidationException(f"Prediction '{pred.image_id}': object distributions have "
                                  f"{pred.object_probs.shape[1]} classes, expected {num_categories}")

    lengths = {p.probs.shape for p in pred.pairs}
    if len(lengths) > 1 or any(len(shape) != 1 for shape in lengths):
        raise ValidationException(f"Prediction '{pred.image_id}': predicate distributions have ragged rows")
    if num_predicates is not None and lengths and lengths != {(num_predicates,)}:
        raise ValidationException(f"Prediction '{pred.image_id}': predicate distributions have "
                                  f"{lengths.pop()[0]} classes, expected {num_predicates}")


def rank_triplets(pred: PredictedGraph, constraint: bool) -> List[RankedTriplet]:
    """
    Triplets for predicates k >= 1 ordered by score descending, ties broken by
    (subject, object, predicate) ascending. With ``constraint`` only the most
    probable predicate of each ordered pair enters.
    """
    _check_probabilities(pred.object_probs, "object", pred.image_id)
    if not pred.pairs:
        return []

    if len({p.probs.shape for p in pred.pairs}) > 1:
        raise ValidationException(f"Prediction '{pred.image_id}': predicate distributions have ragged rows")

    probs = np.stack([p.probs for p in pred.pairs])
    _check_probabilities(probs, "predicate", pred.image_id)
    if probs.shape[1] < 2:
        raise ValidationException(f"Prediction '{pred.image_id}': predicate distributions need at least 2 classes")

    subj = np.array([p.subj for p in pred.pairs], dtype=np.int64)
    obj = np.array([p.obj for p in pred.pairs], dtype=np.int64)
    if subj.min() < 0 or obj.min() < 0 or max(subj.max(), obj.max()) >= pred.num_regions:
        raise ValidationException(f"Prediction '{pred.image_id}': pair refers to a region outside "
                                  f"[0, {pred.num_regions})")

    labels = pred.object_labels()
    pair_scores = pred.object_scores()[subj] * pred.object_scores()[obj]

    if constraint:
        predicates = np.argmax(probs[:, 1:], axis=1) + 1
        rows = np.arange(len(pred.pairs))
    else:
        num_predicates = probs.shape[1]
        rows = np.repeat(np.arange(len(pred.pairs)), num_predicates - 1)
        predicates = np.tile(np.arange(1, num_predicates), len(pred.pairs))

    scores = pair_scores[rows] * probs[rows, predicates]
    order = np.lexsort((predicates, obj[rows], subj[rows], -scores))

    boxes = pred.boxes
    ranked = []
    for index in order:
        i, j = subj[rows[index]], obj[rows[index]]
        ranked.append(RankedTriplet(
            i, j, predicates[index], scores[index], labels[i], labels[j],
            None if boxes is None else boxes[i], None if boxes is None else boxes[j]))

    return ranked


def _is_match(prediction: RankedTriplet, gt: RelationTriplet, match_mode: str, iou_threshold: float) -> bool:
    if prediction.predicate != gt.predicate or prediction.subj_label != gt.subj_label \
            or prediction.obj_label != gt.obj_label:
        return False

    if match_mode == "index":
        return prediction.subj_idx == gt.subj_idx and prediction.obj_idx == gt.obj_idx

    if prediction.subj_box is None or prediction.obj_box is None:
        raise ValidationException("IoU matching needs predicted boxes")

    return box_iou(prediction.subj_box, gt.subj_box) >= iou_threshold \
        and box_iou(prediction.obj_box, gt.obj_box) >= iou_threshold


def match_ranks(ranked: Sequence[RankedTriplet], gt_triplets: Sequence[RelationTriplet], limit: Optional[int] = None,
                match_mode: str = "index", iou_threshold: float = 0.5) -> np.ndarray:
    """
    Greedy one-to-one matching in rank order over the first ``limit`` predictions.
    Returns, per ground-truth triplet, the rank of the prediction it was matched to
    or UNMATCHED. The matching of a top-K prefix is a prefix of this matching, so
    hits at any K <= limit are ``ranks < K``.
    """
    ranks = np.full(len(gt_triplets), UNMATCHED, dtype=np.int64)
    candidates = ranked if limit is None else ranked[:limit]

    if match_mode == "index":
        open_gt: Dict[Tuple[int, int, int, int, int], List[int]] = {}
        for index, gt in enumerate(gt_triplets):
            key = (gt.subj_idx, gt.obj_idx, gt.predicate, gt.subj_label, gt.obj_label)
            open_gt.setdefault(key, []).append(index)

        for rank, prediction in enumerate(candidates):
            key = (prediction.subj_idx, prediction.obj_idx, prediction.predicate,
                   prediction.subj_label, prediction.obj_label)
            waiting = open_gt.get(key)
            if waiting:
                ranks[waiting.pop(0)] = rank
        return ranks

    for rank, prediction in enumerate(candidates):
        for index, gt in enumerate(gt_triplets):
            if ranks[index] == UNMATCHED and _is_match(prediction, gt, match_mode, iou_threshold):
                ranks[index] = rank
                break

    return ranks


def recall_at_k(ranked: Sequence[RankedTriplet], gt_triplets: Sequence[RelationTriplet], k: int,
                match_mode: str = "index", iou_threshold: float = 0.5) -> Optional[float]:
    """Fraction of ground-truth triplets hit by the top ``k``; None for an image without ground truth."""
    if k < 1:
        raise ValidationException("K must be >= 1")
    if not gt_triplets:
        return None

    ranks = match_ranks(ranked, gt_triplets, k, match_mode, iou_threshold)
    return float(np.count_nonzero(ranks < k)) / len(gt_triplets)


class ImageMatch:
    """Matching result of one image: ground-truth predicates and the rank each was matched at."""

    def __init__(self, image_id: str, predicates: np.ndarray, ranks: np.ndarray):
        self.image_id = image_id
        self.predicates = predicates
        self.ranks = ranks

    @property
    def has_ground_truth(self) -> bool:
        return self.predicates.size > 0

    def hits(self, k: int) -> np.ndarray:
        return self.ranks < k


def match_image(ranked: Sequence[RankedTriplet], gt_triplets: Sequence[RelationTriplet], limit: int,
                match_mode: str = "index", iou_threshold: float = 0.5, image_id: str = "") -> ImageMatch:
    predicates = np.array([t.predicate for t in gt_triplets], dtype=np.int64)
    return ImageMatch(image_id, predicates, match_ranks(ranked, gt_triplets, limit, match_mode, iou_threshold))


def overall_recall(matches: Iterable[ImageMatch], k: int) -> float:
    recalls = [np.mean(m.hits(k)) for m in matches if m.has_ground_truth]
    return float(np.mean(recalls)) if recalls else 0.0


def mean_recall_at_k(matches: Sequence[ImageMatch], k: int, num_predicates: int,
                     pooling: str = "image") -> Tuple[float, List[Optional[float]]]:
    """
    Per-predicate recall at ``k`` and its mean over predicates with ground truth.
    "image" pooling averages, per predicate, the per-image recalls of the images
    containing it; "dataset" pooling divides total hits by total occurrences.
    """
    if pooling not in ("image", "dataset"):
        raise ValidationException(f"Unknown mean recall pooling '{pooling}'")

    per_predicate: List[Optional[float]] = []
    for predicate in range(1, num_predicates):
        image_recalls = []
        hit_total, gt_total = 0, 0
        for match in matches:
            selected = match.predicates == predicate
            count = int(np.count_nonzero(selected))
            if count == 0:
                continue
            hits = int(np.count_nonzero(match.hits(k)[selected]))
            image_recalls.append(hits / count)
            hit_total += hits
            gt_total += count

        if gt_total == 0:
            per_predicate.append(None)
        elif pooling == "image":
            per_predicate.append(float(np.mean(image_recalls)))
        else:
            per_predicate.append(hit_total / gt_total)

    present = [r for r in per_predicate if r is not None]
    return (float(np.mean(present)) if present else 0.0), per_predicate


def predicate_counts(matches: Iterable[ImageMatch], num_predicates: int) -> List[int]:
    counts = np.zeros(num_predicates, dtype=np.int64)
    for match in matches:
        np.add.at(counts, match.predicates, 1)

    return counts[1:].tolist()


def build_report(matches: Sequence[ImageMatch], task: Task, constraint: bool, ks: Sequence[int],
                 num_predicates: int, pooling: str = "image") -> EvalReport:
    evaluated = [m for m in matches if m.has_ground_truth]

    recall, mean_recall, per_predicate = {}, {}, {}
    for k in ks:
        recall[k] = overall_recall(evaluated, k)
        mean_recall[k], per_predicate[k] = mean_recall_at_k(evaluated, k, num_predicates, pooling)

    return EvalReport(task, constraint, ks, recall, mean_recall, per_predicate, len(evaluated),
                      predicate_counts(evaluated, num_predicates))


def _index_predictions(images: Sequence[AnnotatedImage], predictions: Iterable[PredictedGraph],
                       num_predicates: Optional[int], num_categories: Optional[int]) -> Dict[str, PredictedGraph]:
    by_id = {p.image_id: p for p in predictions}
    missing = [image.image_id for image in images if image.image_id not in by_id]
    if missing:
        shown = ", ".join(missing[:10]) + (f" and {len(missing) - 10} more" if len(missing) > 10 else "")
        raise ValidationException(f"Predictions are missing for {len(missing)} images: {shown}")

    extra = len(by_id) - len(images)
    if extra > 0:
        logger.warning(f"Ignoring {extra} predictions for images outside the evaluated dataset")

    for image in images:
        check_prediction_shapes(by_id[image.image_id], image, num_predicates, num_categories)

    return by_id


def evaluate_task(images: Sequence[AnnotatedImage], predictions: Iterable[PredictedGraph], task: Task,
                  ks: Sequence[int] = DEFAULT_KS, match_mode: str = "index", iou_threshold: float = 0.5,
                  pooling: str = "image", num_predicates: Optional[int] = None,
                  threads: int = 1, num_categories: Optional[int] = None) -> List[EvalReport]:
    """
    Reports with and without the graph constraint for one task's predictions. When
    ``num_predicates`` or ``num_categories`` is given, every prediction must use it.
    """
    by_id = _index_predictions(images, predictions, num_predicates, num_categories)
    limit = max(ks)

    if num_predicates is None:
        sizes = {p.probs.shape[0] for image in images for p in by_id[image.image_id].pairs}
        if len(sizes) > 1:
            raise ValidationException(f"Predicate distributions have inconsistent lengths {sorted(sizes)}")
        num_predicates = sizes.pop() if sizes else 2

    def _match(image: AnnotatedImage) -> Tuple[ImageMatch, ImageMatch]:
        gt = ground_truth_triplets(image)
        pred = by_id[image.image_id]
        return tuple(match_image(rank_triplets(pred, constraint), gt, limit, match_mode, iou_threshold,
                                 image.image_id)
                     for constraint in (True, False))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            results = list(executor.map(_match, images))
    else:
        results = [_match(image) for image in images]

    reports = []
    for position, constraint in enumerate((True, False)):
        matches = [r[position] for r in results]
        reports.append(build_report(matches, task, constraint, ks, num_predicates, pooling))

    logger.info(f"Evaluated {task.name} on {reports[0].image_count} images with ground truth")

    return reports


def evaluate(images: Sequence[AnnotatedImage], predictions: Mapping[Task, Iterable[PredictedGraph]],
             ks: Sequence[int] = DEFAULT_KS, match_mode: str = "index", iou_threshold: float = 0.5,
             pooling: str = "image", num_predicates: Optional[int] = None, threads: int = 1,
             num_categories: Optional[int] = None) -> List[EvalReport]:
    reports = []
    for task in sorted(predictions, key=lambda t: list(Task).index(t)):
        reports.extend(evaluate_task(images, predictions[task], task, ks, match_mode, iou_threshold, pooling,
                                     num_predicates, threads, num_categories))

    return reports


def mean_over_tasks(reports: Sequence[EvalReport], ks: Sequence[int] = (50, 100)) -> Dict[bool, Dict[str, float]]:
    """Mean of R@K and mR@K over the evaluated tasks and the given K values, per constraint mode."""
    summary = {}
    for constraint in (True, False):
        selected = [r for r in reports if r.constraint == constraint]
        if not selected:
            continue
        recalls = [r.recall[k] for r in selected for k in ks if k in r.recall]
        mean_recalls = [r.mean_recall[k] for r in selected for k in ks if k in r.mean_recall]
        summary[constraint] = {
            "recall": float(np.mean(recalls)) if recalls else 0.0,
            "mean_recall": float(np.mean(mean_recalls)) if mean_recalls else 0.0,
        }

    return summary


def per_predicate_improvement(baseline: EvalReport, candidate: EvalReport, k: int) -> List[dict]:
    """Per-predicate R@K of two reports side by side, ordered by ground-truth share."""
    if baseline.gt_counts != candidate.gt_counts:
        raise ValidationException("Reports were computed on different ground truth")

    total = sum(baseline.gt_counts)
    rows = []
    for index, count in enumerate(baseline.gt_counts):
        before = baseline.per_predicate_recall[k][index]
        after = candidate.per_predicate_recall[k][index]
        if before is None or after is None:
            continue
        rows.append({"predicate": index + 1, "share": count / total, "baseline": before, "candidate": after,
                     "improvement": after - before})

    rows.sort(key=lambda row: (-row["share"], row["predicate"]))
    return rows


def format_improvement_table(rows: Sequence[dict], k: int, predicate_names: Optional[Sequence[str]] = None) -> str:
    lines = [f"{'predicate':<24}{'share':>8}{'base R@' + str(k):>12}{'new R@' + str(k):>12}{'delta':>9}"]
    for row in rows:
        name = predicate_names[row["predicate"]] if predicate_names else str(row["predicate"])
        lines.append(f"{name:<24}{100 * row['share']:>7.2f}%{100 * row['baseline']:>12.2f}"
                     f"{100 * row['candidate']:>12.2f}{100 * row['improvement']:>+9.2f}")

    return "\n".join(lines)
