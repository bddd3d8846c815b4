from typing import Optional

import numpy as np

from kern_core.domain.dataset_schema import DatasetSchema
from kern_core.exceptions.DimensionException import DimensionException
from kern_core.exceptions.ValidationException import ValidationException

FIBER_TOLERANCE = 1e-9


class KnowledgeBase:
    """
    Statistical knowledge counted from training annotations:

    * ``cooccurrence`` (C x C): entry [c, c'] = P(c present in an image | c' present)
    * ``relation_prior`` (C x C x K): fiber [c, c', :] = P(predicate | subject c, object c'),
      predicate 0 being no-relationship.

    Instances are treated as immutable; ablations return copies.
    """

    def __init__(self, schema: DatasetSchema, cooccurrence: np.ndarray, relation_prior: np.ndarray):
        self.schema = schema
        self.cooccurrence = np.array(cooccurrence, dtype=np.float64)
        self.relation_prior = np.array(relation_prior, dtype=np.float64)

        c, k = schema.num_categories, schema.num_predicates
        if self.cooccurrence.shape != (c, c):
            raise DimensionException("co-occurrence matrix does not match the schema", self.cooccurrence.shape, (c, c))
        if self.relation_prior.shape != (c, c, k):
            raise DimensionException("relation prior does not match the schema", self.relation_prior.shape, (c, c, k))

        self.cooccurrence.setflags(write=False)
        self.relation_prior.setflags(write=False)

    @property
    def num_categories(self) -> int:
        return self.schema.num_categories

    @property
    def num_predicates(self) -> int:
        return self.schema.num_predicates

    def fiber(self, subj_label: int, obj_label: int) -> np.ndarray:
        self._check_label(subj_label)
        self._check_label(obj_label)
        return self.relation_prior[subj_label, obj_label]

    def fibers(self, subj_labels: np.ndarray, obj_labels: np.ndarray) -> np.ndarray:
        subj_labels = np.asarray(subj_labels, dtype=np.int64)
        obj_labels = np.asarray(obj_labels, dtype=np.int64)
        for label in np.concatenate([subj_labels, obj_labels]):
            self._check_label(int(label))

        return self.relation_prior[subj_labels, obj_labels]

    def _check_label(self, label: int):
        if not 0 <= label < self.num_categories:
            raise ValidationException(f"Category label {label} outside [0, {self.num_categories})")

    def validate(self, observed: Optional[np.ndarray] = None):
        """Checks probability ranges, fiber normalization and, if given, observed diagonals."""
        if np.any(self.cooccurrence < 0) or np.any(self.cooccurrence > 1):
            raise ValidationException("Co-occurrence entries must lie in [0, 1]")
        if np.any(self.relation_prior < 0) or np.any(self.relation_prior > 1):
            raise ValidationException("Relation prior entries must lie in [0, 1]")

        sums = self.relation_prior.sum(axis=2)
        worst = float(np.max(np.abs(sums - 1.0))) if sums.size else 0.0
        if worst > FIBER_TOLERANCE:
            raise ValidationException(f"Relation prior fibers must sum to 1, worst deviation {worst:.3e}")

        if observed is not None:
            diagonal = np.diag(self.cooccurrence)[np.asarray(observed, dtype=bool)]
            if np.any(diagonal != 1.0):
                raise ValidationException("Observed categories must co-occur with themselves with probability 1")

    def __eq__(self, other) -> bool:
        return isinstance(other, KnowledgeBase) \
            and self.schema == other.schema \
            and np.array_equal(self.cooccurrence, other.cooccurrence) \
            and np.array_equal(self.relation_prior, other.relation_prior)
