from typing import Optional, Sequence, Tuple

Box = Tuple[float, float, float, float]


class RelationTriplet:
    def __init__(self, subj_idx: int, obj_idx: int, predicate: int, subj_label: int, obj_label: int,
                 subj_box: Optional[Sequence[float]] = None, obj_box: Optional[Sequence[float]] = None):
        self.subj_idx = int(subj_idx)
        self.obj_idx = int(obj_idx)
        self.predicate = int(predicate)
        self.subj_label = int(subj_label)
        self.obj_label = int(obj_label)
        self.subj_box: Optional[Box] = None if subj_box is None else tuple(float(v) for v in subj_box)
        self.obj_box: Optional[Box] = None if obj_box is None else tuple(float(v) for v in obj_box)

    def __repr__(self):
        return "{0}({1}, {2}, predicate={3}, labels=({4}, {5}))".format(
            type(self).__name__, self.subj_idx, self.obj_idx, self.predicate, self.subj_label, self.obj_label)


class RankedTriplet(RelationTriplet):
    def __init__(self, subj_idx: int, obj_idx: int, predicate: int, score: float, subj_label: int, obj_label: int,
                 subj_box: Optional[Sequence[float]] = None, obj_box: Optional[Sequence[float]] = None):
        super().__init__(subj_idx, obj_idx, predicate, subj_label, obj_label, subj_box, obj_box)
        self.score = float(score)
