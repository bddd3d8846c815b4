from kern_core.configuration.section_config import SectionConfig
from kern_core.exceptions.ValidationException import ValidationException

MATCH_MODES = ("index", "iou")
POOLING_MODES = ("image", "dataset")


class EvalConfig(SectionConfig):
    def __init__(self):
        self.ks = [20, 50, 100]
        self.tasks = ["predcls", "sgcls"]
        self.match_mode = "index"
        self.iou_threshold = 0.5
        # "image": mean over images containing the predicate, then over predicates
        self.mean_recall_pooling = "image"
        self.exclude_norel = False

    def validate(self):
        if not self.ks or any(k < 1 for k in self.ks):
            raise ValidationException("eval.ks must be a non-empty list of positive integers")
        if self.match_mode not in MATCH_MODES:
            raise ValidationException(f"eval.match_mode must be one of {MATCH_MODES}")
        if self.mean_recall_pooling not in POOLING_MODES:
            raise ValidationException(f"eval.mean_recall_pooling must be one of {POOLING_MODES}")
        if not 0 < self.iou_threshold <= 1:
            raise ValidationException("eval.iou_threshold must lie in (0, 1]")
