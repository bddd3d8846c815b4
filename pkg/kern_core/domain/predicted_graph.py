from typing import List, Optional, Sequence

import numpy as np

from kern_core.exceptions.ValidationException import ValidationException


class PairPrediction:
    def __init__(self, subj: int, obj: int, probs: Sequence[float]):
        self.subj = int(subj)
        self.obj = int(obj)
        self.probs = np.asarray(probs, dtype=np.float64)

    def to_dict(self) -> dict:
        return {"subj": self.subj, "obj": self.obj, "probs": self.probs.tolist()}


class PredictedGraph:
    """
    Per-region object label distributions (n x C) plus a predicate distribution
    over K classes for every scored ordered pair. ``boxes`` is only set for
    externally supplied detections that are matched by IoU.
    """

    def __init__(self, image_id: str, object_probs: np.ndarray, pairs: Sequence[PairPrediction],
                 boxes: Optional[np.ndarray] = None):
        self.image_id = str(image_id)
        self.object_probs = np.asarray(object_probs, dtype=np.float64)
        self.pairs: List[PairPrediction] = list(pairs)
        self.boxes = None if boxes is None else np.asarray(boxes, dtype=np.float64).reshape(-1, 4)

    @property
    def num_regions(self) -> int:
        return self.object_probs.shape[0]

    def object_labels(self) -> np.ndarray:
        # np.argmax resolves ties to the lowest index
        return np.argmax(self.object_probs, axis=1) if self.num_regions else np.zeros(0, dtype=np.int64)

    def object_scores(self) -> np.ndarray:
        return np.max(self.object_probs, axis=1) if self.num_regions else np.zeros(0)

    @staticmethod
    def parse(json_object: dict) -> "PredictedGraph":
        pairs = [PairPrediction(p["subj"], p["obj"], p["probs"]) for p in json_object.get("pairs", [])]
        objects = json_object.get("objects", [])
        if len({len(row) for row in objects}) > 1:
            raise ValidationException(f"Prediction '{json_object['image_id']}': object distributions "
                                      "have ragged rows")
        object_probs = np.asarray(objects, dtype=np.float64) if objects else np.zeros((0, 0))
        boxes = json_object.get("boxes")

        return PredictedGraph(json_object["image_id"], object_probs, pairs, boxes)

    def to_dict(self) -> dict:
        data = {
            "image_id": self.image_id,
            "objects": self.object_probs.tolist(),
            "pairs": [p.to_dict() for p in self.pairs],
        }
        if self.boxes is not None:
            data["boxes"] = self.boxes.tolist()

        return data
