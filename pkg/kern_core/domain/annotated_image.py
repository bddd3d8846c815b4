from typing import List, Optional, Sequence, Set, Tuple

import numpy as np

from kern_core.domain.dataset_schema import DatasetSchema
from kern_core.exceptions.ValidationException import ValidationException


class Region:
    def __init__(self, box: Sequence[float], label: int, feature: Optional[Sequence[float]] = None):
        self.box: Tuple[float, float, float, float] = tuple(float(v) for v in box)
        self.label = int(label)
        self.feature: Optional[np.ndarray] = None if feature is None else np.asarray(feature, dtype=np.float64)

    def to_dict(self) -> dict:
        data = {"box": list(self.box), "label": self.label}
        if self.feature is not None:
            data["feature"] = self.feature.tolist()

        return data


class RelationAnnotation:
    def __init__(self, subj: int, obj: int, predicate: int):
        self.subj = int(subj)
        self.obj = int(obj)
        self.predicate = int(predicate)

    def to_dict(self) -> dict:
        return {"subj": self.subj, "obj": self.obj, "predicate": self.predicate}


class AnnotatedImage:
    def __init__(self, image_id: str, width: float, height: float,
                 regions: Sequence[Region], triplets: Sequence[RelationAnnotation]):
        self.image_id = str(image_id)
        self.width = float(width)
        self.height = float(height)
        self.regions: List[Region] = list(regions)
        self.triplets: List[RelationAnnotation] = list(triplets)

    @property
    def num_regions(self) -> int:
        return len(self.regions)

    @property
    def has_features(self) -> bool:
        return all(r.feature is not None for r in self.regions)

    def labels(self) -> np.ndarray:
        return np.array([r.label for r in self.regions], dtype=np.int64)

    def boxes(self) -> np.ndarray:
        return np.array([r.box for r in self.regions], dtype=np.float64).reshape(-1, 4)

    def features(self) -> np.ndarray:
        if not self.has_features:
            raise ValidationException(f"Image '{self.image_id}' has regions without feature vectors")

        return np.stack([r.feature for r in self.regions]) if self.regions else np.zeros((0, 0))

    def annotated_pairs(self) -> Set[Tuple[int, int]]:
        return {(t.subj, t.obj) for t in self.triplets}

    def truncated(self, max_regions: int) -> "AnnotatedImage":
        """Keeps the first ``max_regions`` regions and the triplets among them."""
        if self.num_regions <= max_regions:
            return self

        triplets = [t for t in self.triplets if t.subj < max_regions and t.obj < max_regions]
        return AnnotatedImage(self.image_id, self.width, self.height, self.regions[:max_regions], triplets)

    def validate(self, schema: DatasetSchema):
        for index, region in enumerate(self.regions):
            x1, y1, x2, y2 = region.box
            if not (0 <= x1 < x2 <= self.width and 0 <= y1 < y2 <= self.height):
                raise ValidationException(
                    f"Image '{self.image_id}': region {index} box {list(region.box)} is degenerate "
                    f"or outside {self.width}x{self.height}")
            if not 0 <= region.label < schema.num_categories:
                raise ValidationException(
                    f"Image '{self.image_id}': region {index} label {region.label} "
                    f"outside [0, {schema.num_categories})")

        lengths = {r.feature.shape for r in self.regions if r.feature is not None}
        if len(lengths) > 1 or any(len(shape) != 1 for shape in lengths):
            raise ValidationException(
                f"Image '{self.image_id}': region features have inconsistent shapes {sorted(lengths)}")

        seen = set()
        for triplet in self.triplets:
            if triplet.subj == triplet.obj:
                raise ValidationException(f"Image '{self.image_id}': triplet relates region {triplet.subj} to itself")
            if not (0 <= triplet.subj < self.num_regions and 0 <= triplet.obj < self.num_regions):
                raise ValidationException(
                    f"Image '{self.image_id}': triplet ({triplet.subj}, {triplet.obj}) has an invalid region index")
            if not 1 <= triplet.predicate < schema.num_predicates:
                raise ValidationException(
                    f"Image '{self.image_id}': annotated predicate {triplet.predicate} "
                    f"outside [1, {schema.num_predicates})")
            if (triplet.subj, triplet.obj) in seen:
                raise ValidationException(
                    f"Image '{self.image_id}': pair ({triplet.subj}, {triplet.obj}) is annotated twice")
            seen.add((triplet.subj, triplet.obj))

    @staticmethod
    def parse(json_object: dict) -> "AnnotatedImage":
        regions = [Region(o["box"], o["label"], o.get("feature")) for o in json_object.get("objects", [])]
        triplets = [RelationAnnotation(r["subj"], r["obj"], r["predicate"]) for r in json_object.get("relations", [])]

        return AnnotatedImage(json_object["image_id"], json_object["width"], json_object["height"], regions, triplets)

    def to_dict(self) -> dict:
        return {
            "image_id": self.image_id,
            "width": self.width,
            "height": self.height,
            "objects": [r.to_dict() for r in self.regions],
            "relations": [t.to_dict() for t in self.triplets],
        }
