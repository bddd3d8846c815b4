from typing import Sequence

import numpy as np

from kern_core.exceptions.ValidationException import ValidationException


def box_area(box: Sequence[float]) -> float:
    x1, y1, x2, y2 = box
    return max(0.0, x2 - x1) * max(0.0, y2 - y1)


def box_iou(a: Sequence[float], b: Sequence[float]) -> float:
    inter_w = min(a[2], b[2]) - max(a[0], b[0])
    inter_h = min(a[3], b[3]) - max(a[1], b[1])
    intersection = max(0.0, inter_w) * max(0.0, inter_h)
    union = box_area(a) + box_area(b) - intersection

    return intersection / union if union > 0 else 0.0


def box_geometry(box: Sequence[float], width: float, height: float) -> np.ndarray:
    """[cx / W, cy / H, w / W, h / H] of a non-degenerate box."""
    x1, y1, x2, y2 = (float(v) for v in box)
    if x2 <= x1 or y2 <= y1:
        raise ValidationException(f"Degenerate box {list(box)} has zero area")

    return np.array([(x1 + x2) / 2.0 / width, (y1 + y2) / 2.0 / height, (x2 - x1) / width, (y2 - y1) / height])
