from typing import List, Sequence

from loguru import logger

from kern_core.domain.predicted_graph import PredictedGraph
from kern_core.storage.jsonl_storage import JsonLinesStorage

_probabilities = {"type": "array", "items": {"type": "number"}}


class PredictionStorage(JsonLinesStorage):
    _recordSchema = {
        "type": "object",
        "required": ["image_id", "objects", "pairs"],
        "properties": {
            "image_id": {"type": "string"},
            "objects": {"type": "array", "items": _probabilities},
            "pairs": {
                "type": "array",
                "items": {
                    "type": "object",
                    "required": ["subj", "obj", "probs"],
                    "properties": {
                        "subj": {"type": "integer", "minimum": 0},
                        "obj": {"type": "integer", "minimum": 0},
                        "probs": _probabilities,
                    }
                }
            },
            "boxes": {"type": "array", "items": {"type": "array", "items": {"type": "number"},
                                                 "minItems": 4, "maxItems": 4}},
        },
    }

    def load(self) -> List[PredictedGraph]:
        logger.info(f"Load predictions from '{self.path}'")
        return [PredictedGraph.parse(record) for _, record in self.iter_records()]

    def save(self, predictions: Sequence[PredictedGraph]):
        logger.info(f"Save predictions for {len(predictions)} images to '{self.path}'")
        self.save_records(p.to_dict() for p in predictions)
