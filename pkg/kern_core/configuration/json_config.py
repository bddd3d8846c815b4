import json
from json import JSONDecodeError
from pathlib import Path
from typing import Optional, Union

import jsonschema

from jsonschema import ValidationError
from loguru import logger

from kern_core.configuration.config import Config
from kern_core.exceptions.FormatException import FormatException
from kern_core.utils.file_utils import atomic_write

_integer = {"type": "integer"}
_number = {"type": "number"}
_positive_integer = {"type": "integer", "minimum": 1}


class JsonConfig(Config):
    # See http://json-schema.org/latest/json-schema-validation.html to update schema
    _configSchema = {
        "type": "object",
        "additionalProperties": False,
        "properties": {
            "model": {
                "type": "object",
                "additionalProperties": False,
                "properties": {
                    "hidden_dim": _positive_integer,
                    "output_dim": _positive_integer,
                    "object_steps": _positive_integer,
                    "relation_steps": _positive_integer,
                    "max_regions": _positive_integer,
                    "pair_batch_size": _positive_integer,
                }
            },
            "train": {
                "type": "object",
                "additionalProperties": False,
                "properties": {
                    "learning_rate": {"type": "number", "minimum": 0},
                    "batch_size": _positive_integer,
                    "beta1": _number,
                    "beta2": _number,
                    "epsilon": _number,
                    "epochs": _positive_integer,
                    "negative_ratio": {"type": "number", "minimum": 0},
                    "lr_decay": _number,
                    "patience": _positive_integer,
                    "object_loss_weight": _number,
                    "relation_loss_weight": _number,
                    "validation_task": {"type": "string", "enum": ["predcls", "sgcls"]},
                    "validation_k": _positive_integer,
                }
            },
            "eval": {
                "type": "object",
                "additionalProperties": False,
                "properties": {
                    "ks": {"type": "array", "items": _positive_integer, "minItems": 1},
                    "tasks": {"type": "array", "items": {"type": "string", "enum": ["predcls", "sgcls"]}},
                    "match_mode": {"type": "string", "enum": ["index", "iou"]},
                    "iou_threshold": _number,
                    "mean_recall_pooling": {"type": "string", "enum": ["image", "dataset"]},
                    "exclude_norel": {"type": "boolean"},
                }
            },
            "synth": {
                "type": "object",
                "additionalProperties": False,
                "properties": {
                    "num_categories": _positive_integer,
                    "num_predicates": {"type": "integer", "minimum": 2},
                    "feature_dim": _positive_integer,
                    "num_images": _positive_integer,
                    "min_objects": _positive_integer,
                    "max_objects": _positive_integer,
                    "image_width": _number,
                    "image_height": _number,
                    "category_zipf_exponent": _number,
                    "predicate_zipf_exponent": _number,
                    "dirichlet_concentration": _number,
                    "prior_temperature": _number,
                    "cooccurrence_mixing": _number,
                    "feature_noise": _number,
                    "annotated_pair_fraction": _number,
                    "split_fractions": {"type": "array", "items": _number, "minItems": 3, "maxItems": 3},
                    "oracle_samples": _positive_integer,
                    "oracle_batches": {"type": "integer", "minimum": 2},
                    "seed": {"type": "integer", "minimum": 0},
                }
            },
            "runtime": {
                "type": "object",
                "additionalProperties": False,
                "properties": {
                    "seed": {"type": "integer", "minimum": 0},
                    "threads": _positive_integer,
                    "debug": {"type": "boolean"},
                }
            },
        },
    }

    def __init__(self, config_path: Optional[Union[str, Path]] = None):
        super().__init__()

        self.config_path = Path(config_path) if config_path is not None else None

    def load(self):
        """Overlays the file's settings on the built-in defaults; a missing path keeps the defaults."""
        if self.config_path is None:
            return

        logger.info(f"Load config from '{self.config_path}'")

        if not self.config_path.exists() or not self.config_path.is_file():
            raise FormatException("config file does not exist", str(self.config_path))

        try:
            with self.config_path.open() as config_file:
                data = json.load(config_file)
        except JSONDecodeError as e:
            raise FormatException(f"failed to read JSON config: {e.msg}", str(self.config_path), e.lineno)

        try:
            jsonschema.validate(data, self._configSchema)
        except ValidationError as e:
            raise FormatException(f"JSON config is incorrect: {e.message}", str(self.config_path))

        self.update(data)

    def save(self, path: Optional[Union[str, Path]] = None):
        target = Path(path) if path is not None else self.config_path

        logger.info(f"Save config to '{target}'")

        with atomic_write(target) as config_file:
            json.dump(self.to_dict(), config_file, indent=4)
