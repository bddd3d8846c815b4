import json
from json import JSONDecodeError
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Union

import jsonschema

from jsonschema import ValidationError
from loguru import logger

from kern_core.domain.annotated_image import AnnotatedImage
from kern_core.domain.dataset_schema import DatasetSchema
from kern_core.exceptions.FormatException import FormatException
from kern_core.exceptions.KernException import KernException
from kern_core.storage.jsonl_storage import JsonLinesStorage
from kern_core.storage.storage import StorageBase
from kern_core.utils.file_utils import atomic_write

_box = {"type": "array", "items": {"type": "number"}, "minItems": 4, "maxItems": 4}
_index = {"type": "integer", "minimum": 0}


class AnnotationStorage(JsonLinesStorage):
    _recordSchema = {
        "type": "object",
        "required": ["image_id", "width", "height", "objects"],
        "properties": {
            "image_id": {"type": "string"},
            "width": {"type": "number", "exclusiveMinimum": 0},
            "height": {"type": "number", "exclusiveMinimum": 0},
            "objects": {
                "type": "array",
                "items": {
                    "type": "object",
                    "required": ["box", "label"],
                    "properties": {
                        "box": _box,
                        "label": _index,
                        "feature": {"type": "array", "items": {"type": "number"}},
                    }
                }
            },
            "relations": {
                "type": "array",
                "items": {
                    "type": "object",
                    "required": ["subj", "obj", "predicate"],
                    "properties": {
                        "subj": _index,
                        "obj": _index,
                        "predicate": _index,
                    }
                }
            },
        },
    }

    def iter_images(self, schema: Optional[DatasetSchema] = None) -> Iterator[AnnotatedImage]:
        for line_number, record in self.iter_records():
            image = AnnotatedImage.parse(record)
            if schema is not None:
                try:
                    image.validate(schema)
                except KernException as e:
                    raise FormatException(e.message, str(self.path), line_number)
            yield image

    def load(self, schema: Optional[DatasetSchema] = None) -> List[AnnotatedImage]:
        logger.info(f"Load annotations from '{self.path}'")

        images = list(self.iter_images(schema))
        ids = [image.image_id for image in images]
        if len(set(ids)) != len(ids):
            raise FormatException("image ids are not unique", str(self.path))

        logger.info(f"Loaded {len(images)} images")

        return images

    def save(self, images: Sequence[AnnotatedImage]):
        logger.info(f"Save {len(images)} images to '{self.path}'")
        self.save_records(image.to_dict() for image in images)


class SchemaStorage(StorageBase):
    _schemaSchema = {
        "type": "object",
        "required": ["categories", "predicates"],
        "properties": {
            "categories": {"type": "array", "items": {"type": "string"}, "minItems": 1},
            "predicates": {"type": "array", "items": {"type": "string"}, "minItems": 2},
        },
    }

    def __init__(self, path: Union[str, Path]):
        super().__init__(Path(path))

    def load(self) -> DatasetSchema:
        if not self.exists():
            raise FormatException("schema file does not exist", str(self.path))

        try:
            with self.path.open(encoding="utf-8") as f:
                data = json.load(f)
        except JSONDecodeError as e:
            raise FormatException(f"invalid JSON: {e.msg}", str(self.path), e.lineno)

        try:
            jsonschema.validate(data, self._schemaSchema)
        except ValidationError as e:
            raise FormatException(f"schema file is incorrect: {e.message}", str(self.path))

        try:
            return DatasetSchema.parse(data)
        except KernException as e:
            raise FormatException(e.message, str(self.path))

    def save(self, schema: DatasetSchema):
        with atomic_write(self.path) as f:
            json.dump(schema.to_dict(), f, indent=2)
