from typing import List, Sequence

from kern_core.exceptions.ValidationException import ValidationException

NO_RELATIONSHIP = "no-relationship"


class DatasetSchema:
    """Object categories and predicate classes; predicate 0 is always no-relationship."""

    def __init__(self, category_names: Sequence[str], predicate_names: Sequence[str]):
        self.category_names: List[str] = list(category_names)
        self.predicate_names: List[str] = list(predicate_names)

        self.validate()

    @property
    def num_categories(self) -> int:
        return len(self.category_names)

    @property
    def num_predicates(self) -> int:
        return len(self.predicate_names)

    def validate(self):
        if self.num_categories < 1:
            raise ValidationException("Schema needs at least one object category")
        if self.num_predicates < 2:
            raise ValidationException("Schema needs no-relationship plus at least one predicate")
        if self.predicate_names[0] != NO_RELATIONSHIP:
            raise ValidationException(f"Predicate 0 must be '{NO_RELATIONSHIP}', got '{self.predicate_names[0]}'")
        if len(set(self.category_names)) != self.num_categories:
            raise ValidationException("Category names must be unique")
        if len(set(self.predicate_names)) != self.num_predicates:
            raise ValidationException("Predicate names must be unique")

    def __eq__(self, other) -> bool:
        return isinstance(other, DatasetSchema) \
            and self.category_names == other.category_names \
            and self.predicate_names == other.predicate_names

    @staticmethod
    def parse(json_object: dict) -> "DatasetSchema":
        return DatasetSchema(json_object["categories"], json_object["predicates"])

    def to_dict(self) -> dict:
        return {
            "categories": list(self.category_names),
            "predicates": list(self.predicate_names),
        }
