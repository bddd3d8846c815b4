from typing import Any, Dict

from kern_core.exceptions.ValidationException import ValidationException


class SectionConfig:
    """A flat group of settings; attribute names double as JSON keys."""

    def to_dict(self) -> Dict[str, Any]:
        return {key: (list(value) if isinstance(value, tuple) else value)
                for key, value in vars(self).items() if not key.startswith("_")}

    def update(self, data: Dict[str, Any]):
        for key, value in data.items():
            if value is None:
                continue
            if not hasattr(self, key) or key.startswith("_"):
                raise ValidationException(f"Unknown setting '{key}' in section '{type(self).__name__}'")
            setattr(self, key, value)

        self.validate()

    def validate(self):
        pass
