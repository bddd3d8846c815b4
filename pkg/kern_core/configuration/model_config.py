from kern_core.configuration.section_config import SectionConfig
from kern_core.exceptions.ValidationException import ValidationException


class ModelConfig(SectionConfig):
    def __init__(self):
        self.hidden_dim = 64
        self.output_dim = 64
        self.object_steps = 3
        self.relation_steps = 3
        self.max_regions = 64
        self.pair_batch_size = 256

    def validate(self):
        for name in ("hidden_dim", "output_dim", "object_steps", "relation_steps", "max_regions", "pair_batch_size"):
            if getattr(self, name) < 1:
                raise ValidationException(f"model.{name} must be >= 1")
