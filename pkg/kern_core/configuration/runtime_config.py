from kern_core.configuration.section_config import SectionConfig
from kern_core.exceptions.ValidationException import ValidationException


class RuntimeConfig(SectionConfig):
    def __init__(self):
        self.seed = 0
        self.threads = 1
        self.debug = False

    def validate(self):
        if self.threads < 1:
            raise ValidationException("runtime.threads must be >= 1")
        if self.seed < 0:
            raise ValidationException("runtime.seed must be >= 0")
