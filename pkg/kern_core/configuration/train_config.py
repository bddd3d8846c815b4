from kern_core.configuration.section_config import SectionConfig
from kern_core.exceptions.ValidationException import ValidationException


class TrainConfig(SectionConfig):
    def __init__(self):
        self.learning_rate = 1e-4
        self.batch_size = 2
        self.beta1 = 0.9
        self.beta2 = 0.999
        self.epsilon = 1e-8
        self.epochs = 10
        self.negative_ratio = 3
        self.lr_decay = 10.0
        self.patience = 2
        self.object_loss_weight = 1.0
        self.relation_loss_weight = 1.0
        self.validation_task = "predcls"
        self.validation_k = 50

    def validate(self):
        if self.learning_rate < 0:
            raise ValidationException("train.learning_rate must be >= 0")
        if not 0 <= self.beta1 < 1 or not 0 <= self.beta2 < 1:
            raise ValidationException("train.beta1 and train.beta2 must lie in [0, 1)")
        for name in ("batch_size", "epochs", "patience", "validation_k"):
            if getattr(self, name) < 1:
                raise ValidationException(f"train.{name} must be >= 1")
        for name in ("epsilon", "lr_decay"):
            if getattr(self, name) <= 0:
                raise ValidationException(f"train.{name} must be > 0")
        if self.negative_ratio < 0:
            raise ValidationException("train.negative_ratio must be >= 0")
        if self.object_loss_weight < 0 or self.relation_loss_weight < 0:
            raise ValidationException("train loss weights must be >= 0")
