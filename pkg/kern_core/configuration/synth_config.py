from kern_core.configuration.section_config import SectionConfig
from kern_core.exceptions.ValidationException import ValidationException


class SynthConfig(SectionConfig):
    """Reference skewed configuration: C = 20 categories, K = 11 predicate classes."""

    def __init__(self):
        self.num_categories = 20
        self.num_predicates = 11
        self.feature_dim = 16
        self.num_images = 3000
        self.min_objects = 2
        self.max_objects = 6
        self.image_width = 512.0
        self.image_height = 512.0
        self.category_zipf_exponent = 1.0
        self.predicate_zipf_exponent = 1.0
        self.dirichlet_concentration = 1.0
        self.prior_temperature = 3.0
        self.cooccurrence_mixing = 0.7
        self.feature_noise = 0.5
        self.annotated_pair_fraction = 0.3
        self.split_fractions = [0.6, 0.1, 0.3]
        self.oracle_samples = 100000
        self.oracle_batches = 20
        self.seed = 0

    def validate(self):
        for name in ("num_categories", "feature_dim", "num_images", "min_objects"):
            if getattr(self, name) < 1:
                raise ValidationException(f"synth.{name} must be >= 1")
        if self.num_predicates < 2:
            raise ValidationException("synth.num_predicates must be >= 2")
        if self.max_objects < self.min_objects:
            raise ValidationException("synth.max_objects must be >= synth.min_objects")
        if self.feature_noise < 0:
            raise ValidationException("synth.feature_noise must be >= 0")
        if self.prior_temperature <= 0 or self.dirichlet_concentration <= 0:
            raise ValidationException("synth.prior_temperature and synth.dirichlet_concentration must be > 0")
        if not 0 <= self.cooccurrence_mixing <= 1 or not 0 <= self.annotated_pair_fraction <= 1:
            raise ValidationException("synth mixing weight and annotated-pair fraction must lie in [0, 1]")
        if self.oracle_samples < 1 or self.oracle_batches < 2:
            raise ValidationException("synth.oracle_samples must be >= 1 and synth.oracle_batches >= 2")
        if len(self.split_fractions) != 3 or any(f < 0 for f in self.split_fractions) \
                or abs(sum(self.split_fractions) - 1.0) > 1e-9:
            raise ValidationException("synth.split_fractions must be three non-negative numbers summing to 1")
        if self.image_width <= 1 or self.image_height <= 1:
            raise ValidationException("synth image size must exceed one pixel")
