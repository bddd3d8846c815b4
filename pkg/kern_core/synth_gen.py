#!/usr/bin/env python3

"""
Synthetic scene-graph datasets with a known generating process.

Categories follow a Zipf marginal and co-occur through a Dirichlet transition
matrix, features are per-category prototypes plus Gaussian noise, and annotated
predicates are drawn from a sharpened long-tail prior P*(k | c, c'). Because the
process is stored, the statistics counted from its samples and the FREQ
baseline's expected mean recall can be checked against exact or Monte Carlo
references.
"""

from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from loguru import logger

from kern_core.configuration.synth_config import SynthConfig
from kern_core.domain.annotated_image import AnnotatedImage, Region, RelationAnnotation
from kern_core.domain.dataset_schema import NO_RELATIONSHIP, DatasetSchema
from kern_core.domain.knowledge_base import KnowledgeBase
from kern_core.exceptions.ValidationException import ValidationException
from kern_core.knowledge_stats import freq_predict_image
from kern_core.metrics import ground_truth_triplets, match_image, mean_recall_at_k, rank_triplets

NORMALIZATION_TOLERANCE = 1e-9

# Spawn-key roots keep the process, the dataset and the oracle on disjoint streams
_PROCESS_STREAM = 0
_IMAGE_STREAM = 1
_ORACLE_STREAM = 2


class GroundTruthProcess:
    """
    The true distributions behind a synthetic dataset. ``relation_prior`` follows the
    counting convention: an ordered pair stays unannotated (no-relationship) with
    probability 1 - f, otherwise its predicate is drawn from the k >= 1 part.
    ``config`` holds the settings scenes are sampled with.
    """

    def __init__(self, category_marginal: np.ndarray, cooccurrence: np.ndarray, relation_prior: np.ndarray,
                 prototypes: np.ndarray, config: Optional[SynthConfig] = None):
        self.category_marginal = np.asarray(category_marginal, dtype=np.float64)
        self.cooccurrence = np.asarray(cooccurrence, dtype=np.float64)
        self.relation_prior = np.asarray(relation_prior, dtype=np.float64)
        self.prototypes = np.asarray(prototypes, dtype=np.float64)
        self.config = config

    @property
    def num_categories(self) -> int:
        return self.category_marginal.shape[0]

    @property
    def num_predicates(self) -> int:
        return self.relation_prior.shape[2]

    @property
    def feature_dim(self) -> int:
        return self.prototypes.shape[1]

    def validate(self):
        c, k = self.num_categories, self.num_predicates
        if self.cooccurrence.shape != (c, c) or self.relation_prior.shape != (c, c, k) \
                or self.prototypes.shape[0] != c:
            raise ValidationException("Synthetic process arrays have inconsistent shapes")

        for name, sums in (("category marginal", self.category_marginal.sum(keepdims=True)),
                           ("co-occurrence rows", self.cooccurrence.sum(axis=1)),
                           ("predicate prior fibers", self.relation_prior.sum(axis=2))):
            if np.max(np.abs(sums - 1.0)) > NORMALIZATION_TOLERANCE:
                raise ValidationException(f"Synthetic {name} are not normalized")

        if np.any(self.relation_prior < 0):
            raise ValidationException("Synthetic predicate prior has negative entries")

        if self.config is not None:
            unannotated = 1.0 - self.config.annotated_pair_fraction
            if np.max(np.abs(self.relation_prior[:, :, 0] - unannotated)) > NORMALIZATION_TOLERANCE:
                raise ValidationException(
                    f"Synthetic no-relationship mass must equal 1 - annotated_pair_fraction = {unannotated}")
            if self.config.num_categories != c or self.config.num_predicates != k \
                    or self.config.feature_dim != self.feature_dim:
                raise ValidationException("Synthetic process arrays do not match its settings")

    def schema(self) -> DatasetSchema:
        return make_schema(self.num_categories, self.num_predicates)

    def knowledge_base(self) -> KnowledgeBase:
        """The true predicate prior in knowledge-base form, for the FREQ oracle."""
        return KnowledgeBase(self.schema(), self.cooccurrence, self.relation_prior)


def make_schema(num_categories: int, num_predicates: int) -> DatasetSchema:
    return DatasetSchema([f"category-{c:03d}" for c in range(num_categories)],
                         [NO_RELATIONSHIP] + [f"predicate-{k:03d}" for k in range(1, num_predicates)])


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def zipf_weights(count: int, exponent: float) -> np.ndarray:
    weights = np.arange(1, count + 1, dtype=np.float64) ** -float(exponent)
    return weights / weights.sum()


def sharpen(distribution: np.ndarray, temperature: float) -> np.ndarray:
    """p ** temperature renormalized over the last axis (scaled by the max first to avoid underflow)."""
    peak = np.max(distribution, axis=-1, keepdims=True)
    sharpened = (distribution / peak) ** temperature
    return sharpened / sharpened.sum(axis=-1, keepdims=True)


def build_process(config: SynthConfig) -> GroundTruthProcess:
    rng = _stream(config.seed, _PROCESS_STREAM)
    c, k = config.num_categories, config.num_predicates

    marginal = zipf_weights(c, config.category_zipf_exponent)
    cooccurrence = rng.dirichlet(np.full(c, config.dirichlet_concentration), size=c)
    prototypes = rng.standard_normal((c, config.feature_dim))

    fibers = rng.dirichlet(np.full(k - 1, config.dirichlet_concentration), size=(c, c))
    fibers = sharpen(fibers * zipf_weights(k - 1, config.predicate_zipf_exponent), config.prior_temperature)
    fraction = config.annotated_pair_fraction
    relation_prior = np.concatenate([np.full((c, c, 1), 1.0 - fraction), fraction * fibers], axis=2)

    settings = SynthConfig()
    settings.update(config.to_dict())
    process = GroundTruthProcess(marginal, cooccurrence, relation_prior, prototypes, settings)
    process.validate()

    return process


class SampledScene(NamedTuple):
    labels: np.ndarray
    boxes: np.ndarray
    triplets: List[RelationAnnotation]


def sample_scene(process: GroundTruthProcess, config: SynthConfig, rng: np.random.Generator) -> SampledScene:
    n = int(rng.integers(config.min_objects, config.max_objects + 1))

    labels = [int(rng.choice(process.num_categories, p=process.category_marginal))]
    mixing = config.cooccurrence_mixing
    while len(labels) < n:
        anchor = labels[int(rng.integers(len(labels)))]
        distribution = mixing * process.cooccurrence[anchor] + (1.0 - mixing) * process.category_marginal
        labels.append(int(rng.choice(process.num_categories, p=distribution / distribution.sum())))

    width, height = config.image_width, config.image_height
    x1 = rng.uniform(0.0, width - 1.0, size=n)
    y1 = rng.uniform(0.0, height - 1.0, size=n)
    x2 = rng.uniform(x1 + 1.0, width)
    y2 = rng.uniform(y1 + 1.0, height)
    boxes = np.stack([x1, y1, x2, y2], axis=1)

    triplets = []
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            fiber = process.relation_prior[labels[i], labels[j]]
            if rng.random() >= 1.0 - fiber[0]:
                continue
            predicate = 1 + int(rng.choice(process.num_predicates - 1, p=fiber[1:] / fiber[1:].sum()))
            triplets.append(RelationAnnotation(i, j, predicate))

    return SampledScene(np.array(labels, dtype=np.int64), boxes, triplets)


def generate_image(process: GroundTruthProcess, config: SynthConfig, index: int) -> AnnotatedImage:
    """Image ``index`` depends only on the seed and the index, never on other images."""
    rng = _stream(config.seed, _IMAGE_STREAM, index)
    scene = sample_scene(process, config, rng)

    noise = config.feature_noise * rng.standard_normal((scene.labels.size, process.feature_dim))
    features = process.prototypes[scene.labels] + noise
    regions = [Region(box, label, feature) for box, label, feature in zip(scene.boxes, scene.labels, features)]

    return AnnotatedImage(f"synth-{index:06d}", config.image_width, config.image_height, regions, scene.triplets)


def generate(process: GroundTruthProcess, config: SynthConfig) -> List[AnnotatedImage]:
    logger.info(f"Generate {config.num_images} synthetic images "
                f"(C={process.num_categories}, K={process.num_predicates}, seed={config.seed})")

    return [generate_image(process, config, index) for index in range(config.num_images)]


def split_dataset(images: Sequence[AnnotatedImage],
                  fractions: Sequence[float]) -> Tuple[List[AnnotatedImage], List[AnnotatedImage], List[AnnotatedImage]]:
    """Contiguous train / validation / test split in generation order."""
    total = len(images)
    train_end = int(round(total * fractions[0]))
    val_end = min(total, train_end + int(round(total * fractions[1])))

    return list(images[:train_end]), list(images[train_end:val_end]), list(images[val_end:])


class FreqOracle(NamedTuple):
    mean_recall: float
    standard_error: float
    per_predicate_recall: List[Optional[float]]
    samples: int


def analytic_freq_mr(process: GroundTruthProcess, config: SynthConfig, k_eval: int = 50,
                     samples: Optional[int] = None, batches: Optional[int] = None,
                     pooling: str = "image") -> FreqOracle:
    """
    Expected PredCls mR@K (graph constraint) of the FREQ baseline when its prior is
    the true P*. Scenes are drawn from the generating process, ranked and matched
    with the evaluation code; the standard error comes from batch means.
    """
    samples = config.oracle_samples if samples is None else samples
    batches = config.oracle_batches if batches is None else batches
    if samples < batches:
        raise ValidationException("The FREQ oracle needs at least one sample per batch")

    kb = process.knowledge_base()
    matches = []
    for index in range(samples):
        scene = sample_scene(process, config, _stream(config.seed, _ORACLE_STREAM, index))
        regions = [Region(box, label) for box, label in zip(scene.boxes, scene.labels)]
        image = AnnotatedImage(f"oracle-{index}", config.image_width, config.image_height, regions, scene.triplets)

        ranked = rank_triplets(freq_predict_image(image, kb), constraint=True)
        matches.append(match_image(ranked, ground_truth_triplets(image), k_eval, image_id=image.image_id))

    mean, per_predicate = mean_recall_at_k(matches, k_eval, process.num_predicates, pooling)

    batch_values = [mean_recall_at_k(list(part), k_eval, process.num_predicates, pooling)[0]
                    for part in np.array_split(np.array(matches, dtype=object), batches)]
    standard_error = float(np.std(batch_values, ddof=1) / np.sqrt(batches))

    logger.info(f"FREQ oracle PredCls mR@{k_eval}: {100 * mean:.2f} "
                f"+- {100 * standard_error:.2f} over {samples} scenes")

    return FreqOracle(mean, standard_error, per_predicate, samples)
