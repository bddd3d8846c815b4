#!/usr/bin/env python3

"""
Joint training of both routers: cross-entropy losses, negative pair sampling,
Adam updates and the epoch loop with validation-driven learning-rate decay.
"""

from pathlib import Path
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from loguru import logger

from kern_core.adam_optimizer import OptimizerState, adam_step
from kern_core.app_paths import (BEST_CHECKPOINT_FILE_NAME, LAST_CHECKPOINT_FILE_NAME, TRAINING_LOG_FILE_NAME,
                                 VALIDATION_REPORTS_FILE_NAME)
from kern_core.configuration.config import Config
from kern_core.domain.annotated_image import AnnotatedImage
from kern_core.domain.eval_report import EvalReport
from kern_core.domain.knowledge_base import KnowledgeBase
from kern_core.domain.task import Task
from kern_core.exceptions.NumericalException import NumericalException
from kern_core.exceptions.ValidationException import ValidationException
from kern_core.kern_model import KernModel
from kern_core.metrics import evaluate_task
from kern_core.object_router import route_objects
from kern_core.prediction_manager import PredictionManager
from kern_core.relation_router import build_pair_batch, route_pairs
from kern_core.storage.checkpoint_storage import CheckpointStorage
from kern_core.storage.jsonl_storage import JsonLinesStorage
from kern_core.storage.training_log_storage import EpochRecord, TrainingLogStorage
from kern_core.tensor import Tensor, cross_entropy, mul

SampledPair = Tuple[int, int, int]


def object_loss(logits: Tensor, labels: Sequence[int]) -> Tensor:
    return cross_entropy(logits, labels)


def relation_loss(logits: Tensor, predicates: Sequence[int]) -> Tensor:
    return cross_entropy(logits, predicates)


def sample_pairs(image: AnnotatedImage, negative_ratio: float, rng: np.random.Generator) -> List[SampledPair]:
    """
    Every annotated pair plus min(floor(ratio * #positives), #available) unannotated
    ordered pairs drawn without replacement and labelled 0. An image without
    positives still gets max(floor(ratio), 1) negatives when the ratio is non-zero.
    """
    if negative_ratio < 0:
        raise ValidationException("Negative pair ratio must be >= 0")

    positives = [(t.subj, t.obj, t.predicate) for t in image.triplets]
    annotated = image.annotated_pairs()
    candidates = [(i, j) for i in range(image.num_regions) for j in range(image.num_regions)
                  if i != j and (i, j) not in annotated]

    if positives:
        count = int(np.floor(negative_ratio * len(positives)))
    else:
        count = max(int(np.floor(negative_ratio)), 1) if negative_ratio > 0 else 0
    count = min(count, len(candidates))

    if count == 0:
        return positives

    chosen = np.sort(rng.choice(len(candidates), size=count, replace=False))
    return positives + [(candidates[c][0], candidates[c][1], 0) for c in chosen]


class ImageLoss(NamedTuple):
    total: Tensor
    object_loss: float
    relation_loss: Optional[float]
    pair_count: int


def image_loss(model: KernModel, image: AnnotatedImage, kb: KnowledgeBase, config: Config,
               rng: np.random.Generator) -> Optional[ImageLoss]:
    """Weighted object plus relation loss of one image; relation priors are indexed by ground-truth labels."""
    image = image.truncated(config.model.max_regions)
    if image.num_regions == 0:
        return None

    features = image.features()
    labels = image.labels()

    routed = route_objects(features, kb.cooccurrence, model.object_router)
    objects = object_loss(routed.logits, labels)
    total = mul(objects, config.train.object_loss_weight)

    pairs = sample_pairs(image, config.train.negative_ratio, rng)
    if not pairs:
        return ImageLoss(total, objects.item(), None, 0)

    subj, obj, predicates = (list(column) for column in zip(*pairs))
    batch = build_pair_batch(image, features, labels, subj, obj)
    logits = route_pairs(batch, kb.fibers(batch.subj_labels, batch.obj_labels), model.relation_router)
    relations = relation_loss(logits, predicates)

    return ImageLoss(total + mul(relations, config.train.relation_loss_weight), objects.item(), relations.item(),
                     len(pairs))


class TrainResult(NamedTuple):
    history: List[EpochRecord]
    reports: List[EvalReport]
    best_epoch: int
    best_metric: float
    best_parameters: Dict[str, np.ndarray]


class Trainer:
    def __init__(self, model: KernModel, kb: KnowledgeBase, config: Config, seed: Union[int, np.random.SeedSequence],
                 out_dir: Optional[Path] = None):
        model.check_compatible(kb)

        self.model = model
        self.kb = kb
        self.config = config
        self.out_dir = None if out_dir is None else Path(out_dir)
        self.rng = np.random.default_rng(seed)
        self.state = OptimizerState(model.params)
        self.learning_rate = config.train.learning_rate
        self.validation_task = Task.parse(config.train.validation_task)

    @staticmethod
    def create(kb: KnowledgeBase, feature_dim: int, config: Config, seed: int,
               out_dir: Optional[Path] = None) -> "Trainer":
        """Model initialization and pair sampling draw from independent streams of one seed."""
        init_seed, train_seed = np.random.SeedSequence(seed).spawn(2)
        model = KernModel.create(kb.schema, feature_dim, config.model, init_seed)

        return Trainer(model, kb, config, train_seed, out_dir)

    def train_step(self, images: Sequence[AnnotatedImage], epoch: int = 0, step: int = 0) -> float:
        params = self.model.params
        params.zero_grad()

        totals, losses = [], []
        for image in images:
            loss = image_loss(self.model, image, self.kb, self.config, self.rng)
            if loss is None:
                continue
            value = loss.total.item()
            if not np.isfinite(value):
                raise NumericalException(f"Training diverged at epoch {epoch}, step {step}: "
                                         f"loss of image '{image.image_id}' is {value}")
            totals.append(loss.total)
            losses.append(value)

        if not losses:
            return 0.0

        # Mean over the images that contributed a loss
        for total in totals:
            mul(total, 1.0 / len(totals)).backward()

        try:
            adam_step(params, params.gradients(), self.state, self.config.train, self.learning_rate)
        except NumericalException as e:
            raise NumericalException(f"Training diverged at epoch {epoch}, step {step}: {e.message}")

        return float(np.mean(losses))

    def validate(self, images: Sequence[AnnotatedImage]) -> EvalReport:
        k = self.config.train.validation_k
        predictions = PredictionManager(self.model, self.kb, self.config.runtime.threads) \
            .predict_dataset(images, self.validation_task)
        ks = sorted(set(self.config.eval.ks) | {k})

        constrained, _ = evaluate_task(images, predictions, self.validation_task, ks,
                                       pooling=self.config.eval.mean_recall_pooling,
                                       num_predicates=self.kb.num_predicates,
                                       threads=self.config.runtime.threads)
        return constrained

    def train(self, train_images: Sequence[AnnotatedImage], val_images: Sequence[AnnotatedImage]) -> TrainResult:
        if not train_images:
            raise ValidationException("Training split is empty")
        if not val_images:
            raise ValidationException("Validation split is empty")

        train_config = self.config.train
        k = train_config.validation_k
        batch_size = train_config.batch_size

        history: List[EpochRecord] = []
        reports: List[EvalReport] = []
        best_metric, best_epoch = -np.inf, 0
        best_parameters = self.model.params.to_arrays()
        stale_epochs = 0

        logger.info(f"Train on {len(train_images)} images, validate on {len(val_images)} images, "
                    f"{train_config.epochs} epochs, batch size {batch_size}")

        for epoch in range(1, train_config.epochs + 1):
            order = self.rng.permutation(len(train_images))
            step_losses = []
            for step, start in enumerate(range(0, len(order), batch_size), start=1):
                batch = [train_images[i] for i in order[start:start + batch_size]]
                step_losses.append(self.train_step(batch, epoch, step))
                logger.debug(f"Epoch {epoch} step {step}: loss {step_losses[-1]:.6f}")

            epoch_loss = float(np.mean(step_losses))
            report = self.validate(val_images)
            metric = report.mean_recall[k]
            reports.append(report)
            history.append(EpochRecord(epoch, epoch_loss, metric, self.learning_rate))

            logger.info(f"Epoch {epoch}: loss {epoch_loss:.6f}, validation mR@{k} {100 * metric:.2f}, "
                        f"lr {self.learning_rate:.3g}")

            if metric > best_metric:
                best_metric, best_epoch = metric, epoch
                best_parameters = self.model.params.to_arrays()
                stale_epochs = 0
                self._save_checkpoint(BEST_CHECKPOINT_FILE_NAME)
            else:
                stale_epochs += 1
                if stale_epochs >= train_config.patience:
                    self.learning_rate /= train_config.lr_decay
                    stale_epochs = 0
                    logger.info(f"Validation plateaued for {train_config.patience} epochs, "
                                f"learning rate decays to {self.learning_rate:.3g}")

            self._save_checkpoint(LAST_CHECKPOINT_FILE_NAME)
            self._save_logs(history, reports)

        return TrainResult(history, reports, best_epoch, float(best_metric), best_parameters)

    def _save_checkpoint(self, file_name: str):
        if self.out_dir is not None:
            CheckpointStorage(self.out_dir.joinpath(file_name)).save(self.model.params)

    def _save_logs(self, history: List[EpochRecord], reports: List[EvalReport]):
        if self.out_dir is None:
            return

        TrainingLogStorage(self.out_dir.joinpath(TRAINING_LOG_FILE_NAME)).save(history)
        JsonLinesStorage(self.out_dir.joinpath(VALIDATION_REPORTS_FILE_NAME)).save_records(
            dict(r.to_dict(), epoch=record.epoch) for r, record in zip(reports, history))
