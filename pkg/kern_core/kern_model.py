from typing import Optional, Union

import numpy as np

from loguru import logger

from kern_core.configuration.model_config import ModelConfig
from kern_core.domain.annotated_image import AnnotatedImage
from kern_core.domain.dataset_schema import DatasetSchema
from kern_core.domain.knowledge_base import KnowledgeBase
from kern_core.domain.predicted_graph import PredictedGraph
from kern_core.domain.task import Task
from kern_core.exceptions.ValidationException import ValidationException
from kern_core.object_router import ObjectRouterParams
from kern_core.parameter_set import ParameterSet
from kern_core.relation_router import RelationRouterParams, predict_graph


class KernModel:
    """Both routers over one ParameterSet, the unit that is trained and checkpointed."""

    def __init__(self, params: ParameterSet, schema: DatasetSchema, config: ModelConfig):
        self.params = params
        self.schema = schema
        self.config = config

        self.object_router = ObjectRouterParams(params, schema.num_categories, config.object_steps)
        self.relation_router = RelationRouterParams(params, schema.num_predicates, config.relation_steps)

        if self.object_router.feature_dim != self.relation_router.feature_dim:
            raise ValidationException("Object and relation routers expect different feature lengths")

    @property
    def feature_dim(self) -> int:
        return self.object_router.feature_dim

    @staticmethod
    def create(schema: DatasetSchema, feature_dim: int, config: ModelConfig,
               seed: Union[int, np.random.SeedSequence]) -> "KernModel":
        rng = np.random.default_rng(seed)
        params = ParameterSet()
        ObjectRouterParams.create(params, schema.num_categories, feature_dim, config.hidden_dim, config.output_dim,
                                  config.object_steps, rng)
        RelationRouterParams.create(params, schema.num_predicates, feature_dim, config.hidden_dim, config.output_dim,
                                    config.relation_steps, rng)

        logger.debug(f"Initialized model with {params.total_size()} weights "
                     f"(C={schema.num_categories}, K={schema.num_predicates}, d_f={feature_dim}, seed={seed})")

        return KernModel(params, schema, config)

    def check_compatible(self, kb: KnowledgeBase, images=None):
        if kb.schema != self.schema:
            raise ValidationException(
                f"Knowledge base (C={kb.num_categories}, K={kb.num_predicates}) does not match the model "
                f"(C={self.schema.num_categories}, K={self.schema.num_predicates})")

        for image in images or []:
            if image.num_regions and image.has_features and image.regions[0].feature.shape[0] != self.feature_dim:
                raise ValidationException(
                    f"Image '{image.image_id}' has features of length {image.regions[0].feature.shape[0]}, "
                    f"the model expects {self.feature_dim}")

    def predict(self, image: AnnotatedImage, kb: KnowledgeBase, task: Task,
                max_regions: Optional[int] = None) -> PredictedGraph:
        return predict_graph(image, kb, self.object_router, self.relation_router, task,
                             max_regions=self.config.max_regions if max_regions is None else max_regions,
                             pair_batch_size=self.config.pair_batch_size)


def feature_dim_of(images) -> int:
    """Feature length shared by all regions of ``images``."""
    lengths = {region.feature.shape[0] for image in images for region in image.regions if region.feature is not None}
    if not lengths:
        raise ValidationException("Dataset has no region features to train or predict on")
    if len(lengths) > 1:
        raise ValidationException(f"Region features have inconsistent lengths {sorted(lengths)}")

    return lengths.pop()
