from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Sequence

from loguru import logger

from kern_core.domain.annotated_image import AnnotatedImage
from kern_core.domain.knowledge_base import KnowledgeBase
from kern_core.domain.predicted_graph import PredictedGraph
from kern_core.domain.task import Task
from kern_core.kern_model import KernModel
from kern_core.knowledge_stats import freq_predict_image

PredictionCollection = List[PredictedGraph]


class PredictionManager:
    """
    Runs a model over a dataset. Images are independent and parameters are only
    read, so prediction fans out over a thread pool; results keep dataset order.
    """

    def __init__(self, model: KernModel, kb: KnowledgeBase, threads: int = 1):
        model.check_compatible(kb)

        self.model = model
        self.kb = kb
        self.threads = max(1, int(threads))

    def predict_dataset(self, images: Sequence[AnnotatedImage], task: Task) -> PredictionCollection:
        logger.info(f"Predict {task.name} for {len(images)} images on {self.threads} thread(s)")

        def _predict(image: AnnotatedImage) -> PredictedGraph:
            return self.model.predict(image, self.kb, task)

        if self.threads == 1:
            return [_predict(image) for image in images]

        with ThreadPoolExecutor(max_workers=self.threads) as executor:
            return list(executor.map(_predict, images))

    def predict_tasks(self, images: Sequence[AnnotatedImage], tasks: Sequence[Task]) -> Dict[Task, PredictionCollection]:
        return {task: self.predict_dataset(images, task) for task in tasks}


def freq_predictions(images: Sequence[AnnotatedImage], kb: KnowledgeBase,
                     exclude_norel: bool = False) -> PredictionCollection:
    logger.info(f"Predict FREQ baseline for {len(images)} images (exclude_norel={exclude_norel})")

    return [freq_predict_image(image, kb, exclude_norel) for image in images]
