from kern_core.configuration.eval_config import EvalConfig
from kern_core.configuration.model_config import ModelConfig
from kern_core.configuration.runtime_config import RuntimeConfig
from kern_core.configuration.synth_config import SynthConfig
from kern_core.configuration.train_config import TrainConfig

SECTION_NAMES = ("model", "train", "eval", "synth", "runtime")


class Config:

    def __init__(self):
        self.model: ModelConfig = ModelConfig()
        self.train: TrainConfig = TrainConfig()
        self.eval: EvalConfig = EvalConfig()
        self.synth: SynthConfig = SynthConfig()
        self.runtime: RuntimeConfig = RuntimeConfig()

    def to_dict(self) -> dict:
        return {name: getattr(self, name).to_dict() for name in SECTION_NAMES}

    def update(self, data: dict):
        for name in SECTION_NAMES:
            if name in data:
                getattr(self, name).update(data[name])

    def load(self):
        raise NotImplementedError()

    def save(self):
        raise NotImplementedError()
