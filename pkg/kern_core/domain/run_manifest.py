from datetime import datetime
from typing import Dict, Optional

from kern_core.utils.datetime_utils import get_now_with_timezone, parse_timestamp


class RunManifest:
    """Everything needed to repeat a command: the resolved config, seed and file paths."""

    def __init__(self, command: str, config: dict, seed: int, version: str,
                 inputs: Optional[Dict[str, str]] = None, outputs: Optional[Dict[str, str]] = None,
                 started_at: Optional[datetime] = None, wall_clock_seconds: float = 0.0):
        self.command = command
        self.config = config
        self.seed = int(seed)
        self.version = version
        self.inputs: Dict[str, str] = dict(inputs or {})
        self.outputs: Dict[str, str] = dict(outputs or {})
        self.started_at = started_at or get_now_with_timezone()
        self.wall_clock_seconds = float(wall_clock_seconds)

    def finish(self):
        self.wall_clock_seconds = (get_now_with_timezone() - self.started_at).total_seconds()

    @staticmethod
    def parse(json_object: dict) -> "RunManifest":
        return RunManifest(
            command=json_object["command"],
            config=json_object["config"],
            seed=json_object["seed"],
            version=json_object["version"],
            inputs=json_object.get("inputs"),
            outputs=json_object.get("outputs"),
            started_at=parse_timestamp(json_object["started_at"]),
            wall_clock_seconds=json_object.get("wall_clock_seconds", 0.0))

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "config": self.config,
            "seed": self.seed,
            "version": self.version,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "started_at": self.started_at.isoformat(),
            "wall_clock_seconds": self.wall_clock_seconds,
        }
