from enum import Enum

from kern_core.exceptions.ValidationException import ValidationException


class Task(Enum):
    PredCls = "predcls"
    SGCls = "sgcls"

    @staticmethod
    def parse(value: str) -> "Task":
        for task in Task:
            if task.value == value.lower() or task.name.lower() == value.lower():
                return task

        raise ValidationException(f"Unknown task '{value}', expected one of {[t.value for t in Task]}")
