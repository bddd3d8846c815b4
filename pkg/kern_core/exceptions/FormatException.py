from typing import Optional

from kern_core.exceptions.KernException import KernException


class FormatException(KernException):
    def __init__(self, message: str, path: Optional[str] = None, line_number: Optional[int] = None):
        location = ""
        if path is not None:
            location = f"{path}"
            if line_number is not None:
                location += f":{line_number}"
            location += ": "

        super().__init__(location + message)
        self.path = path
        self.line_number = line_number
