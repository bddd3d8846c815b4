from kern_core.exceptions.KernException import KernException


class DimensionException(KernException):
    def __init__(self, message: str, *shapes):
        if shapes:
            message = "{0}: shapes {1}".format(message, " vs ".join(str(tuple(s)) for s in shapes))
        super().__init__(message)
        self.shapes = [tuple(s) for s in shapes]
