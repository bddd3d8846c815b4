from kern_core.exceptions.KernException import KernException


class ValidationException(KernException):
    pass
