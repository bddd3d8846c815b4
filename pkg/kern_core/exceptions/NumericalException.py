from kern_core.exceptions.KernException import KernException


class NumericalException(KernException):
    pass
