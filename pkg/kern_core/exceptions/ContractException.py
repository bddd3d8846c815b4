from kern_core.exceptions.KernException import KernException


class ContractException(KernException):
    pass
