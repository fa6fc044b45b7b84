class InvalidParameterError(Exception):
    pass


class StructuralError(Exception):
    pass


class UnrecoverableColumnError(Exception):
    pass


class DecodeError(Exception):
    pass


class NonFiniteValueError(Exception):
    pass


class DomainError(Exception):
    pass


class DegeneratePartitionError(Exception):
    pass


class UnsupportedInputError(Exception):
    pass


class ShortScanWarning(UserWarning):
    pass
