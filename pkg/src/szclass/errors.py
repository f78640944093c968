"""Exception hierarchy.

``DataError`` and ``NumericError`` are the two families the command line
maps onto exit codes 2 and 3.
"""


class SzclassError(Exception):
    """Base class for all package errors."""


class DataError(SzclassError):
    """Malformed or unusable input data."""


class NumericError(SzclassError):
    """A numerical routine failed."""


class EdfError(DataError):
    pass


class MissingChannelError(DataError):
    def __init__(self, label, path=None):
        self.label = label
        self.path = path
        where = f" in {path}" if path is not None else ""
        super().__init__(f"missing montage channel {label!r}{where}")


class ManifestError(DataError):
    pass


class CacheVersionError(DataError):
    pass


class SpecMismatchError(DataError):
    pass


class DimensionError(DataError):
    pass


class FoldAllocationError(DataError):
    pass


class NonConvergenceError(NumericError):
    def __init__(self, off_norm, sweeps):
        self.off_norm = off_norm
        self.sweeps = sweeps
        super().__init__(
            f"Jacobi iteration did not converge after {sweeps} sweeps "
            f"(off-diagonal norm {off_norm:.3e})"
        )


class DivergenceError(NumericError):
    def __init__(self, epoch):
        self.epoch = epoch
        super().__init__(f"non-finite loss encountered in epoch {epoch}")


class SearchFailedError(SzclassError):
    pass
