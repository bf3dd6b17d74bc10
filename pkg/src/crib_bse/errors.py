"""Exception hierarchy shared by all modules."""


class CribError(ValueError):
    """Base class for every error raised by :mod:`crib_bse`."""


class DimensionMismatch(CribError):
    pass


class SingularBlock(CribError):
    """The leading block of a partition is numerically singular."""


class SingularMatrix(CribError):
    pass


class InvalidParams(CribError):
    pass


class ScoreSingularity(CribError):
    """Score function evaluated at the origin of a super-Gaussian density."""


class InvalidBlockCount(CribError):
    pass


class BlockOutOfRange(CribError):
    pass


class GammaZero(CribError):
    """Leading entry of a mixing vector vanishes, so the demixing matrix is singular."""


class ConstraintViolated(CribError):
    pass


class DegenerateGamma(CribError):
    pass


class InvalidTau(CribError):
    pass


class InvalidConfig(CribError):
    """Bad user-supplied configuration; ``field`` names the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
