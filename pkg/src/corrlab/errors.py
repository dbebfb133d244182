"""Exception hierarchy for corrlab.

Every error raised on purpose by the library derives from ``CorrlabError``,
which itself is a ``ValueError`` so callers that only care about bad input
can catch that.
"""


class CorrlabError(ValueError):
    pass


# corrmat
class NegativeEntryError(CorrlabError):
    def __init__(self, x: int, y: int, value: float):
        self.x, self.y, self.value = x, y, value
        super().__init__(f"negative entry at ({x},{y}): {value!r}")


class SumNotOneError(CorrlabError):
    def __init__(self, actual: float):
        self.actual = actual
        super().__init__(f"entries sum to {actual!r}, expected 1")


class NotSquareError(CorrlabError):
    pass


class DuplicateAlphaError(CorrlabError):
    pass


class NonpositiveScaleError(CorrlabError):
    pass


class BadParameterError(CorrlabError):
    pass


class SchmidtOrderError(CorrlabError):
    pass


class AlphaSumNonzeroError(CorrlabError):
    pass


class Condition3ViolatedError(CorrlabError):
    pass


# quantum
class BadLambdaError(CorrlabError):
    pass


class NotBipartiteError(CorrlabError):
    pass


class DimensionMismatchError(CorrlabError):
    pass


class NotNormalizedError(CorrlabError):
    pass


class NotHermitianError(CorrlabError):
    pass


class NotPSDError(CorrlabError):
    pass


class IncompletePOVMError(CorrlabError):
    pass


# factorize
class SingularSumError(CorrlabError):
    pass


class NotDiagonalizedError(CorrlabError):
    pass


class FactorizationInvalidError(CorrlabError):
    pass


class LambdaOneError(CorrlabError):
    pass


class InfeasibleSTError(CorrlabError):
    pass


# reach / bounds
class NotPositiveError(CorrlabError):
    pass


class CertificateInvalidError(CorrlabError):
    pass


class InconsistentBoundsError(CorrlabError):
    pass
