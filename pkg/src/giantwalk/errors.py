"""Exception hierarchy shared across the package."""


class GiantWalkError(Exception):
    """Base class for every error raised by giantwalk."""


# graph construction / traversal
class DuplicateEdge(GiantWalkError, ValueError):
    pass


class SelfLoop(GiantWalkError, ValueError):
    pass


class DanglingVertexId(GiantWalkError, ValueError):
    pass


class EmptySourceSet(GiantWalkError, ValueError):
    pass


class Disconnected(GiantWalkError):
    pass


class GraphFormatError(GiantWalkError, ValueError):
    pass


# model sampling
class NonPositiveEpsilon(GiantWalkError, ValueError):
    pass


class RngExhausted(GiantWalkError):
    pass


class PairingBudgetExceeded(GiantWalkError):
    pass


class InfeasibleDegreeSequence(GiantWalkError, ValueError):
    pass


class MuOutOfRange(GiantWalkError, ValueError):
    pass


class GammaOutOfRange(GiantWalkError, ValueError):
    pass


# linear algebra
class SolveDiverged(GiantWalkError):
    pass


class TooLarge(GiantWalkError, ValueError):
    pass


class FactorizationFailed(GiantWalkError):
    pass


class DominationViolated(GiantWalkError, ValueError):
    pass


class NotPSD(GiantWalkError, ValueError):
    pass


# walks
class StepBudgetExceeded(GiantWalkError):
    pass


# skeleton
class MissingProvenance(GiantWalkError, ValueError):
    pass


class RecursionStuck(GiantWalkError):
    pass


class BudgetViolation(GiantWalkError):
    pass


# harness
class ConfigInvalid(GiantWalkError, ValueError):
    pass


class StageFailed(GiantWalkError):
    pass
