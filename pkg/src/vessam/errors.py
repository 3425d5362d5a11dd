"""Exception hierarchy.

Two families matter to callers: ``InputError`` (bad files, bad arguments,
malformed documents) and ``InvariantError`` (a contract inside the library
was broken).  The CLI maps them to exit codes 1 and 2.
"""


class VesSAMError(Exception):
    pass


class InputError(VesSAMError, ValueError):
    pass


class InvariantError(VesSAMError, RuntimeError):
    pass


# raster
class MalformedHeader(InputError):
    pass


class TruncatedPayload(InputError):
    pass


class UnsupportedDepth(InputError):
    pass


class OutOfBounds(InputError, IndexError):
    pass


class DimMismatch(InputError):
    pass


# skeleton / prompts / topology
class InternalLimit(InvariantError):
    pass


class NotThin(InputError):
    pass


class BranchAmbiguity(InvariantError):
    pass


class SchemaViolation(InputError):
    pass


class VersionMismatch(InputError):
    pass


class PointOutOfBounds(InputError):
    pass


class InconsistentPromptSet(InputError):
    pass


class EmptyGraph(InputError):
    pass


# autodiff / model
class ShapeMismatch(InputError):
    pass


class NonIntegralOutput(ShapeMismatch):
    pass


class EmptyConcat(InputError):
    pass


class NonDivisibleExtent(ShapeMismatch):
    pass


class NotScalar(InputError):
    pass


class DetachedLoss(InputError):
    pass


class NonSquareTokenCount(ShapeMismatch):
    pass


class EmptySequence(InputError):
    pass


# synthgen / eval
class DegenerateSpec(InputError):
    pass


class EmptyDataset(InputError):
    pass


class DivergedLoss(InvariantError):
    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state
