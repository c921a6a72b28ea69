"""Exception hierarchy shared by all gridflow modules."""


class GridflowError(Exception):
    """Base class for every error raised by gridflow."""


# case parsing / network construction
class CaseFormatError(GridflowError):
    pass


class MissingBlock(CaseFormatError):
    def __init__(self, block: str):
        super().__init__(f"case file has no '{block}' block")
        self.block = block


class DuplicateBusId(CaseFormatError):
    def __init__(self, bus_id: int):
        super().__init__(f"bus id {bus_id} appears more than once")
        self.bus_id = bus_id


class NoSlackBus(CaseFormatError):
    def __init__(self):
        super().__init__("case has no slack (type 3) bus")


class MultipleSlackBuses(CaseFormatError):
    def __init__(self, ids):
        super().__init__(f"case has several slack buses: {list(ids)}")
        self.ids = list(ids)


class MalformedRow(CaseFormatError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"MalformedRow at line {line}: {reason}")
        self.line = line
        self.reason = reason


class ZeroImpedanceBranch(GridflowError):
    def __init__(self, index: int):
        super().__init__(f"in-service branch {index} has r = x = 0")
        self.index = index


# numerics
class SingularMatrix(GridflowError):
    def __init__(self, pivot: int):
        super().__init__(f"matrix is singular (pivot {pivot})")
        self.pivot = pivot


class NotPositiveDefinite(GridflowError):
    def __init__(self, row: int):
        super().__init__(f"matrix is not positive definite (row {row})")
        self.row = row


class NonFiniteInput(GridflowError):
    pass


class BadParameter(GridflowError):
    pass


class DimensionMismatch(GridflowError):
    pass


class ShapeMismatch(DimensionMismatch):
    pass


# power flow
class Diverged(GridflowError):
    def __init__(self, iterations: int, mismatch: float):
        super().__init__(f"Newton-Raphson diverged after {iterations} iterations "
                         f"(mismatch {mismatch:.3e})")
        self.iterations = iterations
        self.mismatch = mismatch


class SingularJacobian(GridflowError):
    pass


# linear models / training
class SingularSystem(GridflowError):
    pass


class MissingContext(GridflowError):
    def __init__(self, scheme: str, what: str):
        super().__init__(f"scheme '{scheme}' needs {what}")
        self.scheme = scheme


class NonFiniteLoss(GridflowError):
    def __init__(self, epoch: int, batch: int):
        super().__init__(f"non-finite loss at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch


class CorruptCheckpoint(GridflowError):
    pass


class VersionMismatch(GridflowError):
    pass


# scenarios / ppf
class CovarianceNotPSD(GridflowError):
    pass


class BadSpec(GridflowError):
    pass


class TooManyDivergences(GridflowError):
    def __init__(self, dropped: int, requested: int):
        super().__init__(f"{dropped} of {requested} samples failed to converge")
        self.dropped = dropped
        self.requested = requested


class AllTargetsNearZero(GridflowError):
    pass


class DegenerateSamples(GridflowError):
    def __init__(self, value: float):
        super().__init__(f"all samples equal {value!r}; density is a point mass")
        self.value = value


class NoSamples(GridflowError):
    pass


class ConfigError(GridflowError):
    pass
