"""Exception hierarchy shared by every module of the package."""


class ResilientMasError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(ResilientMasError, ValueError):
    pass


# --- synthesis -------------------------------------------------------------

class NotStabilizable(ResilientMasError):
    pass


class NoStableSubspace(ResilientMasError):
    pass


class ConvergenceFailure(ResilientMasError):
    pass


class Unsolvable(ResilientMasError):
    """The regulator equation ``S = A + B @ Gamma`` has no exact solution."""


class NonPositiveDegree(ResilientMasError, ValueError):
    pass


class VerificationFailed(ResilientMasError):
    pass


class Lemma1Violated(ResilientMasError):
    pass


# --- topology --------------------------------------------------------------

class TopologyError(ResilientMasError, ValueError):
    pass


class SelfLoop(TopologyError):
    pass


class NonPositiveWeight(TopologyError):
    pass


class ZeroInDegree(TopologyError):
    pass


class Assumption1Violated(TopologyError):
    def __init__(self, unreachable):
        self.unreachable = sorted(unreachable)
        ids = ", ".join(str(i) for i in self.unreachable)
        super().__init__(f"no leader has a directed path to follower(s) {ids}")


class UnknownAgent(ResilientMasError, KeyError):
    pass


# --- simulation ------------------------------------------------------------

class GainVerificationFailed(ResilientMasError):
    pass


class NonFiniteState(ResilientMasError, FloatingPointError):
    def __init__(self, t, index):
        self.t = t
        self.index = index
        super().__init__(f"non-finite state component {index} at t={t:.6g}")


class SingularPsiSum(ResilientMasError, ArithmeticError):
    pass


class TooFewSamples(ResilientMasError, ValueError):
    pass


# --- scenario files --------------------------------------------------------

class ParseError(ResilientMasError, ValueError):
    def __init__(self, line, message):
        self.line = line
        self.message = message
        where = f"line {line}: " if line else ""
        super().__init__(f"{where}{message}")


class ValidationError(ResilientMasError, ValueError):
    def __init__(self, assumption, detail):
        self.assumption = assumption
        self.detail = detail
        super().__init__(f"{assumption}: {detail}")
