"""Exception types raised across the package.

Each exception carries an ``exit_code`` used by the command-line front end:
2 for invalid input, 3 for numerical failure, 4 for resource guards.
"""


class OpinionFixError(Exception):
    exit_code = 1


class ValidationError(OpinionFixError, ValueError):
    exit_code = 2


class NumericalError(OpinionFixError, ArithmeticError):
    exit_code = 3


class ResourceGuardError(OpinionFixError):
    exit_code = 4


# graph construction

class SelfLoop(ValidationError):
    def __init__(self, i):
        super().__init__(f"self-loop at vertex {i}")
        self.vertex = i


class AsymmetricDuplicate(ValidationError):
    def __init__(self, i, j, w1, w2):
        super().__init__(f"edge ({i}, {j}) given twice with weights {w1!r} and {w2!r}")
        self.edge = (i, j)


class NonPositiveWeight(ValidationError):
    pass


class Disconnected(ValidationError):
    def __init__(self, components):
        self.components = [sorted(c) for c in components]
        shown = "; ".join(str(c[:8]) + ("..." if len(c) > 8 else "") for c in self.components)
        super().__init__(f"graph has {len(self.components)} components: {shown}")


class TooSmall(ValidationError):
    pass


class InvalidK(ValidationError):
    pass


class InvalidParams(ValidationError):
    pass


# solvers and theory

class NotConverged(NumericalError):
    def __init__(self, max_iter, residual):
        super().__init__(f"no convergence after {max_iter} iterations (residual {residual:.3e})")
        self.max_iter = max_iter
        self.residual = residual


class ConventionMismatch(ValidationError):
    pass


class NoFiniteThreshold(NumericalError):
    def __init__(self, name, denominator):
        super().__init__(f"{name}: no finite threshold (denominator {denominator:.6g} <= 0)")
        self.denominator = denominator


class IllConditioned(NumericalError):
    pass


# dynamics

class NegativeBeta(ValidationError):
    pass


class MaxStepsExceeded(ResourceGuardError):
    def __init__(self, max_steps, run=None):
        where = "" if run is None else f" in run {run}"
        super().__init__(f"no absorption within {max_steps} elementary steps{where}")
        self.max_steps = max_steps
        self.run = run


class TooLarge(ResourceGuardError):
    pass
