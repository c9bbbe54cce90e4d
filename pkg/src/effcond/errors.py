"""Exception hierarchy shared by all modules."""


class EffcondError(Exception):
    """Base class for all package errors."""

    #: CLI exit code: 1 for validation problems, 2 for numeric failures
    exit_code = 1


class ValidationError(EffcondError):
    exit_code = 1


class NumericError(EffcondError):
    exit_code = 2


class ReflectionSymmetryViolated(ValidationError):
    def __init__(self, cell, mirror):
        self.cell = cell
        self.mirror = mirror
        i, j = cell
        super().__init__(
            f"chi[{i}][{j}] differs from its mirror cell under i -> ({mirror} - i) mod n"
        )


class DegeneratePhase(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class InadmissiblePair(ValidationError):
    pass


class ConstraintViolated(ValidationError):
    pass


class RepInvalid(ValidationError):
    pass


class BudgetExceeded(ValidationError):
    pass


class SubspaceTooSmall(ValidationError):
    pass


class AssumptionViolated(NumericError):
    def __init__(self, which, detail):
        self.which = which
        self.detail = detail
        super().__init__(f"assumption {which} violated: {detail}")


class NonConvergence(NumericError):
    def __init__(self, residual, iterations=None):
        self.residual = residual
        self.iterations = iterations
        super().__init__(f"Krylov solve stalled at relative residual {residual:.3e}")


class EigSolverFailure(NumericError):
    pass


class SingularResolvent(NumericError):
    pass


class SingularA(NumericError):
    pass


class SingularStep(NumericError):
    def __init__(self, step):
        self.step = step
        super().__init__(f"singular lamination bracket at step {step}")


class IllConditionedFit(NumericError):
    pass


class ModeCountMismatch(NumericError):
    pass


class ClosureFailure(NumericError):
    def __init__(self, op, field, residual):
        self.op = op
        self.field = field
        self.residual = residual
        super().__init__(f"space not closed under {op}: field {field} leaks {residual:.3e}")
