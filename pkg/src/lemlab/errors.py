"""Exception hierarchy.

Validation problems (bad input, violated preconditions) derive from
``ValidationError``; numerical breakdowns derive from ``NumericalError``.
The CLI maps the two families to exit codes 1 and 2.
"""


class LemlabError(Exception):
    pass


class ValidationError(LemlabError, ValueError):
    pass


class NumericalError(LemlabError, ArithmeticError):
    pass


class NearRootError(ValidationError):
    def __init__(self, index, distance):
        self.index = int(index)
        self.distance = float(distance)
        super().__init__(f"evaluation point is {distance:.3g} from root {index}")


class MultipleRootError(ValidationError):
    def __init__(self, i, j, distance):
        self.pair = (int(i), int(j))
        self.distance = float(distance)
        super().__init__(f"roots {i} and {j} are {distance:.3g} apart; simple roots required")


class DegreeTooLargeError(ValidationError):
    pass


class SchemaError(ValidationError):
    pass


class InsufficientDataError(ValidationError):
    pass


class UnsupportedPError(ValidationError):
    pass


class NoConvergenceError(NumericalError):
    def __init__(self, indices, message=None):
        self.indices = [int(i) for i in indices]
        super().__init__(message or f"{len(self.indices)} critical point(s) did not converge")


class UnconvergedCriticalError(NumericalError):
    pass


class QuadratureFailure(NumericalError):
    pass


class DegenerateVarianceError(NumericalError):
    pass
