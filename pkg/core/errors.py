"""Exception types raised by the toolkit.

ValueError subclasses signal bad input; ArithmeticError subclasses signal a
numerical failure. The CLI maps the first group to exit code 1 and the
second to exit code 2.
"""


class DimensionMismatchError(ValueError):
    """Two vectors, measures or matrices disagree on their dimension."""


class ChainError(ValueError):
    """A finite chain is malformed or has no unique stationary distribution."""


class GenerativeAccessError(RuntimeError):
    """The environment cannot be reset to arbitrary probe states."""


class PolicyTrainingError(RuntimeError):
    """Policy learning did not produce a goal-reaching greedy policy."""


class NumericalError(ArithmeticError):
    """Base class for numerical failures."""


class SingularSystemError(NumericalError):
    def __init__(self, rank: int, dimension: int):
        self.rank = rank
        self.dimension = dimension
        super().__init__(
            f"LSTD system is singular (rank {rank} of {dimension}); use ridge > 0"
        )


class VacuousBoundError(NumericalError):
    def __init__(self, n: int, sample_scale: float):
        self.n = n
        self.sample_scale = sample_scale
        super().__init__(
            f"Bound is vacuous: n={n} must exceed V_max^2 * c1 = {sample_scale:.6g}"
        )
