"""
Forge Exceptions
Error taxonomy shared by the chain, coding, oracle, forge and harness modules
"""


class ForgeError(Exception):
    """Base class for every error raised by this project"""


class InvalidPathError(ForgeError, ValueError):
    """A sequence of states is not a legal trajectory of the chain"""


class PreconditionError(ForgeError, ValueError):
    """An operation was called outside its documented domain"""


class MalformedBitsError(ForgeError, ValueError):
    """No legal chain path emits the given bits under the coding"""


class ImpossibleHistoryError(ForgeError, ValueError):
    """An observed history has probability zero under the coded process"""


class EnumerationBudgetExceeded(ForgeError):
    """Exact path enumeration ran out of budget before reaching its mass target"""

    def __init__(self, k: int, paths: int, accumulated: float):
        self.k = k
        self.paths = paths
        self.accumulated = accumulated
        super().__init__(
            f"Enumeration for k={k} stopped after {paths} paths with mass {accumulated:.6g}"
        )


class ChainLengthExceeded(ForgeError):
    """A simulated trial did not reach its target state within the step cap"""


class LevelSearchExhausted(ForgeError):
    """No N up to the cap cleared the 1/8 threshold for P(A)

    Either the stopping rule violates the eventual one-step hypothesis or the
    cap is too small; the two cannot be told apart from finitely many runs.
    """

    def __init__(self, level: int, n_min: int, n_cap: int, best: float):
        self.level = level
        self.n_min = n_min
        self.n_cap = n_cap
        self.best = best
        super().__init__(
            f"Level {level}: no N in ({n_min}, {n_cap}] with P(A) lower bound > 1/8 "
            f"(best estimate {best:.6g}); the stopping rule may violate the "
            f"eventual one-step hypothesis, or n_cap is too small"
        )


class EstimationConsistencyError(ForgeError):
    """Probability estimates contradict the partition A = B+ U B-"""


class ConfigError(ForgeError, ValueError):
    """Invalid experiment configuration"""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class SchemaError(ForgeError, ValueError):
    """A JSON document does not match the expected schema"""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")
