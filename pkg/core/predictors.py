"""
Predictors Module
Estimators h_n and stopping rules lambda_n as incremental interfaces over bit prefixes.

An estimator sees bits one at a time and can be asked for its prediction of
P(next bit = 1) at any point. A stopping rule sees the same bits and says after
each one whether the current time is a stopping time; since it never sees the
future, the induced stopping times are measurable and strictly increasing.
"""
import copy
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from core.coding import as_bits
from core.exceptions import PreconditionError

# Setup logger for this module
logger = logging.getLogger(__name__)

SMOOTHING = 0.5


class Estimator(ABC):
    """Deterministic predictor of the next bit fed one bit at a time"""

    identifier: str = "estimator"
    deterministic: bool = True

    @abstractmethod
    def reset(self) -> None:
        """Forget everything seen so far"""

    @abstractmethod
    def update(self, bit: int) -> None:
        """Consume the next bit"""

    @abstractmethod
    def predict(self, n: Optional[int] = None) -> float:
        """Predicted P(next bit = 1) given the bits consumed; n is the stop index when known"""

    def clone(self) -> "Estimator":
        """Fresh instance with the same configuration"""
        fresh = copy.deepcopy(self)
        fresh.reset()
        return fresh

    def __call__(self, prefix: Sequence[int]) -> float:
        fresh = self.clone()
        for bit in as_bits(prefix):
            fresh.update(bit)
        return fresh.predict()


class StoppingRule(ABC):
    """Decides after every observed bit whether the current time is a stopping time"""

    identifier: str = "rule"
    deterministic: bool = True

    @abstractmethod
    def reset(self) -> None:
        """Start a new sequence"""

    @abstractmethod
    def observe(self, bit: int) -> bool:
        """Consume the bit at the next time index and return True to stop there"""

    def clone(self) -> "StoppingRule":
        fresh = copy.deepcopy(self)
        fresh.reset()
        return fresh


class ContextCountPredictor(Estimator):
    """Add-half frequency predictor over the last `order` bits"""

    def __init__(self, order: int):
        if order < 0:
            raise PreconditionError(f"order must be non-negative, got {order}")
        self.order = order
        self.reset()

    def reset(self) -> None:
        self._counts: Dict[Tuple[int, ...], List[int]] = {}
        self._recent: Tuple[int, ...] = ()
        self._seen = 0

    def _context(self) -> Optional[Tuple[int, ...]]:
        if self._seen < self.order:
            return None
        return self._recent

    def update(self, bit: int) -> None:
        context = self._context()
        if context is not None:
            self._counts.setdefault(context, [0, 0])[bit] += 1
        self._seen += 1
        if self.order:
            self._recent = (self._recent + (bit,))[-self.order:]

    def predict(self, n: Optional[int] = None) -> float:
        context = self._context()
        if context is None:
            return 0.5
        c0, c1 = self._counts.get(context, (0, 0))
        return (c1 + SMOOTHING) / (c0 + c1 + 2 * SMOOTHING)


class EmpiricalMarkovPredictor(ContextCountPredictor):
    """Frequencies of the blocks of length order+1; 1/2 until a full context exists"""

    def __init__(self, order: int):
        super().__init__(order)
        self.identifier = f"empirical:{order}"


class KTPredictor(ContextCountPredictor):
    """Krichevsky-Trofimov rule per context; shorter contexts are used until order bits arrive"""

    def __init__(self, order: int):
        super().__init__(order)
        self.identifier = f"kt:{order}"

    def _context(self) -> Optional[Tuple[int, ...]]:
        return self._recent

    def update(self, bit: int) -> None:
        self._counts.setdefault(self._recent, [0, 0])[bit] += 1
        self._seen += 1
        if self.order:
            self._recent = (self._recent + (bit,))[-self.order:]


class ConstantPredictor(Estimator):
    """Predicts the same probability whatever it sees"""

    def __init__(self, value: float):
        if not 0.0 <= value <= 1.0:
            raise PreconditionError(f"constant prediction must lie in [0, 1], got {value}")
        self.value = value
        self.identifier = f"constant:{value:g}"

    def reset(self) -> None:
        pass

    def update(self, bit: int) -> None:
        pass

    def predict(self, n: Optional[int] = None) -> float:
        return self.value


class DelayedRule(StoppingRule):
    """Stops at every time t >= t0"""

    def __init__(self, t0: int):
        if t0 < 0:
            raise PreconditionError(f"t0 must be non-negative, got {t0}")
        self.t0 = t0
        self.identifier = "always" if t0 == 0 else f"delayed:{t0}"
        self.reset()

    def reset(self) -> None:
        self._time = -1

    def observe(self, bit: int) -> bool:
        self._time += 1
        return self._time >= self.t0


def empirical_markov_predictor(order: int) -> Estimator:
    return EmpiricalMarkovPredictor(order)


def kt_predictor(order: int) -> Estimator:
    return KTPredictor(order)


def constant_predictor(value: float) -> Estimator:
    return ConstantPredictor(value)


def always_stop_rule() -> StoppingRule:
    """lambda_n = n"""
    return DelayedRule(0)


def delayed_rule(t0: int) -> StoppingRule:
    return DelayedRule(t0)


@dataclass(frozen=True)
class StopRecord:
    n: int
    time: int
    prediction: float


@dataclass(frozen=True)
class SessionTrace:
    """Stops (n, lambda_n, h_n) recorded over one scan of a prefix"""

    stops: Tuple[StopRecord, ...]
    length: int

    def stop_at(self, time: int) -> Optional[StopRecord]:
        """The record whose stopping time equals time, if any"""
        for record in self.stops:
            if record.time == time:
                return record
        return None


def run_session(bits: Sequence[int], estimator: Estimator, rule: StoppingRule) -> SessionTrace:
    """Scan bits once, recording the estimator's prediction at every stopping time"""
    bits = as_bits(bits)
    estimator = estimator.clone()
    rule = rule.clone()
    stops = []
    for t, bit in enumerate(bits):
        estimator.update(bit)
        if rule.observe(bit):
            n = len(stops)
            prediction = estimator.predict(n)
            if not 0.0 <= prediction <= 1.0:
                raise PreconditionError(f"{estimator.identifier} predicted {prediction} outside [0, 1]")
            stops.append(StopRecord(n, t, prediction))
    return SessionTrace(tuple(stops), len(bits))


def parse_predictor(identifier: str) -> Estimator:
    """Build an estimator from 'kt:<order>', 'empirical:<order>' or 'constant:<p>'"""
    kind, _, arg = identifier.partition(":")
    try:
        if kind == "kt":
            return kt_predictor(int(arg))
        if kind == "empirical":
            return empirical_markov_predictor(int(arg))
        if kind == "constant":
            return constant_predictor(float(arg))
    except ValueError as e:
        raise PreconditionError(f"Invalid predictor '{identifier}': {e}")
    raise PreconditionError(f"Unknown predictor '{identifier}'. Valid kinds are: kt, empirical, constant")


def parse_stop_rule(identifier: str) -> StoppingRule:
    """Build a stopping rule from 'always' or 'delayed:<t0>'"""
    if identifier == "always":
        return always_stop_rule()
    kind, _, arg = identifier.partition(":")
    if kind == "delayed":
        try:
            return delayed_rule(int(arg))
        except ValueError as e:
            raise PreconditionError(f"Invalid stopping rule '{identifier}': {e}")
    raise PreconditionError(f"Unknown stopping rule '{identifier}'. Valid rules are: always, delayed:<t0>")
