"""
Ryabko Chain Module
Simulation and exact analysis of the countable-state chain driving every coded process.

From state 0 the chain moves to 1, from 1 to 2, and from any s >= 2 it resets to 0
or climbs to s+1 with probability 1/2 each. The stationary law is
P(0) = P(1) = 1/4 and P(s) = 2^-s for s >= 2.
"""
import heapq
import itertools
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, List, Optional, Sequence, Tuple

from numpy.random import Generator

from core.exceptions import (
    ChainLengthExceeded,
    EnumerationBudgetExceeded,
    InvalidPathError,
    PreconditionError,
)

# Setup logger for this module
logger = logging.getLogger(__name__)

ChainState = int

DEFAULT_PATH_BUDGET = 1_000_000


def is_legal_transition(a: ChainState, b: ChainState) -> bool:
    """Check whether a -> b has positive probability"""
    if a == 0:
        return b == 1
    if a == 1:
        return b == 2
    return b == 0 or b == a + 1


def transition_prob(a: ChainState, b: ChainState) -> Fraction:
    """One-step transition probability (1, 1/2 or 0)"""
    if not is_legal_transition(a, b):
        return Fraction(0)
    return Fraction(1) if a < 2 else Fraction(1, 2)


@dataclass(frozen=True)
class ChainPath:
    """A finite trajectory of the chain; consecutive states must be legal transitions"""

    states: Tuple[ChainState, ...]

    def __post_init__(self):
        if not self.states:
            raise InvalidPathError("A chain path needs at least one state")
        for s in self.states:
            if not isinstance(s, int) or isinstance(s, bool) or s < 0:
                raise InvalidPathError(f"Invalid chain state {s!r}")
        for t, (a, b) in enumerate(zip(self.states, self.states[1:])):
            if not is_legal_transition(a, b):
                raise InvalidPathError(f"Illegal transition {a} -> {b} at time {t}")

    def __len__(self) -> int:
        return len(self.states)

    def __iter__(self) -> Iterator[ChainState]:
        return iter(self.states)

    def __getitem__(self, index):
        return self.states[index]

    def probability(self) -> Fraction:
        """Product of the transition probabilities along the path"""
        prob = Fraction(1)
        for a, b in zip(self.states, self.states[1:]):
            prob *= transition_prob(a, b)
        return prob


@dataclass(frozen=True)
class WeightedPath:
    """A path together with its exact (dyadic) probability"""

    path: ChainPath
    probability: Fraction


def stationary_prob(s: ChainState) -> Fraction:
    """Stationary probability of state s"""
    if s < 0:
        raise PreconditionError(f"Chain states are non-negative, got {s}")
    if s < 2:
        return Fraction(1, 4)
    return Fraction(1, 2 ** s)


def stationary_sample(rng: Generator) -> ChainState:
    """
    Draw a state from the stationary law.

    States 0 and 1 take the first half of the unit interval; above that the
    tail P(M >= t) = 2^(1-t) is inverted in closed form, so no truncation is needed.
    """
    u = rng.random()
    if u < 0.25:
        return 0
    if u < 0.5:
        return 1
    w = 1.0 - u  # in (0, 1/2]
    return 1 + math.floor(-math.log2(w))


def step(s: ChainState, rng: Generator) -> ChainState:
    """One transition of the chain"""
    if s == 0:
        return 1
    if s == 1:
        return 2
    return 0 if rng.random() < 0.5 else s + 1


def simulate_path(initial: ChainState, length: int, rng: Generator) -> ChainPath:
    """Simulate a trajectory of the given length starting at initial"""
    if length < 1:
        raise PreconditionError(f"Path length must be at least 1, got {length}")
    if initial < 0:
        raise PreconditionError(f"Chain states are non-negative, got {initial}")
    states = [initial]
    for _ in range(length - 1):
        states.append(step(states[-1], rng))
    return ChainPath(tuple(states))


def simulate_until_hit(k: int, rng: Generator, max_steps: int) -> ChainPath:
    """
    Simulate from state 0 up to and including the first visit of state 2k

    Raises:
        ChainLengthExceeded: if 2k is not reached within max_steps transitions
    """
    if k < 1:
        raise PreconditionError(f"k must be at least 1, got {k}")
    target = 2 * k
    states = [0]
    s = 0
    for _ in range(max_steps):
        s = step(s, rng)
        states.append(s)
        if s == target:
            return ChainPath(tuple(states))
    raise ChainLengthExceeded(
        f"State {target} not reached within {max_steps} steps; k={k} is too large for this cap"
    )


def hitting_time(path: Sequence[ChainState], k: int) -> Optional[int]:
    """First index at which the path occupies state 2k, or None"""
    if k < 1:
        raise PreconditionError(f"k must be at least 1, got {k}")
    target = 2 * k
    for i, s in enumerate(path):
        if s == target:
            return i
    return None


def _materialize(link) -> Tuple[ChainState, ...]:
    states = []
    while link is not None:
        segment, link = link
        states.extend(reversed(segment))
    return tuple(reversed(states))


def enumerate_paths_to_hit(
    k: int, mass_tol: float, budget: int = DEFAULT_PATH_BUDGET
) -> Tuple[List[WeightedPath], Fraction]:
    """
    Enumerate paths from 0 to the first visit of 2k in decreasing probability order

    Every path is a sequence of failed climbs 0,1,2,...,h (each followed by a reset)
    and a final climb 0,1,...,2k. Probabilities are powers of 1/2, tracked by their
    exponent (the number of random steps), so the best-first order is exact.

    Args:
        k: Target index, the path stops at state 2k
        mass_tol: Stop once the accumulated probability reaches 1 - mass_tol
        budget: Maximum number of complete paths to emit

    Returns:
        Tuple of (paths, residual_mass)

    Raises:
        EnumerationBudgetExceeded: if the budget runs out before the mass target
    """
    if k < 1:
        raise PreconditionError(f"k must be at least 1, got {k}")
    if not 0 < mass_tol < 1:
        raise PreconditionError(f"mass_tol must lie in (0, 1), got {mass_tol}")

    target = 2 * k
    goal = 1 - Fraction(mass_tol)
    accumulated = Fraction(0)
    paths: List[WeightedPath] = []
    counter = itertools.count()

    if target == 2:
        return [WeightedPath(ChainPath((0, 1, 2)), Fraction(1))], Fraction(0)
    # Heap entries: (random steps so far, tie breaker, current state, path link)
    start = ((0, 1, 2), None)
    heap = [(0, next(counter), 2, start)]

    while heap:
        exponent, _, state, link = heapq.heappop(heap)
        climb = state + 1
        climb_link = ((climb,), link)
        if climb == target:
            prob = Fraction(1, 2 ** (exponent + 1))
            paths.append(WeightedPath(ChainPath(_materialize(climb_link)), prob))
            accumulated += prob
            if accumulated >= goal:
                break
            if len(paths) >= budget:
                raise EnumerationBudgetExceeded(k, len(paths), float(accumulated))
        else:
            heapq.heappush(heap, (exponent + 1, next(counter), climb, climb_link))
        heapq.heappush(heap, (exponent + 1, next(counter), 2, ((0, 1, 2), link)))

    residual = 1 - accumulated
    logger.debug(f"Enumerated {len(paths)} paths to state {target}, residual mass {float(residual):.3g}")
    return paths, residual

