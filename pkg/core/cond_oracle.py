"""
Conditional Probability Oracle
Exact filtering of the hidden chain state behind a coded process f(M).

The posterior over the current hidden state keeps finitely many atoms plus one
lumped geometric tail {s, s+1, ...} with relative weights 2^-t. The tail is closed
under the filter step as long as every tail state emits 1, which holds once the
tail starts above every exception state mapped to 0.
"""
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from numpy.random import Generator

from core.coding import BitString, CodingFunction, apply, as_bits, encode, last_reset_index, order_bound
from core.exceptions import ImpossibleHistoryError, PreconditionError
from core.ryabko_chain import ChainState, simulate_path, stationary_prob, stationary_sample, step

# Setup logger for this module
logger = logging.getLogger(__name__)

NORMALIZATION_TOL = 1e-12
MERGE_TOL = 1e-12


@dataclass(frozen=True)
class TailComponent:
    """Geometric family {start, start+1, ...}; state t carries mass * 2^-(t-start+1)"""

    start: int
    mass: float

    def prob(self, state: ChainState) -> float:
        if state < self.start:
            return 0.0
        return self.mass * 2.0 ** -(state - self.start + 1)


@dataclass(frozen=True)
class Posterior:
    """Conditional law of the current hidden state given the observed bits"""

    atoms: Tuple[Tuple[ChainState, float], ...]
    tail: Optional[TailComponent] = None

    def total_mass(self) -> float:
        total = sum(mass for _, mass in self.atoms)
        if self.tail is not None:
            total += self.tail.mass
        return total

    def prob(self, state: ChainState) -> float:
        """Mass of one state, including the tail's geometric share"""
        mass = dict(self.atoms).get(state, 0.0)
        if self.tail is not None:
            mass += self.tail.prob(state)
        return mass


@dataclass(frozen=True)
class History:
    """A one-sided past (..., x_-1, x_0) known to a finite depth; bits are oldest first"""

    bits: BitString

    @property
    def depth(self) -> int:
        return len(self.bits)

    def at(self, i: int) -> int:
        """x_{-i}"""
        return self.bits[-1 - i]


@dataclass(frozen=True)
class ProbabilityInterval:
    """Closed interval [lo, hi] of exact probabilities"""

    lo: Fraction
    hi: Fraction

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    def contains(self, value: float, tol: float = 0.0) -> bool:
        return float(self.lo) - tol <= value <= float(self.hi) + tol

    def distance(self, value: float) -> float:
        """How far value lies outside the interval (0 when inside)"""
        return max(0.0, float(self.lo) - value, value - float(self.hi))


def _split_tail(atoms: Dict[ChainState, float], tail: Optional[TailComponent],
                f: CodingFunction) -> Optional[TailComponent]:
    """Peel tail states up to the largest zero-exception into atoms"""
    if tail is None:
        return None
    zeros = [z for z in f.zero_states if z >= tail.start]
    if not zeros:
        return tail
    top = zeros[-1]
    for state in range(tail.start, top + 1):
        atoms[state] = atoms.get(state, 0.0) + tail.prob(state)
    return TailComponent(top + 1, tail.mass * 2.0 ** -(top - tail.start + 1))


def _canonical(atoms: Dict[ChainState, float], tail: Optional[TailComponent],
               f: CodingFunction) -> Posterior:
    """Normalize, drop empty atoms and fold geometric continuations into the tail"""
    total = sum(atoms.values()) + (tail.mass if tail is not None else 0.0)
    if total <= 0.0:
        raise ImpossibleHistoryError("Observation has probability zero under this coding")
    atoms = {s: m / total for s, m in atoms.items() if m > 0.0}
    if tail is not None:
        tail = TailComponent(tail.start, tail.mass / total)
        zeros = f.zero_states
        while True:
            below = tail.start - 1
            if below < 2 or below not in atoms or (zeros and below <= zeros[-1]):
                break
            if not math.isclose(atoms[below], tail.mass, rel_tol=MERGE_TOL):
                break
            tail = TailComponent(below, atoms.pop(below) + tail.mass)
    return Posterior(tuple(sorted(atoms.items())), tail)


def prior_posterior(f: CodingFunction) -> Posterior:
    """Stationary law of the hidden state before any observation"""
    atoms = {0: 0.25, 1: 0.25}
    tail = _split_tail(atoms, TailComponent(2, 0.5), f)
    return Posterior(tuple(sorted(atoms.items())), tail)


def filter_step(post: Posterior, f: CodingFunction, bit: int) -> Posterior:
    """
    Exact Bayes step: move through the transition law, then condition on the emitted bit

    Raises:
        ImpossibleHistoryError: if no state reachable from the posterior emits bit
    """
    if bit not in (0, 1):
        raise PreconditionError(f"Bits must be 0 or 1, got {bit!r}")

    moved: Dict[ChainState, float] = {}
    for s, mass in post.atoms:
        if s == 0:
            moved[1] = moved.get(1, 0.0) + mass
        elif s == 1:
            moved[2] = moved.get(2, 0.0) + mass
        else:
            moved[0] = moved.get(0, 0.0) + mass / 2
            moved[s + 1] = moved.get(s + 1, 0.0) + mass / 2

    tail = None
    if post.tail is not None:
        moved[0] = moved.get(0, 0.0) + post.tail.mass / 2
        tail = _split_tail(moved, TailComponent(post.tail.start + 1, post.tail.mass / 2), f)

    kept = {s: mass for s, mass in moved.items() if apply(f, s) == bit}
    # Every tail state emits 1
    if bit == 0:
        tail = None
    if not kept and tail is None:
        raise ImpossibleHistoryError(f"Bit {bit} cannot be emitted after this history")
    return _canonical(kept, tail, f)


def _next_one_prob(f: CodingFunction, s: ChainState) -> float:
    if s == 0:
        return float(apply(f, 1))
    if s == 1:
        return float(apply(f, 2))
    return 0.5 * apply(f, 0) + 0.5 * apply(f, s + 1)


def cond_prob_next(post: Posterior, f: CodingFunction) -> float:
    """P(next bit = 1 | history summarized by post)"""
    prob = sum(mass * _next_one_prob(f, s) for s, mass in post.atoms)
    if post.tail is not None:
        # Successors above the tail start emit 1, resets emit 0
        prob += 0.5 * post.tail.mass
    return min(1.0, max(0.0, prob))


def posterior_after(f: CodingFunction, bits: Sequence[int]) -> Posterior:
    post = prior_posterior(f)
    for bit in as_bits(bits):
        post = filter_step(post, f, bit)
    return post


def cond_prob_history(f: CodingFunction, bits: Sequence[int]) -> float:
    """P(X_{n+1} = 1 | X_0..X_n = bits) under the stationary law of f(M)"""
    return cond_prob_next(posterior_after(f, bits), f)


def _state_cap(mass_tol: float) -> int:
    # Initial states above the cap carry mass 2^-cap in total
    return max(2, math.ceil(-math.log2(mass_tol)))


def brute_force_cond_prob(f: CodingFunction, bits: Sequence[int], mass_tol: float) -> ProbabilityInterval:
    """
    Independent oracle: enumerate hidden paths with exact dyadic weights

    Initial states are capped so that the discarded stationary mass is at most
    mass_tol; the returned interval covers every way that mass could split.

    Raises:
        ImpossibleHistoryError: if no enumerated path emits bits
    """
    if not 0 < mass_tol < 1:
        raise PreconditionError(f"mass_tol must lie in (0, 1), got {mass_tol}")
    bits = as_bits(bits)
    cap = _state_cap(mass_tol)
    discarded = Fraction(1, 2 ** cap)
    half = Fraction(1, 2)

    numerator = Fraction(0)
    denominator = Fraction(0)

    def visit(state: ChainState, weight: Fraction, t: int):
        nonlocal numerator, denominator
        if t == len(bits) - 1:
            denominator += weight
            if state < 2:
                numerator += weight * apply(f, state + 1)
            else:
                numerator += weight * half * (apply(f, 0) + apply(f, state + 1))
            return
        nxt_bit = bits[t + 1]
        if state < 2:
            if apply(f, state + 1) == nxt_bit:
                visit(state + 1, weight, t + 1)
            return
        if apply(f, 0) == nxt_bit:
            visit(0, weight * half, t + 1)
        if apply(f, state + 1) == nxt_bit:
            visit(state + 1, weight * half, t + 1)

    for initial in range(cap + 1):
        weight = stationary_prob(initial)
        if not bits:
            denominator += weight
            numerator += weight * apply(f, initial)
        elif apply(f, initial) == bits[0]:
            visit(initial, weight, 0)

    if denominator == 0:
        raise ImpossibleHistoryError("No hidden path emits this history")
    lo = numerator / (denominator + discarded)
    hi = (numerator + discarded) / (denominator + discarded)
    return ProbabilityInterval(lo, min(Fraction(1), hi))


def d_star(x: History, y: History, depth: int) -> Tuple[float, float]:
    """
    Weighted Hamming distance sum_i 2^-(i+1) |x_-i - y_-i| truncated to i < depth

    Returns:
        Tuple of (partial sum, truncation error bound 2^-depth)
    """
    if depth < 0:
        raise PreconditionError(f"depth must be non-negative, got {depth}")
    if x.depth < depth or y.depth < depth:
        raise PreconditionError(f"Both histories must be known to depth {depth}")
    distance = sum(2.0 ** -(i + 1) for i in range(depth) if x.at(i) != y.at(i))
    return distance, 2.0 ** -depth


def _random_prefix_path(rng: Generator, max_length: int) -> List[ChainState]:
    """Stationary trajectory ending in a state >= 2, so a reset can follow it"""
    length = int(rng.integers(1, max_length + 1))
    states = list(simulate_path(stationary_sample(rng), length, rng))
    while states[-1] < 2:
        states.append(step(states[-1], rng))
    return states


def continuity_probe(f: CodingFunction, bits: Sequence[int], n_prefixes: int, rng: Generator,
                     max_prefix_length: int = 24) -> float:
    """
    Largest change of the conditional probability when the past before the last
    '001' is replaced by random positive-probability prefixes

    Raises:
        PreconditionError: if bits contain no '001'
    """
    bits = as_bits(bits)
    reset = last_reset_index(bits)
    if reset is None:
        raise PreconditionError("continuity_probe needs a history containing 0, 0, 1")
    suffix = bits[reset - 2:]
    reference = cond_prob_history(f, bits)

    deviation = 0.0
    for _ in range(n_prefixes):
        prefix = encode(f, _random_prefix_path(rng, max_prefix_length))
        value = cond_prob_history(f, prefix + suffix)
        deviation = max(deviation, abs(value - reference))
    return deviation


def positive_histories(f: CodingFunction, length: int) -> Iterator[BitString]:
    """Every history of the given length with positive probability, in lexicographic order"""
    if length < 0:
        raise PreconditionError(f"length must be non-negative, got {length}")

    def extend(post: Posterior, prefix: BitString) -> Iterator[BitString]:
        if len(prefix) == length:
            yield prefix
            return
        for bit in (0, 1):
            try:
                nxt = filter_step(post, f, bit)
            except ImpossibleHistoryError:
                continue
            yield from extend(nxt, prefix + (bit,))

    yield from extend(prior_posterior(f), ())


def markov_order_violations(f: CodingFunction, extra: int = 4, tol: float = NORMALIZATION_TOL) -> List[BitString]:
    """
    Histories of length order_bound + extra whose conditional probability differs
    from that of their order_bound-bit suffix
    """
    k = order_bound(f)
    violations = []
    for history in positive_histories(f, k + extra):
        full = cond_prob_history(f, history)
        window = cond_prob_history(f, history[-k:])
        if abs(full - window) > tol:
            violations.append(history)
    if violations:
        logger.warning(f"{len(violations)} histories depend on more than the last {k} bits")
    return violations
