"""
Coding Module
Coding functions mapping chain states to bits, with encoding, inversion and reset detection.

Every coding fixes state 0 and 1 to bit 0 and every even state >= 2 to bit 1.
Odd states >= 3 default to bit 1 and may be overridden by a finite set of
exceptions; the forge only ever writes exceptions at the malicious states 2N+1.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

from numpy.random import Generator

from core.exceptions import MalformedBitsError, PreconditionError, SchemaError
from core.ryabko_chain import ChainPath, ChainState, simulate_path, stationary_sample

# Setup logger for this module
logger = logging.getLogger(__name__)

BitString = Tuple[int, ...]

RESET_PATTERN = (0, 0, 1)
MIN_ORDER_BOUND = 3


def as_bits(bits: Iterable[int]) -> BitString:
    """Normalize an iterable of 0/1 values to a tuple, rejecting other symbols"""
    result = tuple(int(b) for b in bits)
    for b in result:
        if b not in (0, 1):
            raise PreconditionError(f"Bits must be 0 or 1, got {b!r}")
    return result


@dataclass(frozen=True)
class CodingFunction:
    """
    A {0,1}-valued function of the chain states stored as exceptions over a default

    Args:
        exceptions: (odd state >= 3, bit) pairs, strictly increasing by state
    """

    exceptions: Tuple[Tuple[int, int], ...] = ()
    _lookup: Dict[int, int] = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        previous = None
        for state, bit in self.exceptions:
            if state < 3 or state % 2 == 0:
                raise PreconditionError(f"Exception states must be odd and >= 3, got {state}")
            if bit not in (0, 1):
                raise PreconditionError(f"Exception bits must be 0 or 1, got {bit!r}")
            if previous is not None and state <= previous:
                raise PreconditionError("Exception states must be strictly increasing")
            previous = state
        object.__setattr__(self, "_lookup", dict(self.exceptions))

    def __call__(self, s: ChainState) -> int:
        return apply(self, s)

    @property
    def zero_states(self) -> Tuple[int, ...]:
        """Exception states mapped to 0, increasing"""
        return tuple(state for state, bit in self.exceptions if bit == 0)

    def with_exception(self, state: int, bit: int) -> "CodingFunction":
        """Copy of this coding with one more (or a replaced) exception"""
        updated = dict(self.exceptions)
        updated[state] = bit
        return CodingFunction(tuple(sorted(updated.items())))

    def to_json(self) -> Dict[str, Any]:
        return {
            "default_odd": 1,
            "exceptions": [{"state": state, "bit": bit} for state, bit in self.exceptions],
        }

    @classmethod
    def from_json(cls, data: Any, where: str = "coding") -> "CodingFunction":
        """Parse the coding file format, naming the offending field on error"""
        if not isinstance(data, dict):
            raise SchemaError(where, "expected an object")
        if data.get("default_odd") != 1:
            raise SchemaError(f"{where}.default_odd", "must be 1")
        raw = data.get("exceptions")
        if not isinstance(raw, list):
            raise SchemaError(f"{where}.exceptions", "expected a list")
        pairs = []
        for i, entry in enumerate(raw):
            name = f"{where}.exceptions[{i}]"
            if not isinstance(entry, dict):
                raise SchemaError(name, "expected an object")
            state, bit = entry.get("state"), entry.get("bit")
            if not isinstance(state, int) or isinstance(state, bool) or state < 3 or state % 2 == 0:
                raise SchemaError(f"{name}.state", "must be an odd integer >= 3")
            if bit not in (0, 1) or isinstance(bit, bool):
                raise SchemaError(f"{name}.bit", "must be 0 or 1")
            if pairs and state <= pairs[-1][0]:
                raise SchemaError(f"{name}.state", "states must be strictly increasing")
            pairs.append((state, bit))
        return cls(tuple(pairs))


@dataclass(frozen=True)
class AmbiguousDecoding:
    """Result of inverting a partial block whose last states are not yet determined"""

    candidates: Tuple[ChainPath, ...]


def base_coding() -> CodingFunction:
    """f^(0): every odd state >= 3 maps to 1"""
    return CodingFunction()


def apply(f: CodingFunction, s: ChainState) -> int:
    """Bit emitted by state s under coding f"""
    if s < 2:
        return 0
    if s % 2 == 0:
        return 1
    return f._lookup.get(s, 1)


def encode(f: CodingFunction, path: Iterable[ChainState]) -> BitString:
    """Elementwise coding of a path"""
    return tuple(apply(f, s) for s in path)


def _successors(s: ChainState) -> Tuple[ChainState, ...]:
    if s == 0:
        return (1,)
    if s == 1:
        return (2,)
    return (0, s + 1)


def invert(f: CodingFunction, bits: Sequence[int]) -> Union[ChainPath, AmbiguousDecoding]:
    """
    Recover the path starting at state 0 that emits bits under f

    Candidate paths are extended bit by bit; an exception state mapped to 0
    competes with a reset for at most two more bits before one dies out.

    Returns:
        The unique ChainPath, or AmbiguousDecoding when trailing bits leave
        several candidates alive

    Raises:
        PreconditionError: if bits do not begin with 0, 0, 1
        MalformedBitsError: if no legal path emits bits
    """
    bits = as_bits(bits)
    if bits[:3] != RESET_PATTERN:
        raise PreconditionError("A block starting at state 0 must begin with bits 0, 0, 1")

    candidates: List[Tuple[ChainState, ...]] = [(0, 1, 2)]
    for t, bit in enumerate(bits[3:], start=3):
        extended = []
        for states in candidates:
            for nxt in _successors(states[-1]):
                if apply(f, nxt) == bit:
                    extended.append(states + (nxt,))
        if not extended:
            raise MalformedBitsError(f"No legal path emits bit {bit} at position {t}")
        candidates = extended

    if len(candidates) == 1:
        return ChainPath(candidates[0])
    return AmbiguousDecoding(tuple(ChainPath(states) for states in candidates))


def order_bound(f: CodingFunction) -> int:
    """
    Upper bound K on the Markov order of f(M); f(s) = 1 for every s >= K

    A window with no '001' is a monotone climb from some state m >= 1 followed by
    two free steps. Once the climb spans the largest zero-emitting odd state z
    (state 1 counts), the zero pattern pins m or proves m > z, so K = z + 2
    bits determine the conditional law. z + 1 bits do not: with 5 -> 0 the window
    0,1,1,1,0,0 is emitted from 1,2,3,4,... and from 5,6,7,8,... alike.
    """
    zeros = f.zero_states
    if not zeros:
        return MIN_ORDER_BOUND
    return zeros[-1] + 2


def last_reset_index(bits: Sequence[int]) -> Optional[int]:
    """Position of the '1' in the latest 0, 0, 1 pattern, or None"""
    bits = as_bits(bits)
    for t in range(len(bits) - 1, 1, -1):
        if bits[t - 2:t + 1] == RESET_PATTERN:
            return t
    return None


def reset_frequency(f: CodingFunction, length: int, rng: Generator) -> float:
    """
    Frequency of the '001' pattern in a stationary coded trajectory

    Converges to P(M = 0) = 1/4 by ergodicity, so the pattern occurs in the
    past with probability one.
    """
    if length < 3:
        raise PreconditionError(f"length must be at least 3, got {length}")
    bits = encode(f, simulate_path(stationary_sample(rng), length, rng))
    hits = sum(1 for t in range(length - 2) if bits[t:t + 3] == RESET_PATTERN)
    return hits / (length - 2)
