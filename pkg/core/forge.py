"""
Forge Module
Level-by-level construction of a coded process on which a given estimator and
stopping rule fail.

Level j looks for N with P(A(N)) > 1/8, where A(N) is the event that the chain
starts at 0 and its first visit to 2N is a stopping time. The event splits into
B+ (the estimate at that stop is >= 1/4) and B- (< 1/4). The bit of state 2N+1 is
then chosen against the larger side: the true conditional probability at the
stop is 0.5 * bit, which differs from every estimate on the chosen side by at
least 1/4.
"""
import functools
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Tuple

from numpy.random import Generator

from core.coding import BitString, CodingFunction, base_coding, encode
from core.exceptions import (
    EnumerationBudgetExceeded,
    EstimationConsistencyError,
    LevelSearchExhausted,
    PreconditionError,
)
from core.predictors import Estimator, StoppingRule, run_session
from core.ryabko_chain import WeightedPath, enumerate_paths_to_hit, simulate_until_hit, stationary_sample
from core.trial_pool import Tally, TrialPool
from utils import settings
from utils.seeding import STREAM_SEARCH, STREAM_SPLIT, SeedLike, derive_seed
from utils.stats import wilson_interval

# Setup logger for this module
logger = logging.getLogger(__name__)

A_THRESHOLD = 1 / 8
I_THRESHOLD = 1 / 16
H_THRESHOLD = 0.25
MIN_SAMPLES = 100

SIDE_PLUS = "B+"
SIDE_MINUS = "B-"


def format_prob(value: float) -> str:
    """Decimal string with 12 significant digits"""
    return format(float(value), ".12g")


@dataclass(frozen=True)
class Estimate:
    """Point estimate with a confidence interval"""

    est: float
    lo: float
    hi: float

    def to_json(self) -> Dict[str, str]:
        return {"est": format_prob(self.est), "lo": format_prob(self.lo), "hi": format_prob(self.hi)}

    @property
    def half_width(self) -> float:
        return (self.hi - self.lo) / 2


@dataclass(frozen=True)
class TrialOutcome:
    """One draw of the chain classified against the event A(k)"""

    started_at_zero: bool
    hit_time: Optional[int] = None
    in_A: bool = False
    h_at_stop: Optional[float] = None
    n_at_stop: Optional[int] = None
    bits: Optional[BitString] = field(default=None, repr=False, compare=False)

    @property
    def side(self) -> Optional[str]:
        if not self.in_A:
            return None
        return SIDE_PLUS if self.h_at_stop >= H_THRESHOLD else SIDE_MINUS


@dataclass(frozen=True)
class ForgeConfig:
    """Sampling and search knobs of the forge"""

    seed: int = 0
    samples: int = settings.DEFAULT_SAMPLES
    confidence: float = settings.DEFAULT_CONFIDENCE
    n_cap: int = settings.DEFAULT_N_CAP
    exact_threshold: int = settings.DEFAULT_EXACT_THRESHOLD
    exact_mass_tol: float = settings.DEFAULT_EXACT_MASS_TOL
    exact_path_budget: int = settings.DEFAULT_EXACT_PATH_BUDGET
    max_trial_steps: int = settings.DEFAULT_MAX_TRIAL_STEPS
    workers: int = 1

    def echo(self) -> Dict[str, Any]:
        return {
            "seed": self.seed,
            "samples": self.samples,
            "confidence": format_prob(self.confidence),
            "n_cap": self.n_cap,
            "exact_threshold": self.exact_threshold,
            "exact_mass_tol": format_prob(self.exact_mass_tol),
            "exact_path_budget": self.exact_path_budget,
            "max_trial_steps": self.max_trial_steps,
        }


@dataclass(frozen=True)
class LevelRecord:
    j: int
    N: int
    p_A: Estimate
    p_B_plus: Estimate
    p_B_minus: Estimate
    malicious_bit: int
    I_side: str
    p_I: Estimate
    truth_at_stop: float
    samples_used: int

    def to_json(self) -> Dict[str, Any]:
        return {
            "j": self.j,
            "N": self.N,
            "p_A": self.p_A.to_json(),
            "p_B_plus": self.p_B_plus.to_json(),
            "p_B_minus": self.p_B_minus.to_json(),
            "malicious_bit": self.malicious_bit,
            "I_side": self.I_side,
            "p_I": self.p_I.to_json(),
            "truth_at_stop": format_prob(self.truth_at_stop),
            "samples_used": self.samples_used,
        }


@dataclass(frozen=True)
class ForgeResult:
    levels: Tuple[LevelRecord, ...]
    coding: CodingFunction
    config: Dict[str, Any] = field(default_factory=dict, compare=False)

    def coding_at(self, j: int) -> CodingFunction:
        """f^(j): the coding after the first j levels (f^(0) for j = 0)"""
        coding = base_coding()
        for level in self.levels[:j]:
            if level.malicious_bit == 0:
                coding = coding.with_exception(2 * level.N + 1, 0)
        return coding

    def to_json(self) -> Dict[str, Any]:
        return {
            "config": dict(self.config),
            "levels": [level.to_json() for level in self.levels],
            "coding": self.coding.to_json(),
        }


@dataclass
class ForgeState:
    """Mutable state of the induction between levels"""

    coding: CodingFunction = field(default_factory=base_coding)
    n_prev: int = 1
    levels: List[LevelRecord] = field(default_factory=list)


def sample_trial(f: CodingFunction, k: int, e: Estimator, r: StoppingRule, rng: Generator,
                 max_steps: int = settings.DEFAULT_MAX_TRIAL_STEPS) -> TrialOutcome:
    """
    Draw M_0 from the stationary law and, when it is 0, run the chain to its first
    visit of 2k and check whether that time is one of the rule's stopping times

    Raises:
        ChainLengthExceeded: if 2k is not reached within max_steps
    """
    if stationary_sample(rng) != 0:
        return TrialOutcome(started_at_zero=False)
    path = simulate_until_hit(k, rng, max_steps)
    bits = encode(f, path)
    return _classify_block(bits, e, r)


def _classify_block(bits: BitString, e: Estimator, r: StoppingRule) -> TrialOutcome:
    hit_time = len(bits) - 1
    trace = run_session(bits, e, r)
    stop = trace.stop_at(hit_time)
    if stop is not None:
        return TrialOutcome(True, hit_time, True, stop.prediction, stop.n, bits)
    return TrialOutcome(True, hit_time, False, None, None, bits)


def to_estimate(count: int, trials: int, confidence: float) -> Estimate:
    lo, hi = wilson_interval(count, trials, confidence)
    return Estimate(count / trials, lo, hi)


def estimate_event_probs(sampler: Callable[[Generator], Any], predicates: Dict[str, Callable[[Any], bool]],
                         samples: int, confidence: float, seed: SeedLike, workers: int = 1) -> Dict[str, Estimate]:
    """
    Monte-Carlo frequencies of several events over the same draws, each with a Wilson score interval

    Returns:
        Dict mapping each predicate name to its Estimate
    """
    if samples < MIN_SAMPLES:
        raise PreconditionError(f"samples must be at least {MIN_SAMPLES}, got {samples}")

    def trial(rng: Generator, tally: Tally):
        outcome = sampler(rng)
        for name, predicate in predicates.items():
            tally.count(name, bool(predicate(outcome)))

    tally = TrialPool(workers).run(trial, samples, seed)
    return {name: to_estimate(tally.get(name), tally.trials, confidence) for name in predicates}


def estimate_event_prob(sampler: Callable[[Generator], Any], predicate: Callable[[Any], bool],
                        samples: int, confidence: float, seed: SeedLike, workers: int = 1) -> Estimate:
    """Monte-Carlo frequency of predicate(sampler(rng)) with a Wilson score interval"""
    return estimate_event_probs(sampler, {"event": predicate}, samples, confidence, seed, workers)["event"]


LEVEL_EVENTS: Dict[str, Callable[[TrialOutcome], bool]] = {
    "A": lambda outcome: outcome.in_A,
    SIDE_PLUS: lambda outcome: outcome.side == SIDE_PLUS,
    SIDE_MINUS: lambda outcome: outcome.side == SIDE_MINUS,
}


def level_events(f: CodingFunction, k: int, e: Estimator, r: StoppingRule, samples: int,
                 seed: SeedLike, cfg: ForgeConfig) -> Dict[str, Estimate]:
    """Estimates of P(A), P(B+) and P(B-) at k from one seeded batch of trials"""
    sampler = functools.partial(sample_trial, f, k, e, r, max_steps=cfg.max_trial_steps)
    return estimate_event_probs(sampler, LEVEL_EVENTS, samples, cfg.confidence, seed, cfg.workers)


@functools.lru_cache(maxsize=16)
def _paths_to_hit(k: int, mass_tol: float, budget: int) -> Optional[Tuple[Tuple[WeightedPath, ...], Fraction]]:
    try:
        paths, residual = enumerate_paths_to_hit(k, mass_tol, budget)
    except EnumerationBudgetExceeded as e:
        logger.warning(f"Exact mode abandoned, falling back to Monte-Carlo: {e}")
        return None
    return tuple(paths), residual


def _exact_level(f: CodingFunction, k: int, e: Estimator, r: StoppingRule,
                 cfg: ForgeConfig) -> Optional[Tuple[Estimate, Estimate, Estimate]]:
    """
    P(A), P(B+), P(B-) by enumerating paths to 2k, or None when exact mode does
    not apply. Intervals run from the enumerated mass up to enumerated + residual
    and the point estimate is their midpoint.
    """
    if 2 * k > cfg.exact_threshold or not (e.deterministic and r.deterministic):
        return None
    enumerated = _paths_to_hit(k, cfg.exact_mass_tol, cfg.exact_path_budget)
    if enumerated is None:
        return None
    paths, residual = enumerated

    masses = {"A": Fraction(0), SIDE_PLUS: Fraction(0), SIDE_MINUS: Fraction(0)}
    for weighted in paths:
        outcome = _classify_block(encode(f, weighted.path), e, r)
        if outcome.in_A:
            masses["A"] += weighted.probability
            masses[outcome.side] += weighted.probability

    # M_0 = 0 with probability 1/4
    quarter = Fraction(1, 4)

    def estimate(mass: Fraction) -> Estimate:
        lo = mass * quarter
        hi = lo + residual * quarter
        return Estimate(float((lo + hi) / 2), float(lo), float(hi))

    return estimate(masses["A"]), estimate(masses[SIDE_PLUS]), estimate(masses[SIDE_MINUS])


def find_level_index(f_prev: CodingFunction, e: Estimator, r: StoppingRule, n_min: int,
                     cfg: ForgeConfig, level: int = 1) -> Tuple[int, Estimate, int]:
    """
    First N in (n_min, n_cap] whose P(A(N)) has lower confidence bound above 1/8

    Returns:
        Tuple of (N, estimate of P(A(N)), trials used)

    Raises:
        LevelSearchExhausted: if no N up to n_cap qualifies
    """
    if n_min < 1:
        raise PreconditionError(f"n_min must be at least 1, got {n_min}")
    best = 0.0
    used = 0
    for n in range(n_min + 1, cfg.n_cap + 1):
        exact = _exact_level(f_prev, n, e, r, cfg)
        if exact is not None:
            p_a = exact[0]
        else:
            seed = derive_seed(cfg.seed, STREAM_SEARCH, level, n)
            p_a = level_events(f_prev, n, e, r, cfg.samples, seed, cfg)["A"]
            used += cfg.samples
        logger.debug(f"Level {level}: P(A({n})) = {p_a.est:.6f} [{p_a.lo:.6f}, {p_a.hi:.6f}]")
        best = max(best, p_a.est)
        if p_a.lo > A_THRESHOLD:
            logger.info(f"Level {level}: accepted N={n} with P(A) lower bound {p_a.lo:.6f}")
            return n, p_a, used
    raise LevelSearchExhausted(level, n_min, cfg.n_cap, best)


def split_B(f: CodingFunction, n: int, e: Estimator, r: StoppingRule, samples: int,
            seed: SeedLike, cfg: ForgeConfig) -> Tuple[Estimate, Estimate, int]:
    """
    Estimate P(B+) and P(B-) at k = n; both are unconditional probabilities

    Returns:
        Tuple of (p_B_plus, p_B_minus, trials used)
    """
    exact = _exact_level(f, n, e, r, cfg)
    if exact is not None:
        return exact[1], exact[2], 0
    events = level_events(f, n, e, r, samples, seed, cfg)
    return events[SIDE_PLUS], events[SIDE_MINUS], samples


def choose_malicious_bit(p_b_plus: float, p_b_minus: float) -> Tuple[int, str]:
    """Bit 1 against B- when P(B-) >= P(B+), otherwise bit 0 against B+"""
    if p_b_minus >= p_b_plus:
        return 1, SIDE_MINUS
    return 0, SIDE_PLUS


def truth_at_stop(bit: int) -> float:
    """P(next bit = 1 | block up to the first visit of 2N) when state 2N+1 emits bit"""
    return 0.5 * bit


def build_level(state: ForgeState, e: Estimator, r: StoppingRule, cfg: ForgeConfig) -> LevelRecord:
    """
    One inductive step: find N, split A, pick the malicious bit and extend the coding

    Raises:
        LevelSearchExhausted: propagated from find_level_index
        EstimationConsistencyError: if both sides look smaller than 1/16 although P(A) > 1/8
    """
    j = len(state.levels) + 1
    n, p_a, search_used = find_level_index(state.coding, e, r, state.n_prev, cfg, level=j)
    p_plus, p_minus, split_used = split_B(
        state.coding, n, e, r, cfg.samples, derive_seed(cfg.seed, STREAM_SPLIT, j, n), cfg
    )

    if p_a.lo > A_THRESHOLD and max(p_plus.hi, p_minus.hi) < I_THRESHOLD:
        raise EstimationConsistencyError(
            f"Level {j}: P(A) lower bound {p_a.lo:.6f} > 1/8 but P(B+) <= {p_plus.hi:.6f} "
            f"and P(B-) <= {p_minus.hi:.6f} are both below 1/16"
        )

    bit, side = choose_malicious_bit(p_plus.est, p_minus.est)
    p_i = p_minus if side == SIDE_MINUS else p_plus
    if p_i.lo <= I_THRESHOLD:
        logger.warning(f"Level {j}: P(I) lower bound {p_i.lo:.6f} does not clear 1/16")

    if bit == 0:
        state.coding = state.coding.with_exception(2 * n + 1, 0)

    record = LevelRecord(
        j=j,
        N=n,
        p_A=p_a,
        p_B_plus=p_plus,
        p_B_minus=p_minus,
        malicious_bit=bit,
        I_side=side,
        p_I=p_i,
        truth_at_stop=truth_at_stop(bit),
        samples_used=search_used + split_used,
    )
    state.levels.append(record)
    state.n_prev = n
    logger.info(f"Level {j}: N={n}, malicious bit {bit} against {side}, P(I) ~ {p_i.est:.6f}")
    return record


def forge(levels: int, e: Estimator, r: StoppingRule, cfg: ForgeConfig) -> ForgeResult:
    """Run `levels` inductive steps from f^(0) and return the level-J truncation of the limit coding"""
    if levels < 1:
        raise PreconditionError(f"levels must be at least 1, got {levels}")
    state = ForgeState()
    logger.info(f"Forging {levels} levels against {e.identifier} with rule {r.identifier} (seed {cfg.seed})")
    for _ in range(levels):
        build_level(state, e, r, cfg)
    config = dict(cfg.echo(), levels=levels, predictor=e.identifier, stop_rule=r.identifier)
    return ForgeResult(tuple(state.levels), state.coding, config)
