"""
Verifier Module
Re-checks a forged result on fresh randomness and runs the global oracle probes.

The forge picks N because its own estimate cleared 1/8, so its numbers are
biased upward; verification draws new trials from a stream derived from its
own seed and recomputes I membership, the gap |h - truth| and the oracle's
conditional probability at every stop.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from numpy.random import Generator

from core.coding import BitString, CodingFunction, encode, last_reset_index, order_bound, reset_frequency
from core.cond_oracle import (
    NORMALIZATION_TOL,
    brute_force_cond_prob,
    cond_prob_history,
    continuity_probe,
    markov_order_violations,
    positive_histories,
)
from core.exceptions import PreconditionError
from core.forge import (
    H_THRESHOLD,
    I_THRESHOLD,
    Estimate,
    ForgeResult,
    format_prob,
    sample_trial,
    truth_at_stop,
    to_estimate,
)
from core.predictors import Estimator, StoppingRule, parse_predictor, parse_stop_rule
from core.ryabko_chain import simulate_path, stationary_sample
from core.trial_pool import Tally, TrialPool
from utils import settings
from utils.seeding import STREAM_PROBE, STREAM_VERIFY, derive_seed, make_rng

# Setup logger for this module
logger = logging.getLogger(__name__)

ORACLE_MASS_TOL = 1e-9


@dataclass(frozen=True)
class VerifyLevelRecord:
    j: int
    N: int
    p_I: Estimate
    i_count: int
    a_count: int
    min_gap: Optional[float]
    truth_max_error: Optional[float]
    samples: int
    overlaps_forge: bool
    flags: Tuple[str, ...] = ()

    def to_json(self) -> Dict[str, Any]:
        return {
            "j": self.j,
            "N": self.N,
            "p_I": self.p_I.to_json(),
            "i_count": self.i_count,
            "a_count": self.a_count,
            "min_gap": None if self.min_gap is None else format_prob(self.min_gap),
            "truth_max_error": None if self.truth_max_error is None else format_prob(self.truth_max_error),
            "samples": self.samples,
            "overlaps_forge": self.overlaps_forge,
            "flags": list(self.flags),
        }


@dataclass(frozen=True)
class ProbeSummary:
    """Global checks of the conditional-probability oracle on one coding"""

    continuity_max_deviation: float
    continuity_suffixes: int
    oracle_max_error: float
    oracle_histories: int
    oracle_max_length: int

    def to_json(self) -> Dict[str, Any]:
        return {
            "continuity_max_deviation": format_prob(self.continuity_max_deviation),
            "continuity_suffixes": self.continuity_suffixes,
            "oracle_max_error": format_prob(self.oracle_max_error),
            "oracle_histories": self.oracle_histories,
            "oracle_max_length": self.oracle_max_length,
        }


@dataclass(frozen=True)
class VerifyReport:
    source: ForgeResult
    levels: Tuple[VerifyLevelRecord, ...]
    probes: ProbeSummary
    config: Dict[str, Any] = field(default_factory=dict, compare=False)

    @property
    def flagged(self) -> bool:
        if any(level.flags for level in self.levels):
            return True
        return (self.probes.continuity_max_deviation > NORMALIZATION_TOL
                or self.probes.oracle_max_error > NORMALIZATION_TOL)

    def to_json(self) -> Dict[str, Any]:
        return {
            "config": dict(self.config),
            "levels": [level.to_json() for level in self.levels],
            "global": self.probes.to_json(),
            "flagged": self.flagged,
        }


def _resolve(result: ForgeResult, e: Optional[Estimator], r: Optional[StoppingRule]) -> Tuple[Estimator, StoppingRule]:
    if e is None:
        e = parse_predictor(str(result.config.get("predictor", "")))
    if r is None:
        r = parse_stop_rule(str(result.config.get("stop_rule", "")))
    return e, r


def verify_level(result: ForgeResult, j: int, samples: int, seed: int,
                 e: Optional[Estimator] = None, r: Optional[StoppingRule] = None,
                 confidence: float = settings.DEFAULT_CONFIDENCE, workers: int = 1,
                 max_steps: int = settings.DEFAULT_MAX_TRIAL_STEPS) -> VerifyLevelRecord:
    """
    Re-sample trials at k = N_j under the final coding and recompute I_j

    Args:
        result: Forged levels and coding
        j: Zero-based index into result.levels
        samples: Number of fresh trials
        seed: Verification seed, never the forge's stream
        e, r: Estimator and rule; parsed from the result's config when omitted
    """
    if not 0 <= j < len(result.levels):
        raise PreconditionError(f"level index {j} out of range for {len(result.levels)} levels")
    e, r = _resolve(result, e, r)
    level = result.levels[j]
    coding = result.coding
    truth = truth_at_stop(level.malicious_bit)

    def trial(rng: Generator, tally: Tally):
        outcome = sample_trial(coding, level.N, e, r, rng, max_steps)
        if not outcome.in_A:
            return
        tally.count("A")
        tally.observe_max("truth_error", abs(cond_prob_history(coding, outcome.bits) - truth))
        if outcome.side == level.I_side:
            tally.count("I")
            tally.observe_min("gap", abs(outcome.h_at_stop - truth))

    tally = TrialPool(workers).run(trial, samples, derive_seed(seed, STREAM_VERIFY, level.j))
    p_i = to_estimate(tally.get("I"), tally.trials, confidence)
    min_gap = tally.minima.get("gap")
    truth_error = tally.maxima.get("truth_error")

    flags: List[str] = []
    if tally.get("I") == 0 and level.p_I.lo > I_THRESHOLD:
        flags.append("no I occurrences although the forged P(I) lower bound exceeds 1/16")
    if min_gap is not None and min_gap < H_THRESHOLD:
        flags.append(f"gap {min_gap:.6g} below 1/4 on I")
    if truth_error is not None and truth_error > NORMALIZATION_TOL:
        flags.append(f"oracle deviates from 0.5*bit by {truth_error:.3g} at the stop")
    for flag in flags:
        logger.warning(f"Level {level.j}: {flag}")

    overlaps = p_i.lo <= level.p_I.hi and level.p_I.lo <= p_i.hi
    return VerifyLevelRecord(
        j=level.j,
        N=level.N,
        p_I=p_i,
        i_count=tally.get("I"),
        a_count=tally.get("A"),
        min_gap=min_gap,
        truth_max_error=truth_error,
        samples=tally.trials,
        overlaps_forge=bool(overlaps),
        flags=tuple(flags),
    )


def _post_reset_suffixes(f: CodingFunction, count: int, rng: Generator, length: int = 32) -> List[Tuple[int, ...]]:
    """Stationary coded trajectories that contain at least one '001'"""
    suffixes = []
    while len(suffixes) < count:
        bits = encode(f, simulate_path(stationary_sample(rng), length, rng))
        if last_reset_index(bits) is not None:
            suffixes.append(bits)
    return suffixes


def continuity_suite(f: CodingFunction, suffixes: int, prefixes: int, rng: Generator) -> float:
    """Largest continuity_probe deviation over random histories containing '001'"""
    deviation = 0.0
    for bits in _post_reset_suffixes(f, suffixes, rng):
        deviation = max(deviation, continuity_probe(f, bits, prefixes, rng))
    return deviation


def oracle_suite(f: CodingFunction, max_length: int, mass_tol: float = ORACLE_MASS_TOL) -> Tuple[float, int]:
    """
    Largest distance of the filter outside the brute-force interval over every
    positive-probability history of length 1..max_length

    Returns:
        Tuple of (max distance, number of histories checked)
    """
    worst = 0.0
    checked = 0
    for length in range(1, max_length + 1):
        for history in positive_histories(f, length):
            interval = brute_force_cond_prob(f, history, mass_tol)
            worst = max(worst, interval.distance(cond_prob_history(f, history)))
            checked += 1
    logger.debug(f"Oracle suite: {checked} histories up to length {max_length}, worst {worst:.3g}")
    return worst, checked


def run_probes(f: CodingFunction, seed: int, suffixes: int = 20, prefixes: int = 100,
               oracle_length: int = 8) -> ProbeSummary:
    rng = make_rng(seed, STREAM_PROBE)
    deviation = continuity_suite(f, suffixes, prefixes, rng)
    worst, checked = oracle_suite(f, oracle_length)
    return ProbeSummary(deviation, suffixes, worst, checked, oracle_length)


def verify(result: ForgeResult, samples: int, seed: int, confidence: float = settings.DEFAULT_CONFIDENCE,
           workers: int = 1, suffixes: int = 20, prefixes: int = 100, oracle_length: int = 8,
           max_steps: int = settings.DEFAULT_MAX_TRIAL_STEPS) -> VerifyReport:
    """Verify every level of result and run the global probes on its coding"""
    e, r = _resolve(result, None, None)
    logger.info(f"Verifying {len(result.levels)} levels with {samples} fresh samples (seed {seed})")
    levels = tuple(
        verify_level(result, j, samples, seed, e, r, confidence, workers, max_steps)
        for j in range(len(result.levels))
    )
    probes = run_probes(result.coding, seed, suffixes, prefixes, oracle_length)
    config = {
        "seed": seed,
        "samples": samples,
        "confidence": format_prob(confidence),
        "probe_suffixes": suffixes,
        "probe_prefixes": prefixes,
        "oracle_length": oracle_length,
        "source": dict(result.config),
    }
    report = VerifyReport(result, levels, probes, config)
    if report.flagged:
        logger.warning("Verification flagged at least one inconsistency")
    return report


@dataclass(frozen=True)
class ProbeReport:
    """Oracle probes plus the Markov-order and reset-frequency checks of one coding"""

    coding: CodingFunction
    probes: ProbeSummary
    order_bound: int
    markov_extra: int
    markov_violations: Tuple[BitString, ...]
    reset_frequency: float
    config: Dict[str, Any] = field(default_factory=dict, compare=False)

    @property
    def flagged(self) -> bool:
        return (bool(self.markov_violations)
                or self.probes.continuity_max_deviation > NORMALIZATION_TOL
                or self.probes.oracle_max_error > NORMALIZATION_TOL)

    def to_json(self) -> Dict[str, Any]:
        return {
            "config": dict(self.config),
            "coding": self.coding.to_json(),
            "global": self.probes.to_json(),
            "markov_order": {
                "order_bound": self.order_bound,
                "history_length": self.order_bound + self.markov_extra,
                "violations": len(self.markov_violations),
                "examples": ["".join(map(str, h)) for h in self.markov_violations[:5]],
            },
            "reset_frequency": format_prob(self.reset_frequency),
            "flagged": self.flagged,
        }


def probe_coding(f: CodingFunction, seed: int, suffixes: int = 20, prefixes: int = 100,
                 oracle_length: int = 8, markov_extra: int = 4, reset_length: int = 100_000) -> ProbeReport:
    """Run every oracle-side check on a coding"""
    probes = run_probes(f, seed, suffixes, prefixes, oracle_length)
    violations = tuple(markov_order_violations(f, markov_extra))
    frequency = reset_frequency(f, reset_length, make_rng(seed, STREAM_PROBE, 1))
    config = {
        "seed": seed,
        "probe_suffixes": suffixes,
        "probe_prefixes": prefixes,
        "oracle_length": oracle_length,
        "markov_extra": markov_extra,
        "reset_length": reset_length,
    }
    logger.info(f"Probed coding with {len(f.exceptions)} exceptions: {len(violations)} Markov-order violations, "
                f"reset frequency {frequency:.4f}")
    return ProbeReport(f, probes, order_bound(f), markov_extra, violations, frequency, config)
