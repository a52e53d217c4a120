"""
Experiment Handler
Validated configurations and execution of the forge, verify, probe and simulate commands.

Each run is recorded in the run ledger whatever its outcome; errors are logged
and re-raised so the entry script can map them to an exit code.
"""
import csv
import io
import logging
import sys
from dataclasses import dataclass
from datetime import datetime
from typing import Any, Callable, Dict, Optional, Tuple

from rich.console import Console
from rich.table import Table

from core.coding import CodingFunction, base_coding, encode
from core.exceptions import ConfigError, ForgeError, PreconditionError
from core.forge import MIN_SAMPLES, ForgeConfig, ForgeResult, forge
from core.predictors import parse_predictor, parse_stop_rule
from core.reports import FORMATS, read_coding, read_forge_result, write_report
from core.run_logger import RunLogger
from core.ryabko_chain import simulate_path, stationary_sample
from core.verifier import ProbeReport, VerifyReport, probe_coding, verify
from utils import settings
from utils.seeding import STREAM_SIMULATE, make_rng

STATUS_COMPLETED = "completed"
STATUS_FLAGGED = "flagged"
STATUS_FAILED = "failed"


def _check_seed(seed: int):
    if seed < 0:
        raise ConfigError("seed", f"must be a non-negative integer, got {seed}")


def _check_confidence(confidence: float):
    if not 0.5 < confidence < 1.0:
        raise ConfigError("confidence", f"must lie in (0.5, 1), got {confidence}")


def _check_samples(samples: int):
    if samples < MIN_SAMPLES:
        raise ConfigError("samples", f"must be at least {MIN_SAMPLES}, got {samples}")


def _check_fmt(fmt: str):
    if fmt not in FORMATS:
        raise ConfigError("format", f"must be one of {', '.join(FORMATS)}, got '{fmt}'")


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int
    levels: int = 2
    samples: int = settings.DEFAULT_SAMPLES
    confidence: float = settings.DEFAULT_CONFIDENCE
    predictor: str = "kt:2"
    stop_rule: str = "always"
    n_cap: int = settings.DEFAULT_N_CAP
    exact_threshold: int = settings.DEFAULT_EXACT_THRESHOLD
    exact_mass_tol: float = settings.DEFAULT_EXACT_MASS_TOL
    exact_path_budget: int = settings.DEFAULT_EXACT_PATH_BUDGET
    max_trial_steps: int = settings.DEFAULT_MAX_TRIAL_STEPS
    workers: int = 1
    out: Optional[str] = None
    fmt: str = "json"

    def validate(self) -> "ExperimentConfig":
        """Raise ConfigError naming the first invalid field"""
        _check_seed(self.seed)
        if self.levels < 1:
            raise ConfigError("levels", f"must be at least 1, got {self.levels}")
        _check_samples(self.samples)
        _check_confidence(self.confidence)
        if self.n_cap < 2:
            raise ConfigError("n_cap", f"must be at least 2, got {self.n_cap}")
        if not 0.0 < self.exact_mass_tol < 1.0:
            raise ConfigError("exact_mass_tol", f"must lie in (0, 1), got {self.exact_mass_tol}")
        if self.exact_path_budget < 1 or self.max_trial_steps < 1:
            raise ConfigError("budget", "path and step budgets must be positive")
        if self.workers < 1:
            raise ConfigError("workers", f"must be at least 1, got {self.workers}")
        _check_fmt(self.fmt)
        for name, parse in (("predictor", parse_predictor), ("stop_rule", parse_stop_rule)):
            try:
                parse(getattr(self, name))
            except PreconditionError as e:
                raise ConfigError(name, str(e))
        return self

    def to_forge_config(self) -> ForgeConfig:
        return ForgeConfig(
            seed=self.seed,
            samples=self.samples,
            confidence=self.confidence,
            n_cap=self.n_cap,
            exact_threshold=self.exact_threshold,
            exact_mass_tol=self.exact_mass_tol,
            exact_path_budget=self.exact_path_budget,
            max_trial_steps=self.max_trial_steps,
            workers=self.workers,
        )

    def to_echo(self) -> Dict[str, Any]:
        """Fields echoed in reports; workers and paths stay out so output is machine independent"""
        return dict(
            self.to_forge_config().echo(),
            levels=self.levels,
            predictor=self.predictor,
            stop_rule=self.stop_rule,
        )


@dataclass(frozen=True)
class VerifyConfig:
    source: str
    seed: int
    samples: int = settings.DEFAULT_SAMPLES
    confidence: float = settings.DEFAULT_CONFIDENCE
    suffixes: int = 20
    prefixes: int = 100
    oracle_length: int = 8
    max_trial_steps: int = settings.DEFAULT_MAX_TRIAL_STEPS
    workers: int = 1
    out: Optional[str] = None
    fmt: str = "json"

    def validate(self) -> "VerifyConfig":
        _check_seed(self.seed)
        _check_samples(self.samples)
        _check_confidence(self.confidence)
        _check_fmt(self.fmt)
        if self.suffixes < 0 or self.prefixes < 1:
            raise ConfigError("probe", "suffix count must be >= 0 and prefix count >= 1")
        if self.oracle_length < 1:
            raise ConfigError("oracle_length", f"must be at least 1, got {self.oracle_length}")
        return self


@dataclass(frozen=True)
class ProbeConfig:
    seed: int
    coding: Optional[str] = None
    suffixes: int = 20
    prefixes: int = 100
    oracle_length: int = 8
    markov_extra: int = 4
    reset_length: int = 100_000
    out: Optional[str] = None

    def validate(self) -> "ProbeConfig":
        _check_seed(self.seed)
        if self.suffixes < 0 or self.prefixes < 1:
            raise ConfigError("probe", "suffix count must be >= 0 and prefix count >= 1")
        if self.oracle_length < 1:
            raise ConfigError("oracle_length", f"must be at least 1, got {self.oracle_length}")
        if self.markov_extra < 0:
            raise ConfigError("markov_extra", f"must be non-negative, got {self.markov_extra}")
        if self.reset_length < 3:
            raise ConfigError("reset_length", f"must be at least 3, got {self.reset_length}")
        return self


@dataclass(frozen=True)
class SimulateConfig:
    seed: int
    length: int = 1000
    coding: Optional[str] = None
    out: Optional[str] = None

    def validate(self) -> "SimulateConfig":
        _check_seed(self.seed)
        if self.length < 1:
            raise ConfigError("length", f"must be at least 1, got {self.length}")
        return self


def simulate_csv(f: CodingFunction, length: int, seed: int) -> bytes:
    """Stationary trajectory of the given length as t,state,bit rows"""
    rng = make_rng(seed, STREAM_SIMULATE)
    path = simulate_path(stationary_sample(rng), length, rng)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["t", "state", "bit"])
    for t, (state, bit) in enumerate(zip(path, encode(f, path))):
        writer.writerow([t, state, bit])
    return buffer.getvalue().encode("utf-8")


class ExperimentHandler:
    def __init__(self, run_logger: Optional[RunLogger] = None, console: Optional[Console] = None):
        self.run_logger = run_logger or RunLogger()
        self.console = console or Console(stderr=True)
        self.logger = logging.getLogger(__name__)

    def _emit(self, data: bytes, out: Optional[str]) -> str:
        """Write report bytes to a file, or to stdout when no path is given"""
        if out is None:
            sys.stdout.buffer.write(data)
            sys.stdout.flush()
            return "-"
        with open(out, "wb") as f:
            f.write(data)
        self.logger.info(f"Wrote {len(data)} bytes to {out}")
        return out

    def _execute(self, command: str, seed: int, out: Optional[str],
                 action: Callable[[], Tuple[bytes, bool, str]]) -> bool:
        """
        Run an action producing (bytes, flagged, detail), emit its output and record the run

        Returns:
            True if the run produced a flagged (hypothesis-violation) result
        """
        started = datetime.now()
        try:
            data, flagged, detail = action()
            target = self._emit(data, out)
        except (ForgeError, OSError) as e:
            self.logger.error(f"{command} failed: {e}", exc_info=True)
            self.run_logger.log_run(started, command, seed, STATUS_FAILED, out, f"{type(e).__name__}: {e}")
            raise
        status = STATUS_FLAGGED if flagged else STATUS_COMPLETED
        self.run_logger.log_run(started, command, seed, status, target, detail)
        return flagged

    def run_forge(self, cfg: ExperimentConfig) -> bool:
        def action():
            cfg.validate()
            estimator = parse_predictor(cfg.predictor)
            rule = parse_stop_rule(cfg.stop_rule)
            result = forge(cfg.levels, estimator, rule, cfg.to_forge_config())
            result = ForgeResult(result.levels, result.coding, cfg.to_echo())
            self._show_forge(result)
            return write_report(result, cfg.fmt), False, f"{len(result.levels)} levels"

        return self._execute("forge", cfg.seed, cfg.out, action)

    def run_verify(self, cfg: VerifyConfig) -> bool:
        def action():
            cfg.validate()
            result = read_forge_result(cfg.source)
            report = verify(result, cfg.samples, cfg.seed, cfg.confidence, cfg.workers,
                            cfg.suffixes, cfg.prefixes, cfg.oracle_length, cfg.max_trial_steps)
            self._show_verify(report)
            detail = "; ".join(flag for level in report.levels for flag in level.flags)
            return write_report(report, cfg.fmt), report.flagged, detail

        return self._execute("verify", cfg.seed, cfg.out, action)

    def run_probe(self, cfg: ProbeConfig) -> bool:
        def action():
            cfg.validate()
            coding = read_coding(cfg.coding) if cfg.coding else base_coding()
            report = probe_coding(coding, cfg.seed, cfg.suffixes, cfg.prefixes, cfg.oracle_length,
                                  cfg.markov_extra, cfg.reset_length)
            self._show_probe(report)
            return write_report(report, "json"), report.flagged, f"{len(report.markov_violations)} violations"

        return self._execute("probe", cfg.seed, cfg.out, action)

    def run_simulate(self, cfg: SimulateConfig) -> bool:
        def action():
            cfg.validate()
            coding = read_coding(cfg.coding) if cfg.coding else base_coding()
            return simulate_csv(coding, cfg.length, cfg.seed), False, f"{cfg.length} steps"

        return self._execute("simulate", cfg.seed, cfg.out, action)

    def _show_forge(self, result: ForgeResult):
        table = Table(title="Forged levels")
        for column in ("j", "N", "P(A)", "P(B+)", "P(B-)", "bit", "side", "P(I)"):
            table.add_column(column)
        for level in result.levels:
            table.add_row(
                str(level.j), str(level.N),
                f"{level.p_A.est:.4f}", f"{level.p_B_plus.est:.4f}", f"{level.p_B_minus.est:.4f}",
                str(level.malicious_bit), level.I_side, f"{level.p_I.est:.4f}",
            )
        self.console.print(table)

    def _show_verify(self, report: VerifyReport):
        table = Table(title="Verification")
        for column in ("j", "N", "P(I)", "CI", "I count", "min gap", "flags"):
            table.add_column(column)
        for level in report.levels:
            gap = "-" if level.min_gap is None else f"{level.min_gap:.4f}"
            style = "red" if level.flags else "green"
            table.add_row(
                str(level.j), str(level.N), f"{level.p_I.est:.4f}",
                f"[{level.p_I.lo:.4f}, {level.p_I.hi:.4f}]", str(level.i_count), gap,
                f"[{style}]{len(level.flags)}[/{style}]",
            )
        self.console.print(table)
        self.console.print(
            f"Continuity max deviation {report.probes.continuity_max_deviation:.3g}, "
            f"oracle max error {report.probes.oracle_max_error:.3g}"
        )

    def _show_probe(self, report: ProbeReport):
        style = "red" if report.flagged else "green"
        self.console.print(
            f"[{style}]order bound {report.order_bound}, {len(report.markov_violations)} Markov-order violations, "
            f"continuity {report.probes.continuity_max_deviation:.3g}, oracle {report.probes.oracle_max_error:.3g}, "
            f"reset frequency {report.reset_frequency:.4f}[/{style}]"
        )
