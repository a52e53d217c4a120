"""
Trial Pool
Runs Monte-Carlo trials in fixed-size chunks on a thread pool.

Each chunk draws from its own stream derived from (seed, chunk index) and the
per-chunk tallies are merged in chunk order, so totals do not depend on how
many workers ran them.
"""
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List

from numpy.random import Generator

from utils.seeding import SeedLike, make_rng

# Setup logger for this module
logger = logging.getLogger(__name__)

CHUNK_SIZE = 5000


@dataclass
class Tally:
    """Event counts over a number of trials, plus running extremes"""

    trials: int = 0
    counts: Dict[str, int] = field(default_factory=dict)
    minima: Dict[str, float] = field(default_factory=dict)
    maxima: Dict[str, float] = field(default_factory=dict)

    def count(self, event: str, hit: bool = True) -> None:
        self.counts[event] = self.counts.get(event, 0) + int(hit)

    def observe_min(self, name: str, value: float) -> None:
        if name not in self.minima or value < self.minima[name]:
            self.minima[name] = value

    def observe_max(self, name: str, value: float) -> None:
        if name not in self.maxima or value > self.maxima[name]:
            self.maxima[name] = value

    def merge(self, other: "Tally") -> None:
        self.trials += other.trials
        for event, n in other.counts.items():
            self.count_many(event, n)
        for name, value in other.minima.items():
            self.observe_min(name, value)
        for name, value in other.maxima.items():
            self.observe_max(name, value)

    def count_many(self, event: str, n: int) -> None:
        self.counts[event] = self.counts.get(event, 0) + n

    def get(self, event: str) -> int:
        return self.counts.get(event, 0)


TrialFn = Callable[[Generator, Tally], None]


class TrialPool:
    """Executes a trial function over a sample budget with reproducible streams"""

    def __init__(self, workers: int = 1, chunk_size: int = CHUNK_SIZE):
        self.workers = max(1, workers)
        self.chunk_size = chunk_size
        self.lock = threading.Lock()
        self.completed_chunks = 0

    def _run_chunk(self, trial: TrialFn, seed: SeedLike, index: int, size: int) -> Tally:
        rng = make_rng(seed, index)
        tally = Tally()
        for _ in range(size):
            trial(rng, tally)
            tally.trials += 1
        with self.lock:
            self.completed_chunks += 1
        return tally

    def run(self, trial: TrialFn, samples: int, seed: SeedLike) -> Tally:
        """
        Run `samples` trials and return the merged tally

        Args:
            trial: Function drawing one trial from the generator and recording it in the tally
            samples: Number of trials
            seed: Root of the chunk streams
        """
        sizes: List[int] = []
        remaining = samples
        while remaining > 0:
            sizes.append(min(self.chunk_size, remaining))
            remaining -= sizes[-1]

        if self.workers == 1 or len(sizes) == 1:
            tallies = [self._run_chunk(trial, seed, i, size) for i, size in enumerate(sizes)]
        else:
            with ThreadPoolExecutor(max_workers=self.workers) as executor:
                futures = [executor.submit(self._run_chunk, trial, seed, i, size) for i, size in enumerate(sizes)]
                tallies = [future.result() for future in futures]

        total = Tally()
        for tally in tallies:
            total.merge(tally)
        logger.debug(f"Ran {samples} trials in {len(sizes)} chunks on {self.workers} workers")
        return total
