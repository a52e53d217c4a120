import pytest

from core.trial_pool import Tally, TrialPool
from utils.stats import wilson_interval


def _trial(rng, tally):
    x = rng.random()
    tally.count("low", x < 0.3)
    tally.observe_min("x", x)
    tally.observe_max("x", x)


def test_results_do_not_depend_on_workers():
    serial = TrialPool(workers=1, chunk_size=700).run(_trial, 5000, 42)
    threaded = TrialPool(workers=4, chunk_size=700).run(_trial, 5000, 42)
    assert serial == threaded
    assert serial.trials == 5000


def test_seeds_change_results():
    a = TrialPool(chunk_size=500).run(_trial, 2000, 1)
    b = TrialPool(chunk_size=500).run(_trial, 2000, 2)
    assert a.minima != b.minima


def test_chunk_count():
    pool = TrialPool(workers=2, chunk_size=300)
    pool.run(_trial, 1000, 3)
    assert pool.completed_chunks == 4


def test_merge():
    a = Tally(trials=2, counts={"A": 1}, minima={"g": 0.5})
    b = Tally(trials=3, counts={"A": 2, "B": 1}, minima={"g": 0.25}, maxima={"e": 0.1})
    a.merge(b)
    assert a.trials == 5
    assert a.get("A") == 3
    assert a.get("B") == 1
    assert a.get("C") == 0
    assert a.minima["g"] == 0.25
    assert a.maxima["e"] == 0.1


def test_wilson_interval():
    lo, hi = wilson_interval(50, 100, 0.95)
    assert lo < 0.5 < hi
    assert hi - 0.5 == pytest.approx(0.5 - lo)
    assert wilson_interval(0, 100, 0.99)[0] == pytest.approx(0.0, abs=1e-12)
    assert wilson_interval(100, 100, 0.99)[1] == pytest.approx(1.0, abs=1e-12)
    narrow = wilson_interval(5000, 10000, 0.95)
    assert narrow[1] - narrow[0] < hi - lo
    with pytest.raises(ValueError):
        wilson_interval(3, 0, 0.95)
