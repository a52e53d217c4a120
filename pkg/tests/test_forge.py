import logging
from dataclasses import replace

import pytest

from core import forge as forge_module
from core.coding import RESET_PATTERN, base_coding
from core.exceptions import EstimationConsistencyError, LevelSearchExhausted, PreconditionError
from core.forge import (
    Estimate,
    ForgeState,
    build_level,
    choose_malicious_bit,
    estimate_event_prob,
    find_level_index,
    forge,
    level_events,
    sample_trial,
    truth_at_stop,
)
from core.predictors import always_stop_rule, constant_predictor, delayed_rule, kt_predictor, parse_predictor
from utils.seeding import make_rng


def test_choose_malicious_bit():
    assert choose_malicious_bit(0.1, 0.1) == (1, "B-")
    assert choose_malicious_bit(0.05, 0.2) == (1, "B-")
    assert choose_malicious_bit(0.2, 0.05) == (0, "B+")


def test_truth_at_stop():
    assert truth_at_stop(0) == 0.0
    assert truth_at_stop(1) == 0.5


def test_sample_trial_with_always_rule():
    rng = make_rng(9)
    e = constant_predictor(0.5)
    started = 0
    for _ in range(400):
        outcome = sample_trial(base_coding(), 2, e, always_stop_rule(), rng)
        if not outcome.started_at_zero:
            assert not outcome.in_A
            continue
        started += 1
        assert outcome.in_A
        assert outcome.h_at_stop == 0.5
        assert outcome.side == "B+"
        assert outcome.bits[:3] == RESET_PATTERN
        assert outcome.hit_time == len(outcome.bits) - 1
        assert outcome.n_at_stop == outcome.hit_time
    assert 60 < started < 140


def test_sample_trial_with_late_rule_never_hits_A():
    rng = make_rng(10)
    for _ in range(200):
        assert not sample_trial(base_coding(), 2, kt_predictor(1), delayed_rule(10 ** 6), rng).in_A


def test_find_level_index_monte_carlo(fast_config):
    n, p_a, used = find_level_index(base_coding(), constant_predictor(0.5), always_stop_rule(), 1, fast_config)
    assert n == 2
    assert p_a.lo > 1 / 8
    assert abs(p_a.est - 0.25) < 0.05
    assert used == fast_config.samples


def test_find_level_index_exact_mode():
    cfg = forge_module.ForgeConfig(seed=1, samples=200, exact_threshold=4, exact_mass_tol=0.05)
    n, p_a, used = find_level_index(base_coding(), constant_predictor(0.5), always_stop_rule(), 1, cfg)
    assert n == 2
    assert used == 0
    assert p_a.hi == 0.25
    assert 0.25 - 0.05 / 4 <= p_a.lo < 0.25
    assert p_a.est == pytest.approx((p_a.lo + p_a.hi) / 2)


def test_exact_mode_falls_back_when_budget_runs_out(caplog):
    cfg = forge_module.ForgeConfig(seed=1, samples=500, exact_threshold=8, exact_mass_tol=0.01, exact_path_budget=10)
    with caplog.at_level(logging.WARNING, logger="core.forge"):
        n, p_a, used = find_level_index(base_coding(), constant_predictor(0.5), always_stop_rule(), 1, cfg)
    assert n == 2
    assert used == 500
    assert "falling back" in caplog.text


def test_find_level_index_exhausts_on_late_rule(fast_config):
    cfg = replace(fast_config, samples=200, n_cap=3)
    with pytest.raises(LevelSearchExhausted) as info:
        find_level_index(base_coding(), kt_predictor(1), delayed_rule(1000), 1, cfg, level=1)
    assert info.value.n_cap == 3
    assert "hypothesis" in str(info.value)


def test_find_level_index_rejects_empty_range(fast_config):
    with pytest.raises(LevelSearchExhausted):
        find_level_index(base_coding(), kt_predictor(1), always_stop_rule(), 5, fast_config)


def test_build_level_against_half(fast_config):
    state = ForgeState()
    record = build_level(state, constant_predictor(0.5), always_stop_rule(), fast_config)
    assert record.j == 1
    assert record.N == 2
    assert record.p_B_minus.est == 0.0
    assert (record.malicious_bit, record.I_side) == (0, "B+")
    assert record.p_I == record.p_B_plus
    assert record.truth_at_stop == 0.0
    assert state.coding.exceptions == ((5, 0),)
    assert state.n_prev == 2


def test_build_level_against_zero(fast_config):
    state = ForgeState()
    record = build_level(state, constant_predictor(0.0), always_stop_rule(), fast_config)
    assert (record.malicious_bit, record.I_side) == (1, "B-")
    assert record.truth_at_stop == 0.5
    assert state.coding == base_coding()


def test_build_level_consistency_fault(fast_config, monkeypatch):
    tiny = Estimate(0.0, 0.0, 0.01)
    monkeypatch.setattr(forge_module, "split_B", lambda *args, **kwargs: (tiny, tiny, 0))
    with pytest.raises(EstimationConsistencyError):
        build_level(ForgeState(), constant_predictor(0.5), always_stop_rule(), fast_config)


def test_forge_two_levels(fast_config):
    result = forge(2, constant_predictor(0.5), always_stop_rule(), fast_config)
    assert [level.N for level in result.levels] == [2, 3]
    assert result.coding.exceptions == ((5, 0), (7, 0))
    assert result.coding_at(0) == base_coding()
    assert result.coding_at(1).exceptions == ((5, 0),)
    assert result.coding_at(2) == result.coding
    assert result.config["predictor"] == "constant:0.5"
    assert result.config["stop_rule"] == "always"


def test_forge_against_kt(fast_config):
    result = forge(2, kt_predictor(2), always_stop_rule(), fast_config)
    previous = 1
    for level in result.levels:
        assert level.N > previous
        previous = level.N
        assert level.p_A.lo > 1 / 8
        assert level.p_I.est >= (level.p_B_plus.est + level.p_B_minus.est) / 2
        assert level.p_I.lo > 1 / 16


def test_forge_is_reproducible_across_worker_counts(fast_config):
    a = forge(1, kt_predictor(2), always_stop_rule(), fast_config)
    b = forge(1, kt_predictor(2), always_stop_rule(), replace(fast_config, workers=3))
    assert a.to_json() == b.to_json()


def test_forge_rejects_zero_levels(fast_config):
    with pytest.raises(PreconditionError):
        forge(0, kt_predictor(2), always_stop_rule(), fast_config)


def test_estimate_event_prob():
    est = estimate_event_prob(lambda rng: rng.random(), lambda x: x < 0.3, 20_000, 0.99, seed=4)
    assert est.lo <= est.est <= est.hi
    assert abs(est.est - 0.3) < 0.02
    with pytest.raises(PreconditionError):
        estimate_event_prob(lambda rng: 0, bool, 50, 0.99, seed=4)


def test_estimate_event_prob_coverage():
    # 90% intervals around a Bernoulli(0.3) frequency, 200 independent experiments
    experiments = 200
    covered = 0
    for seed in range(experiments):
        est = estimate_event_prob(lambda rng: rng.random() < 0.3, bool, 500, 0.9, seed=seed)
        covered += est.lo <= 0.3 <= est.hi
    assert covered >= 0.9 * experiments - 3 * (experiments * 0.9 * 0.1) ** 0.5


@pytest.mark.parametrize("predictor", ["kt:2", "empirical:1", "constant:0.5", "constant:0"])
def test_forged_levels_hold_their_invariants(fast_config, predictor):
    result = forge(2, parse_predictor(predictor), always_stop_rule(), fast_config)
    zero_states = []
    for level in result.levels:
        plus, minus = level.p_B_plus, level.p_B_minus
        # B+ and B- partition A
        slack = level.p_A.half_width + plus.half_width + minus.half_width
        assert abs(plus.est + minus.est - level.p_A.est) <= slack
        # P(A) > 1/8 leaves at least 1/16 on the larger side
        assert level.p_A.lo > 1 / 8
        assert max(plus.lo, minus.lo) > 1 / 16
        assert level.p_I.est == max(plus.est, minus.est)
        assert (level.malicious_bit == 1) == (level.I_side == "B-")
        assert level.truth_at_stop == 0.5 * level.malicious_bit
        if level.malicious_bit == 0:
            zero_states.append(2 * level.N + 1)
    assert result.coding.zero_states == tuple(zero_states)


def test_later_levels_do_not_change_earlier_events(fast_config):
    e = kt_predictor(2)
    r = always_stop_rule()
    result = forge(2, e, r, fast_config)
    for j, level in enumerate(result.levels, start=1):
        final = level_events(result.coding, level.N, e, r, 1000, 99, fast_config)
        at_level = level_events(result.coding_at(j - 1), level.N, e, r, 1000, 99, fast_config)
        assert final == at_level
        rng_final, rng_level = make_rng(5, j), make_rng(5, j)
        for _ in range(300):
            a = sample_trial(result.coding, level.N, e, r, rng_final)
            b = sample_trial(result.coding_at(j - 1), level.N, e, r, rng_level)
            assert a == b
            assert a.bits == b.bits
