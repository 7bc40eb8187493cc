import logging

import numpy as np
import pytest

from ldp_core.audit import measure_alpha_obs
from ldp_core.config import approx_sandwich_c
from ldp_core.core_approx import ApproxServer, build_schedule, run_approx_core
from ldp_core.core_exact import run_exact_core, upper_set_min_degrees
from ldp_core.errors import InvalidInputError
from ldp_core.generators import gen_gnp
from ldp_core.graph_core import exact_coreness
from ldp_core.local_sim import RunConfig

from .conftest import connected_gnp


def test_schedule_for_nine_vertices():
    s = build_schedule(9, 1.0)
    assert (s.Phi, s.R) == (3, 4)
    assert s.thresholds == (3.0, 9.0, 27.0)
    assert s.labels == s.thresholds
    assert s.total_rounds == 12
    assert s.final_label == 27.0
    assert [s.phase_of(t) for t in (1, 4, 5, 12)] == [1, 1, 2, 3]


def test_schedule_previous_label_rule_and_override():
    s = build_schedule(9, 1.0, phase_rounds=2, label_rule='previous')
    assert s.labels == (1.0, 3.0, 9.0)
    assert s.R == 2


@pytest.mark.parametrize('n, eta, phase_rounds, rule', [
    (1, 1.0, None, 'threshold'),
    (8, 0.0, None, 'threshold'),
    (8, 1.0, 0, 'threshold'),
    (8, 1.0, None, 'floor'),
])
def test_schedule_validation(n, eta, phase_rounds, rule):
    with pytest.raises(InvalidInputError):
        build_schedule(n, eta, phase_rounds, rule)


def test_k4_zero_noise(k4):
    est, tr = run_approx_core(k4, RunConfig(epsilon=1.0, eta=1.0, noise='disabled'))
    assert len(tr) == 1
    assert est.values == (3.0,) * 4
    assert est.phase == (1,) * 4


def test_previous_label_rule_underestimates_k4(k4):
    est, _ = run_approx_core(k4, RunConfig(epsilon=1.0, eta=1.0, noise='disabled', label_rule='previous'))
    assert est.values == (1.0,) * 4


def test_approx_requires_eta(k4):
    with pytest.raises(InvalidInputError):
        run_approx_core(k4, RunConfig(epsilon=1.0))


def _check_sandwich(g, eta, phase_rounds=None):
    cfg = RunConfig(epsilon=1.0, eta=eta, noise='disabled', phase_rounds=phase_rounds)
    est, tr = run_approx_core(g, cfg)
    schedule = build_schedule(max(2, g.n), eta, phase_rounds=phase_rounds)
    c = approx_sandwich_c(eta)
    core = exact_coreness(g)
    for v in range(g.n):
        assert core[v] <= est.values[v] <= (2 + eta) * core[v] + c
        assert est.values[v] in schedule.labels
        assert schedule.labels[est.phase[v] - 1] == est.values[v]
    # G[{u : k~(u) >= k}] is a witness for every estimate k
    for value, low in upper_set_min_degrees(g, est).items():
        assert low >= value / (2 + eta) - c
    assert len(tr) <= schedule.total_rounds


@pytest.mark.parametrize('eta', [0.5, 1.0])
def test_zero_noise_sandwich_full_phases(eta):
    for seed in range(12):
        n = 8 + 5 * seed
        _check_sandwich(connected_gnp(n, 0.15, seed), eta, phase_rounds=n)


@pytest.mark.parametrize('eta', [0.5, 1.0])
def test_zero_noise_sandwich_default_schedule(eta):
    for seed in range(25):
        n = 16 + (seed * 37) % 241
        _check_sandwich(connected_gnp(n, 6 / n, seed), eta)


@pytest.mark.slow
@pytest.mark.parametrize('eta', [0.5, 1.0])
def test_zero_noise_sandwich_at_scale(eta):
    for seed in range(100):
        n = 16 + (seed * 37) % 497
        g = connected_gnp(n, 6 / n, seed)
        _check_sandwich(g, eta)
        _check_sandwich(g, eta, phase_rounds=n)


@pytest.mark.slow
def test_approx_alpha_below_exact_alpha():
    g = gen_gnp(4096, 8 / 4095, 17)
    approx_alpha, exact_alpha = [], []
    for seed in range(3):
        cfg = RunConfig(epsilon=1.0, eta=1.0, seed=seed)
        _, tr = run_approx_core(g, cfg)
        approx_alpha.append(measure_alpha_obs(tr, g))
        _, tr = run_exact_core(g, cfg)
        exact_alpha.append(measure_alpha_obs(tr, g))
    assert np.median(approx_alpha) < np.median(exact_alpha)


@pytest.mark.parametrize('memory', ['memoryful', 'memoryless'])
def test_noisy_runs_stay_within_round_budget(memory):
    g = connected_gnp(48, 0.2, 5)
    cfg = RunConfig(epsilon=1.0, eta=1.0, seed=12, memory_mode=memory)
    est, tr = run_approx_core(g, cfg)
    assert len(tr) <= build_schedule(48, 1.0).total_rounds
    assert all(p >= 1 for p in est.phase)


def test_memory_modes_agree_on_approx_runs():
    g = connected_gnp(40, 0.2, 6)
    cfg = RunConfig(epsilon=2.0, eta=0.5, seed=3)
    est_a, tr_a = run_approx_core(g, cfg)
    est_b, tr_b = run_approx_core(g, cfg._replace(memory_mode='memoryless'))
    assert tr_a.public_view() == tr_b.public_view()
    assert est_a == est_b


def test_leftovers_get_final_label(k4, caplog):
    schedule = build_schedule(4, 1.0, phase_rounds=1)
    server = ApproxServer(k4, schedule)
    last = schedule.total_rounds
    with caplog.at_level(logging.WARNING, logger='ldp_core.core_approx'):
        S, done = server.step(last, {v: 1e9 for v in range(4)})
    assert done
    assert S == frozenset(range(4))
    est = server.output()
    assert est.values == (schedule.final_label,) * 4
    assert est.phase == (schedule.Phi,) * 4
    assert 'survived all' in caplog.text
