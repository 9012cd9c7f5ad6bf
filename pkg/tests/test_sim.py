import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bscfeedback import _kernels as K
from bscfeedback import sim
from bscfeedback.bounds import confirmation_steps, confirmation_threshold
from bscfeedback.channel import derive_params
from bscfeedback.sim import (
    MaxStepsExceeded,
    StoppingConfig,
    cluster_mean,
    evaluate_lemmas,
    run_sweep,
    run_trial,
    verify_lemma1,
    wilson_interval,
)

P05 = derive_params(0.05)


def sweep_rows(k, trials, seed, kind="sed", uniform=False):
    M = 2**k
    cfg = StoppingConfig.default(M, 1e-3, P05)
    out, _ = sim._run_point(kind, M, P05.p, 1e-3, cfg.max_steps, uniform,
                            sim.point_key(seed, k), trials, 1)
    return cfg, out


def test_config_validation():
    with pytest.raises(ValueError):
        StoppingConfig(1, 1e-3, 10)
    with pytest.raises(ValueError):
        StoppingConfig(4, 0.5, 10)
    with pytest.raises(ValueError):
        StoppingConfig(4, 1e-3, 0)
    cfg = StoppingConfig.default(1024, 1e-3, P05)
    assert cfg.max_steps == math.ceil(100 * 23.270856977699264)


def test_nearly_noiseless_two_messages_stop_after_one_use():
    # one clean bit moves U by C2 ~ 19.9 > log(99), so tau = 1
    params = derive_params(1e-6)
    cfg = StoppingConfig.default(2, 0.01, params)
    stats = run_sweep([1], 1e-6, 0.01, 2000, seed=4)[0]
    assert stats.mean_tau == 1.0
    rec = run_trial(cfg, params, "sed", seed=9)
    assert rec.tau == rec.tau_theta_eps == rec.tau_star_eps == 1
    assert rec.decoded_correctly


@pytest.mark.parametrize("kind", ["sed", "horstein"])
@pytest.mark.parametrize("k", [3, 8])
def test_replay_matches_sweep_trial(kind, k):
    cfg, out = sweep_rows(k, 600, seed=31, kind=kind, uniform=(kind == "horstein"))
    for i in (0, 1, 5, 257, 599):
        rec = run_trial(cfg, P05, kind, seed=31, point=k, trial_index=i)
        row = out[i]
        assert (rec.tau, rec.tau_theta_eps, rec.tau_theta_half, rec.tau_star_eps) == tuple(
            int(v) for v in row[[K.I_TAU, K.I_TAU_EPS, K.I_TAU_HALF, K.I_TAU_STAR]])
        assert rec.fallback_count == row[K.I_FALLBACKS]
        assert rec.decoded_correctly == bool(row[K.I_CORRECT])


def test_overflow_streams_are_used_consistently(monkeypatch):
    # a tiny slice forces every trial onto its private overflow stream
    monkeypatch.setattr(sim, "draw_budget", lambda M, eps, params: 4)
    cfg, out = sweep_rows(6, 50, seed=8)
    assert np.all(out[:, K.I_STATUS] == K.STATUS_DONE)
    for i in (0, 17, 49):
        rec = run_trial(cfg, P05, "sed", seed=8, point=6, trial_index=i)
        assert rec.tau_star_eps == out[i, K.I_TAU_STAR]
        assert rec.steps == out[i, K.I_STEPS]


def test_step_guard_raises_with_partial_record():
    cfg = StoppingConfig(1024, 1e-3, 3)
    with pytest.raises(MaxStepsExceeded) as info:
        run_trial(cfg, P05, "sed", seed=1)
    rec = info.value.record
    assert rec.steps == 3 and rec.tau is None and rec.tau_star_eps is None
    stats = run_sweep([10], 0.05, 1e-3, 200, seed=1, max_steps_factor=0.1)[0]
    assert stats.max_steps_exceeded == 200 and stats.completed == 0


@settings(max_examples=25)
@given(st.integers(1, 14), st.integers(0, 2**63 - 1), st.sampled_from(["sed", "horstein"]))
def test_trial_invariants(k, seed, kind):
    if kind == "horstein" and k > 8:
        k = 8
    cfg = StoppingConfig.default(2**k, 1e-3, P05)
    rec = run_trial(cfg, P05, kind, seed=seed, record_increments=True)
    assert rec.tau <= rec.tau_theta_eps <= rec.tau_star_eps
    assert rec.tau_theta_half <= rec.tau_theta_eps
    u = rec.u_trace
    n = confirmation_steps(1e-3, P05)
    b = confirmation_threshold(1e-3)
    du = np.diff(u)
    assert np.all(np.abs(du) <= P05.C2 * (1 + 1e-9))
    # tau_theta(1/2), tau_theta(eps) and tau* are first crossings of the trace
    assert rec.tau_theta_half == int(np.argmax(u >= 0))
    assert rec.tau_theta_eps == int(np.argmax(u >= b - 1e-9))
    ratio = u / P05.C2
    assert ratio[rec.tau_star_eps] >= n - 1e-9
    assert np.all(ratio[: rec.tau_star_eps] < n + 1e-9)
    falls = int(np.sum((u[:-1] >= 0) & (u[1:] < 0)))
    assert rec.fallback_count == falls
    log = rec.increment_log
    assert len(log) == rec.steps and log[0][0] == u[0]


def test_sweep_is_deterministic_and_grid_independent():
    a = run_sweep([3, 5], 0.05, 1e-3, 3000, seed=77)
    b = run_sweep([5, 3], 0.05, 1e-3, 3000, seed=77)
    assert a[0] == b[1] and a[1] == b[0]
    c = run_sweep([3], 0.05, 1e-3, 3000, seed=78)
    assert c[0] != a[0]


@pytest.mark.slow
def test_worker_count_does_not_change_results(monkeypatch):
    monkeypatch.setattr(sim, "BLOCK_TRIALS", 500)
    one = run_sweep([4], 0.05, 1e-3, 2000, seed=5, workers=1)
    two = run_sweep([4], 0.05, 1e-3, 2000, seed=5, workers=2)
    assert one == two


def test_block_size_does_not_change_results(monkeypatch):
    base = run_sweep([6], 0.05, 1e-3, 1500, seed=6)
    monkeypatch.setattr(sim, "BLOCK_TRIALS", 97)
    assert run_sweep([6], 0.05, 1e-3, 1500, seed=6) == base


def test_stderr_scales_with_root_trials():
    se = [run_sweep([4], 0.05, 1e-3, n, seed=21)[0].stderr_tau for n in (1000, 10_000, 100_000)]
    assert se[0] / se[1] == pytest.approx(math.sqrt(10), rel=0.25)
    assert se[1] / se[2] == pytest.approx(math.sqrt(10), rel=0.25)


def test_fixed_and_uniform_theta_agree_on_mean_tau():
    fixed = run_sweep([5], 0.05, 1e-3, 60_000, seed=2, uniform_theta=False)[0]
    unif = run_sweep([5], 0.05, 1e-3, 60_000, seed=3, uniform_theta=True)[0]
    se = math.hypot(fixed.stderr_tau, unif.stderr_tau)
    assert abs(fixed.mean_tau - unif.mean_tau) <= 4 * se


def test_sed_not_slower_than_horstein_at_k10():
    sed = run_sweep([10], 0.05, 1e-3, 3000, seed=1)[0]
    hor = run_sweep([10], 0.05, 1e-3, 3000, seed=1, encoder="horstein")[0]
    assert sed.mean_tau <= hor.mean_tau + 3 * math.hypot(sed.stderr_tau, hor.stderr_tau)


def test_rate_and_error_fields():
    s = run_sweep([8], 0.05, 1e-3, 20_000, seed=12)[0]
    assert s.rate == pytest.approx(8 / s.mean_tau)
    assert s.pe == s.errors / s.completed
    assert s.pe <= 1e-3 + 3 * s.pe_wilson_halfwidth
    assert s.ordering_violations == s.step_violations == s.sed_violations == 0


def test_lemma_report_checks_pass_at_small_scale():
    cfg = StoppingConfig.default(2**8, 1e-3, P05)
    rep = verify_lemma1(cfg, P05, 20_000, seed=3)
    assert rep.steps == rep.comm_steps + rep.conf_steps
    assert rep.conf_plus + rep.conf_minus + rep.conf_other == rep.conf_steps
    checks = {c.name: c for c in evaluate_lemmas(rep)}
    assert all(c.passed for c in checks.values()), [c for c in checks.values() if not c.passed]
    assert checks["bounded_step"].hard


@given(st.integers(0, 500), st.integers(1, 500), st.sampled_from([1.0, 1.96, 3.0]))
def test_wilson_endpoints_solve_score_equation(errors, extra, z):
    n = errors + extra
    lo, hi, half = wilson_interval(errors, n, z)
    ph = errors / n
    # endpoints are the roots of (ph - x)^2 = z^2 x (1 - x) / n
    for x in (lo, hi):
        if 0 < x < 1:
            assert (ph - x) ** 2 == pytest.approx(z * z * x * (1 - x) / n, rel=1e-9, abs=1e-15)
    assert hi - lo == pytest.approx(2 * half, abs=1e-15) or lo == 0.0 or hi == 1.0


def test_cluster_mean_reduces_to_plain_mean():
    x = np.random.default_rng(0).normal(size=400)
    m, se = cluster_mean(x, np.ones_like(x))
    assert m == pytest.approx(x.mean())
    assert se == pytest.approx(x.std(ddof=1) / math.sqrt(x.size), rel=1e-12)


def test_bad_encoder_and_grid():
    with pytest.raises(ValueError):
        run_sweep([3], 0.05, 1e-3, 10, seed=0, encoder="maxejs")
    with pytest.raises(ValueError):
        run_sweep([0], 0.05, 1e-3, 10, seed=0)
    with pytest.raises(ValueError):
        run_sweep([20], 0.05, 1e-3, 10, seed=0, encoder="horstein")
