"""Monte Carlo trial engine for the SED and Horstein schemes.

Random-number contract
----------------------
Each sweep point ``k`` gets a 128-bit Philox key from
``SeedSequence(seed, spawn_key=(k,))`` (``SeedSequence(seed)`` when no point
is given). Stream ``s`` starts at counter ``[0, 0, 0, s]``:

* stream 0: channel noise, one uniform per channel use;
* stream 1: auxiliary draws (Horstein midpoint coin, or the placement of a
  uniformly drawn true message inside a split group for SED);
* stream 2: the true message index for the Horstein scheme, one per trial.

Trial ``i`` owns positions ``[i*L, (i+1)*L)`` of streams 0 and 1, where the
budget ``L`` (a multiple of 4) depends only on ``(M, epsilon, p)``. A trial
that runs past its budget continues on a private stream at counter
``[0, 0, i, s + 8]``. Hence any trial can be replayed on its own, and sweep
results do not depend on block size or worker count.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .bounds import confirmation_steps, confirmation_threshold, thm2_bound
from .channel import ChannelParams, derive_params
from .firstpassage import delta0_upper_bound

ENCODERS = ("sed", "horstein")
STREAM_NOISE, STREAM_AUX, STREAM_THETA = 0, 1, 2
OVERFLOW_OFFSET = 8
BLOCK_TRIALS = 4096


class MaxStepsExceeded(RuntimeError):
    """A trial hit the step guard before all stopping times fired."""

    def __init__(self, record: "TrialRecord"):
        super().__init__(f"trial stopped at the step guard after {record.steps} steps")
        self.record = record


@dataclass(frozen=True)
class StoppingConfig:
    """``M`` messages, target error ``epsilon`` and a hard step guard."""

    M: int
    epsilon: float
    max_steps: int

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 2:
            raise ValueError(f"need M >= 2 messages, got M={self.M!r}")
        if not 0.0 < self.epsilon < 0.5:
            raise ValueError(f"epsilon must lie in (0, 1/2), got {self.epsilon!r}")
        if int(self.max_steps) != self.max_steps or self.max_steps < 1:
            raise ValueError(f"max_steps must be a positive integer, got {self.max_steps!r}")

    @classmethod
    def default(cls, M: int, epsilon: float, params: ChannelParams,
                max_steps_factor: float = 100.0) -> "StoppingConfig":
        """Guard at ``max_steps_factor`` times the main blocklength bound."""
        guard = math.ceil(max_steps_factor * thm2_bound(M, epsilon, params))
        return cls(int(M), float(epsilon), max(guard, 1))

    @property
    def threshold(self) -> float:
        return confirmation_threshold(self.epsilon)


def draw_budget(M: int, epsilon: float, params: ChannelParams) -> int:
    """Per-trial slice length of the shared streams (a multiple of 4)."""
    n = 4.0 * thm2_bound(M, epsilon, params) + 32.0
    return 4 * math.ceil(n / 4.0)


def point_key(seed: int, point: int | None) -> np.ndarray:
    ss = np.random.SeedSequence(seed) if point is None else np.random.SeedSequence(seed, spawn_key=(point,))
    return ss.generate_state(2, np.uint64)


def _stream(key, counter) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def _block_draws(key, stream: int, first: int, count: int, budget: int) -> np.ndarray:
    bg = np.random.Philox(key=key, counter=[0, 0, 0, stream])
    bg.advance(first * budget // 4)
    return np.random.Generator(bg).random(count * budget).reshape(count, budget)


def _overflow(key, stream: int, trial: int, count: int) -> np.ndarray:
    return _stream(key, [0, 0, trial, stream + OVERFLOW_OFFSET]).random(count)


def _thetas(key, first: int, count: int, M: int) -> np.ndarray:
    start = 4 * (first // 4)
    bg = np.random.Philox(key=key, counter=[0, 0, 0, STREAM_THETA])
    bg.advance(start // 4)
    u = np.random.Generator(bg).random(first + count - start)[first - start:]
    return np.minimum((u * M).astype(np.int64), M - 1)


def _full_row(key, stream, trial, row, max_steps):
    extra = max(max_steps - row.shape[0], 0)
    return np.concatenate([row, _overflow(key, stream, trial, extra)])


@dataclass(frozen=True)
class TrialRecord:
    """Outcome of one transmission.

    Stopping times are ``None`` when the step guard fired first.
    ``u_trace`` holds ``U_theta(0..steps)`` when requested.
    """

    tau: int | None
    tau_theta_eps: int | None
    tau_theta_half: int | None
    tau_star_eps: int | None
    decoded_correctly: bool
    fallback_count: int
    steps: int
    theta: int = 0
    u_trace: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def increment_log(self) -> list[tuple[float, float]] | None:
        """Per-step ``(U_theta(t), U_theta(t+1) - U_theta(t))`` pairs."""
        if self.u_trace is None:
            return None
        u = self.u_trace
        return list(zip(u[:-1].tolist(), np.diff(u).tolist()))


def _opt(v) -> int | None:
    return None if v < 0 else int(v)


def _record(out, theta=0, trace=None) -> TrialRecord:
    return TrialRecord(
        tau=_opt(out[K.I_TAU]),
        tau_theta_eps=_opt(out[K.I_TAU_EPS]),
        tau_theta_half=_opt(out[K.I_TAU_HALF]),
        tau_star_eps=_opt(out[K.I_TAU_STAR]),
        decoded_correctly=bool(out[K.I_CORRECT] == 1),
        fallback_count=int(out[K.I_FALLBACKS]),
        steps=int(out[K.I_STEPS]),
        theta=int(theta),
        u_trace=trace,
    )


def _check_encoder(kind: str) -> str:
    kind = kind.lower()
    if kind not in ENCODERS:
        raise ValueError(f"encoder must be one of {ENCODERS}, got {kind!r}")
    return kind


def _default_uniform(kind: str, uniform_theta: bool | None) -> bool:
    # SED outcomes do not depend on which message is sent; Horstein's do
    return (kind == "horstein") if uniform_theta is None else bool(uniform_theta)


def run_trial(config: StoppingConfig, params: ChannelParams, encoder_kind: str = "sed",
              seed: int = 0, *, point: int | None = None, trial_index: int = 0,
              uniform_theta: bool | None = None, record_increments: bool = False) -> TrialRecord:
    """Simulate one transmission until tau, tau_theta(eps) and tau* have fired.

    With ``point`` and ``trial_index`` set this replays trial ``trial_index``
    of the sweep point ``point`` run with the same master ``seed``.

    Raises
    ------
    MaxStepsExceeded
        If ``config.max_steps`` channel uses pass first; carries the partial record.
    """
    kind = _check_encoder(encoder_kind)
    uniform = _default_uniform(kind, uniform_theta)
    M, eps, max_steps = config.M, config.epsilon, config.max_steps
    key = point_key(seed, point)
    budget = draw_budget(M, eps, params)
    noise = _full_row(key, STREAM_NOISE, trial_index,
                      _block_draws(key, STREAM_NOISE, trial_index, 1, budget)[0], max_steps)
    aux = _full_row(key, STREAM_AUX, trial_index,
                    _block_draws(key, STREAM_AUX, trial_index, 1, budget)[0], max_steps)
    b = config.threshold
    n_star = confirmation_steps(eps, params)
    out = np.zeros(K.N_INT, dtype=np.int64)
    stats = np.zeros(K.N_STATS)
    trace = np.zeros(max_steps + 1) if record_increments else np.empty(0)
    theta = 0
    if kind == "sed":
        cap = max_steps + 3
        pw = K.weight_table(params.C2, cap)
        bufs = [np.zeros(cap, dtype=np.int64) for _ in range(4)]
        K.sed_trial(M, params.C2, params.p, b, n_star, max_steps, noise, aux, uniform,
                    pw, *bufs, out, stats, trace)
    else:
        theta = int(_thetas(key, trial_index, 1, M)[0]) if uniform else 0
        K.horstein_trial(M, params.C2, params.p, b, n_star, max_steps, noise, aux, theta,
                         np.empty(M), np.empty(M), out, stats, trace)
    rec = _record(out, theta, trace[: out[K.I_STEPS] + 1].copy() if record_increments else None)
    if out[K.I_STATUS] == K.STATUS_MAX_STEPS:
        raise MaxStepsExceeded(rec)
    return rec


# -- batched runs ----------------------------------------------------------

@dataclass(frozen=True)
class _Job:
    kind: str
    M: int
    p: float
    epsilon: float
    max_steps: int
    uniform: bool
    key: tuple[int, int]
    first: int
    count: int


def _run_job(job: _Job):
    params = derive_params(job.p)
    key = np.array(job.key, dtype=np.uint64)
    budget = draw_budget(job.M, job.epsilon, params)
    b = confirmation_threshold(job.epsilon)
    n_star = confirmation_steps(job.epsilon, params)
    noise = _block_draws(key, STREAM_NOISE, job.first, job.count, budget)
    aux = _block_draws(key, STREAM_AUX, job.first, job.count, budget)
    out = np.zeros((job.count, K.N_INT), dtype=np.int64)
    stats = np.zeros((job.count, K.N_STATS))
    thetas = np.zeros(job.count, dtype=np.int64)
    args = (job.M, params.C2, params.p, b, n_star, job.max_steps)
    if job.kind == "sed":
        K.sed_block(*args, noise, aux, job.uniform, out, stats)
    else:
        if job.uniform:
            thetas = _thetas(key, job.first, job.count, job.M)
        K.horstein_block(*args, noise, aux, thetas, out, stats)
    # rerun the rare trials that outgrew their slice with the overflow streams
    for j in np.flatnonzero(out[:, K.I_STATUS] == K.STATUS_NEED_DRAWS):
        i = job.first + int(j)
        nz = _full_row(key, STREAM_NOISE, i, noise[j], job.max_steps)[None, :]
        ax = _full_row(key, STREAM_AUX, i, aux[j], job.max_steps)[None, :]
        if job.kind == "sed":
            K.sed_block(*args, nz, ax, job.uniform, out[j:j + 1], stats[j:j + 1])
        else:
            K.horstein_block(*args, nz, ax, thetas[j:j + 1], out[j:j + 1], stats[j:j + 1])
    return out, stats


def _run_point(kind, M, p, epsilon, max_steps, uniform, key, trials, workers, pool=None):
    jobs = [
        _Job(kind, M, p, epsilon, max_steps, uniform, (int(key[0]), int(key[1])),
             first, min(BLOCK_TRIALS, trials - first))
        for first in range(0, trials, BLOCK_TRIALS)
    ]
    results = list(pool.map(_run_job, jobs)) if pool is not None else [_run_job(j) for j in jobs]
    out = np.concatenate([r[0] for r in results])
    stats = np.concatenate([r[1] for r in results])
    return out, stats


# -- aggregation -------------------------------------------------------------

def wilson_interval(errors: int, n: int, z: float = 1.0) -> tuple[float, float, float]:
    """Wilson score interval ``(low, high, half_width)`` for a binomial rate.

    The default ``z = 1`` gives a one-sigma interval.
    """
    if n == 0:
        return 0.0, 1.0, 0.5
    ph = errors / n
    z2 = z * z
    denom = 1.0 + z2 / n
    centre = (ph + z2 / (2 * n)) / denom
    half = z / denom * math.sqrt(ph * (1 - ph) / n + z2 / (4 * n * n))
    return max(centre - half, 0.0), min(centre + half, 1.0), half


def cluster_mean(sums: np.ndarray, counts: np.ndarray) -> tuple[float, float]:
    """Ratio estimate ``sum(sums)/sum(counts)`` with a trial-clustered stderr.

    Steps within one trial are dependent, so the trial is the sampling unit.
    """
    total = counts.sum()
    if total == 0:
        return math.nan, math.nan
    m = sums.sum() / total
    n = sums.shape[0]
    if n < 2:
        return float(m), math.nan
    resid = sums - m * counts
    var = n / (n - 1) * np.sum(resid * resid) / (total * total)
    return float(m), float(math.sqrt(var))


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    if x.size == 0:
        return math.nan, math.nan
    if x.size == 1:
        return float(x[0]), math.nan
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


@dataclass(frozen=True)
class AggregateStats:
    """Monte Carlo summary for one ``(M, p, epsilon)`` point.

    Means of stopping times are taken over trials that finished before the
    step guard; ``max_steps_exceeded`` counts the others. ``pe`` is the
    fraction of finished trials decoded wrongly, with a one-sigma Wilson
    interval. ``rate`` is ``log M / mean_tau``.
    """

    k: float
    M: int
    p: float
    epsilon: float
    encoder: str
    trials: int
    seed: int
    point: int | None
    completed: int
    max_steps_exceeded: int
    mean_tau: float
    stderr_tau: float
    mean_tau_theta_eps: float
    stderr_tau_theta_eps: float
    mean_tau_theta_half: float
    stderr_tau_theta_half: float
    mean_tau_star: float
    stderr_tau_star: float
    errors: int
    pe: float
    pe_wilson_low: float
    pe_wilson_high: float
    pe_wilson_halfwidth: float
    rate: float
    fallback_rate: float
    mean_du_comm: float
    stderr_du_comm: float
    mean_du_conf: float
    stderr_du_conf: float
    ordering_violations: int
    step_violations: int
    sed_violations: int
    max_abs_du_ratio: float
    total_steps: int


def _aggregate(out, stats, *, M, p, epsilon, kind, seed, point) -> AggregateStats:
    done = out[:, K.I_STATUS] == K.STATUS_DONE
    o = out[done]
    mt, st = _mean_se(o[:, K.I_TAU].astype(float))
    me, se = _mean_se(o[:, K.I_TAU_EPS].astype(float))
    mh, sh = _mean_se(o[:, K.I_TAU_HALF].astype(float))
    ms, ss = _mean_se(o[:, K.I_TAU_STAR].astype(float))
    n_done = int(done.sum())
    errors = int(n_done - o[:, K.I_CORRECT].sum())
    lo, hi, hw = wilson_interval(errors, n_done)
    order_bad = int(np.sum(
        (o[:, K.I_TAU] > o[:, K.I_TAU_EPS])
        | (o[:, K.I_TAU_EPS] > o[:, K.I_TAU_STAR])
        | (o[:, K.I_TAU_HALF] > o[:, K.I_TAU_EPS])
    ))
    mc, sc = cluster_mean(stats[:, K.S_SUM_COMM], stats[:, K.S_N_COMM])
    mf, sf = cluster_mean(stats[:, K.S_SUM_CONF], stats[:, K.S_N_CONF])
    return AggregateStats(
        k=math.log2(M), M=M, p=p, epsilon=epsilon, encoder=kind,
        trials=int(out.shape[0]), seed=int(seed), point=point,
        completed=n_done, max_steps_exceeded=int(out.shape[0] - n_done),
        mean_tau=mt, stderr_tau=st,
        mean_tau_theta_eps=me, stderr_tau_theta_eps=se,
        mean_tau_theta_half=mh, stderr_tau_theta_half=sh,
        mean_tau_star=ms, stderr_tau_star=ss,
        errors=errors, pe=errors / n_done if n_done else math.nan,
        pe_wilson_low=lo, pe_wilson_high=hi, pe_wilson_halfwidth=hw,
        rate=math.log2(M) / mt if n_done else math.nan,
        fallback_rate=float(o[:, K.I_FALLBACKS].mean()) if n_done else math.nan,
        mean_du_comm=mc, stderr_du_comm=sc, mean_du_conf=mf, stderr_du_conf=sf,
        ordering_violations=order_bad,
        step_violations=int(stats[:, K.S_N_STEP_VIOLATIONS].sum()),
        sed_violations=int(stats[:, K.S_N_SED_VIOLATIONS].sum()),
        max_abs_du_ratio=float(stats[:, K.S_MAX_ABS_RATIO].max()),
        total_steps=int(out[:, K.I_STEPS].sum()),
    )


def _pool(workers: int):
    return ProcessPoolExecutor(max_workers=workers) if workers and workers > 1 else None


def run_sweep(k_values, p: float, epsilon: float, trials_per_point: int, seed: int, *,
              encoder: str = "sed", workers: int = 1, max_steps_factor: float = 100.0,
              uniform_theta: bool | None = None) -> list[AggregateStats]:
    """Simulate ``M = 2**k`` for each ``k`` and summarize each point.

    The point key is ``k`` itself, so a given ``k`` yields the same numbers
    whatever grid it appears in. Results do not depend on ``workers``.
    """
    kind = _check_encoder(encoder)
    uniform = _default_uniform(kind, uniform_theta)
    params = derive_params(p)
    ks = [int(k) for k in k_values]
    if any(k < 1 for k in ks):
        raise ValueError("every k must be at least 1")
    if trials_per_point < 1:
        raise ValueError("need at least one trial per point")
    if kind == "horstein" and any(k > 16 for k in ks):
        raise ValueError("the dense Horstein baseline is limited to k <= 16")
    pool = _pool(workers)
    try:
        rows = []
        for k in ks:
            M = 2 ** k
            cfg = StoppingConfig.default(M, epsilon, params, max_steps_factor)
            key = point_key(seed, k)
            out, stats = _run_point(kind, M, params.p, epsilon, cfg.max_steps, uniform,
                                    key, trials_per_point, workers, pool)
            rows.append(_aggregate(out, stats, M=M, p=params.p, epsilon=epsilon,
                                   kind=kind, seed=seed, point=k))
        return rows
    finally:
        if pool is not None:
            pool.shutdown()


# -- lemma verification ------------------------------------------------------

@dataclass(frozen=True)
class LemmaReport:
    """Increment statistics of ``U_theta`` split by regime.

    ``conf_plus`` and ``conf_minus`` count confirmation steps of exactly
    ``+C2`` and ``-C2``; ``conf_other`` counts any other value. Means carry
    trial-clustered standard errors.
    """

    M: int
    p: float
    epsilon: float
    trials: int
    seed: int
    C: float
    C1: float
    C2: float
    steps: int
    comm_steps: int
    conf_steps: int
    mean_du_comm: float
    stderr_du_comm: float
    mean_du_conf: float
    stderr_du_conf: float
    mean_du: float
    stderr_du: float
    conf_plus: int
    conf_minus: int
    conf_other: int
    step_violations: int
    sed_violations: int
    max_abs_du_ratio: float
    ordering_violations: int
    max_steps_exceeded: int
    excursions: int
    mean_excursion: float
    stderr_excursion: float
    delta0_bound: float


def verify_lemma1(config: StoppingConfig, params: ChannelParams, trials: int, seed: int = 0,
                  *, workers: int = 1, uniform_theta: bool = False) -> LemmaReport:
    """Collect ``U_theta`` increment statistics over SED trials.

    This is a report; :func:`evaluate_lemmas` applies the thresholds.
    """
    key = point_key(seed, None)
    pool = _pool(workers)
    try:
        out, stats = _run_point("sed", config.M, params.p, config.epsilon, config.max_steps,
                                uniform_theta, key, trials, workers, pool)
    finally:
        if pool is not None:
            pool.shutdown()
    agg = _aggregate(out, stats, M=config.M, p=params.p, epsilon=config.epsilon,
                     kind="sed", seed=seed, point=None)
    md, sd = cluster_mean(stats[:, K.S_SUM_COMM] + stats[:, K.S_SUM_CONF],
                          stats[:, K.S_N_COMM] + stats[:, K.S_N_CONF])
    mx, sx = cluster_mean(stats[:, K.S_EXC_STEPS], stats[:, K.S_N_EXC])
    return LemmaReport(
        M=config.M, p=params.p, epsilon=config.epsilon, trials=trials, seed=seed,
        C=params.C, C1=params.C1, C2=params.C2,
        steps=int(stats[:, K.S_N_COMM].sum() + stats[:, K.S_N_CONF].sum()),
        comm_steps=int(stats[:, K.S_N_COMM].sum()),
        conf_steps=int(stats[:, K.S_N_CONF].sum()),
        mean_du_comm=agg.mean_du_comm, stderr_du_comm=agg.stderr_du_comm,
        mean_du_conf=agg.mean_du_conf, stderr_du_conf=agg.stderr_du_conf,
        mean_du=md, stderr_du=sd,
        conf_plus=int(stats[:, K.S_N_CONF_PLUS].sum()),
        conf_minus=int(stats[:, K.S_N_CONF_MINUS].sum()),
        conf_other=int(stats[:, K.S_N_CONF_OTHER].sum()),
        step_violations=agg.step_violations,
        sed_violations=agg.sed_violations,
        max_abs_du_ratio=agg.max_abs_du_ratio,
        ordering_violations=agg.ordering_violations,
        max_steps_exceeded=agg.max_steps_exceeded,
        excursions=int(stats[:, K.S_N_EXC].sum()),
        mean_excursion=mx, stderr_excursion=sx,
        delta0_bound=delta0_upper_bound(params),
    )


@dataclass(frozen=True)
class LemmaCheck:
    name: str
    passed: bool
    measured: float
    threshold: float
    hard: bool


def evaluate_lemmas(report: LemmaReport, n_sigma: float = 3.0) -> list[LemmaCheck]:
    """Turn a :class:`LemmaReport` into pass/fail checks.

    Hard checks are exact invariants (bounded steps, stopping-time order,
    confirmation steps of exactly +-C2); the rest are statistical.
    """
    r = report
    q, p = 1.0 - r.p, r.p
    checks = [
        LemmaCheck("bounded_step", r.step_violations == 0, r.max_abs_du_ratio, 1.0, True),
        LemmaCheck("sed_condition", r.sed_violations == 0, r.sed_violations, 0, True),
        LemmaCheck("stopping_time_order", r.ordering_violations == 0, r.ordering_violations, 0, True),
        LemmaCheck("confirmation_steps_are_pm_C2", r.conf_other == 0, r.conf_other, 0, True),
        LemmaCheck("no_step_guard_hits", r.max_steps_exceeded == 0, r.max_steps_exceeded, 0, True),
    ]
    n = r.conf_steps
    if n:
        freq = r.conf_plus / n
        sigma = math.sqrt(p * q / n)
        checks.append(LemmaCheck("confirmation_up_frequency", abs(freq - q) <= n_sigma * sigma,
                                 freq, q, False))
        checks.append(LemmaCheck(
            "confirmation_mean_is_C1",
            abs(r.mean_du_conf - r.C1) <= n_sigma * r.stderr_du_conf,
            r.mean_du_conf, r.C1, False))
    if r.comm_steps:
        checks.append(LemmaCheck(
            "communication_mean_at_least_C",
            r.mean_du_comm >= r.C - n_sigma * r.stderr_du_comm,
            r.mean_du_comm, r.C, False))
    checks.append(LemmaCheck(
        "unconditional_mean_at_least_C",
        r.mean_du >= r.C - n_sigma * r.stderr_du, r.mean_du, r.C, False))
    checks.append(LemmaCheck(
        "unconditional_mean_at_most_C1",
        r.mean_du <= r.C1 + n_sigma * r.stderr_du, r.mean_du, r.C1, False))
    if r.excursions:
        checks.append(LemmaCheck(
            "fallback_excursion_within_delta0_bound",
            r.mean_excursion <= r.delta0_bound + n_sigma * r.stderr_excursion,
            r.mean_excursion, r.delta0_bound, False))
    return checks
