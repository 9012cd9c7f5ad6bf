"""Expected first-passage times of the generalized birth-death chain.

States ``S_0 .. S_{n-1}`` move right with probability ``q = 1 - p`` and left
with probability ``p``; ``S_n`` is absorbing. Every transition costs one
unit except the left move out of ``S_0``, a self-loop that costs ``delta0``.
Node equations::

    V_{n-1} = 1 + p V_{n-2}
    V_i     = 1 + p V_{i-1} + q V_{i+1}        (0 < i < n-1)
    V_0     = q + p V_0 + q V_1 + p delta0

Two independent solvers are provided, plus a Monte Carlo estimate. Passing
``exact=True`` runs the analytic solvers in rational arithmetic, which keeps
comparisons honest when ``1/(1 - 2p)`` is large.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .channel import ChannelParams


@dataclass(frozen=True)
class FirstPassageSpec:
    """Chain with ``n`` transient states, left probability ``p`` and self-loop weight ``delta0``."""

    n: int
    p: float
    delta0: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        if not 0 < self.p < Fraction(1, 2):
            raise ValueError(f"p must lie in (0, 1/2), got {self.p!r}")
        if not (self.delta0 >= 0 and math.isfinite(self.delta0)):
            raise ValueError(f"delta0 must be finite and non-negative, got {self.delta0!r}")


@dataclass(frozen=True)
class FirstPassageResult:
    """Solution of a :class:`FirstPassageSpec`.

    Attributes
    ----------
    v:
        ``V_0 .. V_{n-1}``, expected weight accumulated before absorption.
    delta_chain:
        Left self-loop weights ``Delta_1 .. Delta_{n-1}`` (empty for n = 1).
    delta0_star:
        Self-loop weight of the plain random walk, ``(2 - 2p)/(1 - 2p)``.
    v0_random_walk:
        ``n / (1 - 2p)``, first-passage time of the plain random walk.
    v0_differential:
        ``V_0 - v0_random_walk``.
    """

    spec: FirstPassageSpec
    v: tuple
    delta_chain: tuple
    delta0_star: object
    v0_random_walk: object
    v0_differential: object

    @property
    def v0(self):
        return self.v[0]


def _coerce(spec: FirstPassageSpec, exact: bool):
    if exact:
        return Fraction(spec.p), Fraction(spec.delta0), Fraction(1)
    return float(spec.p), float(spec.delta0), 1.0


def delta0_star(p):
    """Self-loop weight making ``S_0`` look like every other state."""
    return (2 - 2 * p) / (1 - 2 * p)


def solve_closed_form(spec: FirstPassageSpec, *, exact: bool = False) -> FirstPassageResult:
    """Solve through the self-loop reduction.

    ``V_0`` comes from the random-walk-plus-differential decomposition and
    ``V_{n-1}`` from the left self-loop weight ``Delta_{n-1}``; the states in
    between follow from the node equations by forward recursion, which is
    stable because its characteristic roots are 1 and ``p/q``.
    """
    p, d0, one = _coerce(spec, exact)
    n = spec.n
    q = one - p
    r = p / q
    d_star = delta0_star(p)
    rw = n / (1 - 2 * p)
    diff = p / (1 - 2 * p) * (1 - r ** n) * (d0 - d_star)
    v0 = rw + diff

    # Delta_i = 2 (1 + r + ... + r^(i-1)) + r^i Delta_0
    delta_chain = tuple(2 * (1 - r ** i) / (1 - r) + r ** i * d0 for i in range(1, n))
    v_last = r ** n * d0 + 2 * p / (1 - 2 * p) * (1 - r ** (n - 1)) + 1

    v = [v0]
    if n >= 2:
        v.append((v0 - q - p * v0 - p * d0) / q)
        for i in range(1, n - 2):
            v.append((v[i] - 1 - p * v[i - 1]) / q)
        v = v[: n - 1] + [v_last]
    return FirstPassageResult(spec, tuple(v), delta_chain, d_star, rw, diff)


def _node_system(spec: FirstPassageSpec, p, d0, one):
    n = spec.n
    q = one - p
    zero = one - one
    A = [[zero] * n for _ in range(n)]
    b = [zero] * n
    # V_0 (1 - p) - q V_1 = q + p delta0
    A[0][0] = one - p
    if n > 1:
        A[0][1] = -q
    b[0] = q + p * d0
    for i in range(1, n):
        A[i][i] = one
        A[i][i - 1] = -p
        if i + 1 < n:
            A[i][i + 1] = -q
        b[i] = one
    return A, b


def _solve_fraction(A, b):
    n = len(b)
    A = [row[:] for row in A]
    b = b[:]
    for col in range(n):
        piv = next(r for r in range(col, n) if A[r][col] != 0)
        A[col], A[piv] = A[piv], A[col]
        b[col], b[piv] = b[piv], b[col]
        for r in range(col + 1, n):
            f = A[r][col] / A[col][col]
            if f:
                for c in range(col, n):
                    A[r][c] -= f * A[col][c]
                b[r] -= f * b[col]
    x = [Fraction(0)] * n
    for r in range(n - 1, -1, -1):
        s = b[r] - sum(A[r][c] * x[c] for c in range(r + 1, n))
        x[r] = s / A[r][r]
    return x


def solve_linear_system(spec: FirstPassageSpec, *, exact: bool = False) -> FirstPassageResult:
    """Solve the ``n x n`` node equations directly (the reference solver)."""
    p, d0, one = _coerce(spec, exact)
    A, b = _node_system(spec, p, d0, one)
    if exact:
        v = _solve_fraction(A, b)
    else:
        mat = np.array(A, dtype=float)
        assert abs(np.linalg.det(mat)) > 0.0, "node equations are singular"
        v = [float(x) for x in np.linalg.solve(mat, np.array(b, dtype=float))]
    q = one - p
    r = p / q
    d_star = delta0_star(p)
    rw = spec.n / (1 - 2 * p)
    delta_chain = []
    d = d0
    for _ in range(1, spec.n):
        # one more left step: two unit moves plus r times the previous loop
        d = 2 + r * d
        delta_chain.append(d)
    return FirstPassageResult(spec, tuple(v), tuple(delta_chain), d_star, rw, v[0] - rw)


@dataclass(frozen=True)
class ChainEstimate:
    mean: float
    stderr: float
    trials: int


def simulate_chain(spec: FirstPassageSpec, trials: int, seed: int) -> ChainEstimate:
    """Monte Carlo estimate of ``V_0`` with ``delta0`` as a fixed self-loop cost."""
    if trials < 2:
        raise ValueError("need at least two trials")
    rng = np.random.default_rng(seed)
    p = float(spec.p)
    d0 = float(spec.delta0)
    state = np.zeros(trials, dtype=np.int64)
    weight = np.zeros(trials)
    active = np.arange(trials)
    while active.size:
        s = state[active]
        left = rng.random(active.size) < p
        stay = left & (s == 0)
        weight[active] += np.where(stay, d0, 1.0)
        s = np.where(left, np.maximum(s - 1, 0), s + 1)
        state[active] = s
        active = active[s < spec.n]
    return ChainEstimate(float(weight.mean()), float(weight.std(ddof=1) / math.sqrt(trials)), trials)


def delta0_upper_bound(params: ChannelParams) -> float:
    """Bound ``1 + (C1 + C2)/C`` on the mean fallback excursion time of SED."""
    return 1.0 + (params.C1 + params.C2) / params.C


def v0_upper_bound(n: int, params: ChannelParams) -> float:
    """``V_0`` evaluated with the excursion bound substituted, as used for the main bound."""
    C, C1, C2, p = params.C, params.C1, params.C2, params.p
    return n * C2 / C1 + (p * C2 / C1) * ((C1 + C2) / C - C2 / C1)
