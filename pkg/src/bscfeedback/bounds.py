"""Expected-blocklength bounds for VLF coding over the BSC.

Everything here is a closed-form expression in ``(M, epsilon, params)``;
logarithms are base 2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

from .channel import ChannelParams, derive_params


def confirmation_threshold(epsilon: float) -> float:
    """``log((1 - eps) / eps)``, the LLR level that stops the decoder."""
    return math.log2(1.0 - epsilon) - math.log2(epsilon)


def confirmation_steps(epsilon: float, params: ChannelParams) -> int:
    """Number ``n`` of C2-wide LLR intervals between 0 and the stopping level."""
    ratio = confirmation_threshold(epsilon) / params.C2
    n = math.ceil(ratio)
    # guard against ratio landing a hair above an integer through rounding
    if n - ratio > 1 - 1e-12 and n > 1:
        n -= 1
    return max(n, 1)


def _check(M, epsilon):
    if int(M) != M or M < 2:
        raise ValueError(f"need M >= 2 messages, got M={M!r}")
    if not 0.0 < epsilon < 0.5:
        raise ValueError(f"epsilon must lie in (0, 1/2), got {epsilon!r}")


def naghshvar_bound(M: float, epsilon: float, params: ChannelParams) -> float:
    """Earlier SED bound with its large constant term.

    Raises
    ------
    ValueError
        If ``log(M / eps) <= 1``, where the nested logarithm is not positive.
    """
    _check(M, epsilon)
    log_m = math.log2(M)
    inner = log_m - math.log2(epsilon)
    if inner <= 1.0:
        raise ValueError(f"log(M/eps) must exceed 1, got {inner!r}")
    C, C1, C2 = params.C, params.C1, params.C2
    return ((log_m + math.log2(inner)) / C
            + (-math.log2(epsilon) + 1.0) / C1
            + naghshvar_constant(params))


def naghshvar_constant(params: ChannelParams) -> float:
    """The additive constant ``96 * 2**(2*C2) / (C*C1)``."""
    return 96.0 * 2.0 ** (2.0 * params.C2) / (params.C * params.C1)


def corollary_bound(M: float, epsilon: float, params: ChannelParams) -> float:
    """Tightened version of the earlier bound with constant ``3*C2**2/(C*C1)``."""
    _check(M, epsilon)
    C, C1, C2 = params.C, params.C1, params.C2
    return (math.log2(M) / C + confirmation_threshold(epsilon) / C1
            + 3.0 * C2 * C2 / (C * C1))


def thm2_bound(M: float, epsilon: float, params: ChannelParams) -> float:
    """Upper bound on the mean blocklength of the SED scheme."""
    _check(M, epsilon)
    C, C1, C2, p = params.C, params.C1, params.C2, params.p
    n = confirmation_steps(epsilon, params)
    return (math.log2(M) / C + n * C2 / C1
            + (p * C2 / C1) * ((C1 + C2) / C - C2 / C1) + C1 / C)


def polyanskiy_vlf(M: float, epsilon: float, params: ChannelParams) -> float:
    """Stop-feedback VLF achievability blocklength for the BSC."""
    _check(M, epsilon)
    return (math.log2(M - 1) - math.log2(epsilon) + math.log2(2.0 * params.q)) / params.C


def polyanskiy_log_m(blocklength: float, epsilon: float, params: ChannelParams) -> float:
    """Largest ``log M`` the stop-feedback bound supports at ``blocklength``.

    Inverts :func:`polyanskiy_vlf` in ``M``; may be below 1 (fewer than two
    messages) for short blocklengths.
    """
    x = blocklength * params.C + math.log2(epsilon) - math.log2(2.0 * params.q)
    # log2(2**x + 1) without overflow
    return x + math.log2(1.0 + 2.0 ** -x) if x > 0 else math.log2(1.0 + 2.0 ** x)


def rate_of(M: float, blocklength: float) -> float:
    """Rate ``log M / blocklength`` in bits per channel use."""
    return math.log2(M) / blocklength


@dataclass(frozen=True)
class BoundSet:
    """All four expected-blocklength bounds at one ``(M, epsilon, p)``."""

    M: int
    epsilon: float
    p: float
    naghshvar_thm1: float
    corollary1: float
    main_thm2: float
    polyanskiy_vlf: float

    def rate_of(self, bound: str) -> float:
        return rate_of(self.M, getattr(self, bound))

    @property
    def smallest(self) -> str:
        names = ("naghshvar_thm1", "corollary1", "main_thm2", "polyanskiy_vlf")
        return min(names, key=lambda n: getattr(self, n))


def compute_bounds(M: int, epsilon: float, params: ChannelParams) -> BoundSet:
    """Evaluate every bound at ``(M, epsilon)`` on channel ``params``."""
    return BoundSet(
        M=int(M),
        epsilon=float(epsilon),
        p=params.p,
        naghshvar_thm1=naghshvar_bound(M, epsilon, params),
        corollary1=corollary_bound(M, epsilon, params),
        main_thm2=thm2_bound(M, epsilon, params),
        polyanskiy_vlf=polyanskiy_vlf(M, epsilon, params),
    )


@dataclass(frozen=True)
class EpsilonStar:
    """Threshold below which the main bound beats the stop-feedback bound.

    ``value`` is 0 with ``underflow`` set when ``2**-exponent`` is not
    representable; ``log2_value`` stays exact in that case.
    """

    p: float
    log2_value: float
    value: float
    underflow: bool


def _eps_star_exponent(params: ChannelParams) -> float:
    C, C1, C2, p = params.C, params.C1, params.C2, params.p
    num = C * C2 + C1 * C1 + p * C2 * (C1 + C2) - C1 * math.log2(1.0 - p)
    return num / (C1 - C)


def epsilon_star(p: float) -> EpsilonStar:
    """Root of :func:`f_difference` in ``epsilon`` for crossover ``p``."""
    params = derive_params(p)
    if params.C1 - params.C <= 0.0:
        return EpsilonStar(params.p, -math.inf, 0.0, True)
    log2_value = -_eps_star_exponent(params)
    value = 2.0 ** log2_value
    return EpsilonStar(params.p, log2_value, value, value == 0.0)


def f_difference(epsilon: float, params: ChannelParams, *, log2_epsilon: float | None = None) -> float:
    """Asymptotic gap between the stop-feedback bound and the main bound.

    Positive when the main bound is smaller. ``log2_epsilon`` may be given
    directly when ``epsilon`` itself underflows.
    """
    C, C1, C2, p = params.C, params.C1, params.C2, params.p
    log_inv = -(math.log2(epsilon) if log2_epsilon is None else log2_epsilon)
    return ((C1 - C) / (C * C1) * log_inv + math.log2(1.0 - p) / C
            - (C * C2 + C1 * C1 + p * C2 * (C1 + C2)) / (C * C1))


@dataclass(frozen=True)
class ComparisonRow:
    bounds: BoundSet
    smallest: str
    thm2_below_corollary: bool
    thm2_below_polyanskiy: bool
    polyanskiy_claim_applies: bool


def compare_bounds(grid: Iterable[tuple[float, int, float]], *, strict: bool = True) -> list[ComparisonRow]:
    """Order the bounds at every ``(p, M, epsilon)`` of ``grid``.

    With ``strict`` the main bound must lie below the corollary everywhere,
    and below the stop-feedback bound when ``p >= 0.05``, ``eps <= 1e-2``.

    Raises
    ------
    AssertionError
        Naming the first violating point when ``strict`` is set.
    """
    rows = []
    for p, M, eps in grid:
        b = compute_bounds(M, eps, derive_params(p))
        applies = p >= 0.05 and eps <= 1e-2
        row = ComparisonRow(
            bounds=b,
            smallest=b.smallest,
            thm2_below_corollary=b.main_thm2 < b.corollary1,
            thm2_below_polyanskiy=b.main_thm2 < b.polyanskiy_vlf,
            polyanskiy_claim_applies=applies,
        )
        if strict and not row.thm2_below_corollary:
            raise AssertionError(f"main bound not below corollary at p={p}, M={M}, eps={eps}")
        if strict and applies and not row.thm2_below_polyanskiy:
            raise AssertionError(f"main bound not below stop-feedback bound at p={p}, M={M}, eps={eps}")
        rows.append(row)
    return rows
