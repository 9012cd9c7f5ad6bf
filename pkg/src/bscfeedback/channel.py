"""Binary symmetric channel parameters.

All logarithms are base 2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field


@dataclass(frozen=True)
class ChannelParams:
    """BSC(p) with its capacity ``C``, KL divergence ``C1`` and LLR step ``C2``.

    Build with :func:`derive_params`; the constructor does not validate.
    """

    p: float
    q: float
    capacity_C: float
    kl_C1: float
    llr_step_C2: float
    log2_p: float = field(repr=False, default=0.0)
    log2_q: float = field(repr=False, default=0.0)

    @property
    def C(self) -> float:
        return self.capacity_C

    @property
    def C1(self) -> float:
        return self.kl_C1

    @property
    def C2(self) -> float:
        return self.llr_step_C2


def binary_entropy(p: float) -> float:
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


def _capacity(p: float) -> float:
    x = 1.0 - 2.0 * p
    if x >= 1e-2:
        return 1.0 - binary_entropy(p)
    # 1 - H(p) cancels near p = 1/2; sum the series in x = 1 - 2p instead
    x2 = x * x
    term = x2
    total = 0.0
    for k in range(1, 12):
        total += term / (2 * k * (2 * k - 1))
        term *= x2
    return total / math.log(2.0)


def derive_params(p: float) -> ChannelParams:
    """Return the channel constants for crossover probability ``0 < p < 1/2``.

    Raises
    ------
    ValueError
        If ``p`` is not finite or lies outside the open interval (0, 1/2).
    """
    p = float(p)
    if not math.isfinite(p) or not 0.0 < p < 0.5:
        raise ValueError(f"crossover probability must lie in (0, 1/2), got p={p!r}")
    q = 1.0 - p
    log2_p = math.log2(p)
    log2_q = math.log2(q)
    c2 = log2_q - log2_p
    c1 = p * (log2_p - log2_q) + q * (log2_q - log2_p)
    return ChannelParams(
        p=p,
        q=q,
        capacity_C=_capacity(p),
        kl_C1=c1,
        llr_step_C2=c2,
        log2_p=log2_p,
        log2_q=log2_q,
    )


def transmit(x: int, noise_draw: float, params: ChannelParams) -> int:
    """Pass bit ``x`` through the channel; it flips iff ``noise_draw < p``."""
    if x not in (0, 1):
        raise ValueError(f"channel input must be 0 or 1, got {x!r}")
    return x ^ int(noise_draw < params.p)
