"""Channel-input rules: the SED partitioner and the Horstein baseline."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .belief import BeliefState

# slack for the SED check when it is evaluated on normalized floats
SED_TOL = 1e-12


@dataclass(frozen=True)
class Partition:
    """Split of the message set into S0 and S1, counted per belief group.

    ``s0_assignment[j]`` and ``s1_assignment[j]`` refer to the group with key
    ``state.q_counts[j]``. Within a split group the lowest-ranked members sit
    in S0.
    """

    s0_assignment: tuple[int, ...]
    s1_assignment: tuple[int, ...]
    pi0: float
    pi1: float
    true_msg_side: int

    @property
    def difference(self) -> float:
        return self.pi0 - self.pi1


def make_partition(state: BeliefState, s0_counts) -> Partition:
    """Build a partition of ``state`` from per-group S0 counts.

    Useful for arbitrary (non-SED) splits; the true message's side follows
    from its rank.
    """
    s0 = tuple(int(c) for c in s0_counts)
    if len(s0) != len(state.counts):
        raise ValueError("need one S0 count per group")
    if any(not 0 <= a <= c for a, c in zip(s0, state.counts)):
        raise ValueError("S0 counts must lie between 0 and the group size")
    s1 = tuple(c - a for a, c in zip(s0, state.counts))
    post = state.group_posteriors()
    pi0 = float(np.dot(post, s0))
    pi1 = float(np.dot(post, s1))
    j = state.q_counts.index(state.true_q_count)
    side = 0 if state.true_rank < s0[j] else 1
    return Partition(s0, s1, pi0, pi1, side)


def sed_gap(state: BeliefState, partition: Partition) -> tuple[float, float]:
    """Return ``(pi0 - pi1, min posterior in S0)`` for checking the SED condition."""
    post = state.group_posteriors()
    in_s0 = [r for r, c in zip(post, partition.s0_assignment) if c > 0]
    min_s0 = min(in_s0) if in_s0 else math.inf
    return partition.pi0 - partition.pi1, float(min_s0)


def is_sed(state: BeliefState, partition: Partition, tol: float = SED_TOL) -> bool:
    """Check ``0 <= pi0 - pi1 <= min_{S0} rho`` up to ``tol``.

    The upper inequality is non-strict: with three equally likely messages
    no split meets the strict form, while the submartingale argument only
    needs the weak one.
    """
    if sum(partition.s0_assignment) == 0 or sum(partition.s1_assignment) == 0:
        return False
    diff, min_s0 = sed_gap(state, partition)
    return -tol <= diff <= min_s0 + tol


def sed_partition(state: BeliefState) -> Partition:
    """SED split of ``state``.

    Groups are visited from most to least likely and each member joins the
    currently lighter side; the heavier side is named S0. Every member of the
    final heavy side was added while that side was not heavier, which gives
    ``pi0 - pi1 <= min_{S0} rho``.

    Raises
    ------
    RuntimeError
        If the result violates the SED condition (indicates a bug).
    """
    cnt, lo, hi, pw = state._arrays()
    s0 = np.zeros_like(cnt)
    s1 = np.zeros_like(cnt)
    K.sed_split(cnt, lo, hi, pw, s0, s1)
    part = make_partition(state, [s0[a] for a in state.q_counts])
    if not is_sed(state, part):
        diff, min_s0 = sed_gap(state, part)
        raise RuntimeError(
            f"SED condition violated: pi0-pi1={diff!r}, min S0 posterior={min_s0!r}"
        )
    return part


def sed_partition_dense(rho) -> tuple[np.ndarray, float, float]:
    """SED split of an arbitrary dense posterior ``rho``.

    Same greedy as :func:`sed_partition`, one message at a time (ties in
    ``rho`` broken by index, ties in side mass go to the first side).
    Returns ``(in_s0, pi0, pi1)`` with ``in_s0`` a boolean mask.
    """
    rho = np.asarray(rho, dtype=float)
    if rho.ndim != 1 or rho.shape[0] < 2:
        raise ValueError("need a posterior vector over at least two messages")
    side_a = np.zeros(rho.shape[0], dtype=bool)
    m_a = m_b = 0.0
    for i in np.argsort(-rho, kind="stable"):
        if m_a <= m_b:
            side_a[i] = True
            m_a += rho[i]
        else:
            m_b += rho[i]
    if m_b > m_a:
        return ~side_a, float(m_b), float(m_a)
    return side_a, float(m_a), float(m_b)


def sed_channel_input(partition: Partition) -> int:
    """Input bit for the true message: 0 iff it sits in S0."""
    return partition.true_msg_side


def horstein_input(rho, theta: int, midpoint_draw: float) -> int:
    """Horstein input for message ``theta`` under a dense posterior ``rho``.

    Messages occupy consecutive subintervals of [0, 1) in index order. The
    input is 0 when the true message's subinterval lies below 1/2 and 1 when
    it lies above; a straddling subinterval sends 0 with probability equal
    to its fraction below 1/2.

    Raises
    ------
    TypeError
        If given a grouped :class:`BeliefState`.
    """
    if isinstance(rho, BeliefState):
        raise TypeError("the Horstein encoder needs a dense posterior vector")
    rho = np.asarray(rho, dtype=float)
    if rho.ndim != 1 or not 0 <= theta < rho.shape[0]:
        raise ValueError("rho must be a vector and theta a valid index into it")
    return int(K.horstein_bit(rho, int(theta), float(midpoint_draw)))
