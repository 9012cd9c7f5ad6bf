"""Grouped Bayesian belief over M messages on a BSC.

After ``t`` channel uses every message's unnormalized posterior is
``q**a * p**(t - a) / M`` for some integer ``a``, so messages sharing ``a``
share their posterior. A :class:`BeliefState` stores one ``(a, count)`` pair
per group; merging is exact integer bookkeeping and the cost of an update is
proportional to the number of groups (at most ``t + 1``), not to ``M``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .channel import ChannelParams


@dataclass(frozen=True)
class LogLikelihoodRatio:
    """``u = log2(rho / (1 - rho))`` for one message's posterior ``rho``."""

    u: float

    @property
    def posterior(self) -> float:
        # logistic in base 2, written to stay accurate for large |u|
        if self.u >= 0:
            return 1.0 / (1.0 + 2.0 ** (-self.u))
        z = 2.0 ** self.u
        return z / (1.0 + z)

    @classmethod
    def from_posterior(cls, rho: float) -> "LogLikelihoodRatio":
        if not 0.0 < rho < 1.0:
            raise ValueError(f"posterior must lie in (0, 1), got {rho!r}")
        return cls(math.log2(rho) - math.log2(1.0 - rho))


@dataclass(frozen=True)
class BeliefState:
    """Posterior over ``total_messages`` messages, grouped by q-count.

    Attributes
    ----------
    q_counts:
        Ascending group keys; key ``a`` means ``a`` multiplications by ``q``
        and ``step - a`` by ``p`` since the uniform prior.
    counts:
        Number of messages in each group.
    true_q_count, true_rank:
        Group key of the transmitted message and its position inside that
        group under the canonical member ordering used by the encoder.
    channel:
        Channel the updates were made on; ``None`` before the first update.
    """

    total_messages: int
    step: int
    q_counts: tuple[int, ...]
    counts: tuple[int, ...]
    true_q_count: int
    true_rank: int = 0
    channel: ChannelParams | None = None

    def __post_init__(self):
        if len(self.q_counts) != len(self.counts) or not self.counts:
            raise ValueError("q_counts and counts must be non-empty and aligned")
        if any(c < 1 for c in self.counts):
            raise ValueError("every group needs at least one member")
        if list(self.q_counts) != sorted(set(self.q_counts)):
            raise ValueError("group keys must be strictly ascending")
        if sum(self.counts) != self.total_messages:
            raise ValueError("group counts must sum to total_messages")
        if self.true_q_count not in self.q_counts:
            raise ValueError("true message must belong to an existing group")
        if not 0 <= self.true_rank < self.counts[self.q_counts.index(self.true_q_count)]:
            raise ValueError("true message rank out of range for its group")

    # -- log-domain views -------------------------------------------------

    @property
    def _log2_pq(self) -> tuple[float, float]:
        if self.channel is None:
            return 0.0, 0.0
        return self.channel.log2_p, self.channel.log2_q

    def log_weight(self, q_count: int) -> float:
        """Unnormalized log2 posterior of a member of group ``q_count``."""
        log2_p, log2_q = self._log2_pq
        return -math.log2(self.total_messages) + q_count * log2_q + (self.step - q_count) * log2_p

    @property
    def groups(self) -> list[tuple[float, int]]:
        return [(self.log_weight(a), c) for a, c in zip(self.q_counts, self.counts)]

    @property
    def true_msg_log_weight(self) -> float:
        return self.log_weight(self.true_q_count)

    @property
    def log_normalizer(self) -> float:
        lw = np.array([w for w, _ in self.groups])
        top = lw.max()
        return float(top + np.log2(np.sum(np.array(self.counts) * np.exp2(lw - top))))

    def group_posteriors(self) -> np.ndarray:
        """Posterior of a single member of each group, in ``q_counts`` order."""
        lw = np.array([w for w, _ in self.groups])
        return np.exp2(lw - self.log_normalizer)

    @property
    def true_posterior(self) -> float:
        return 2.0 ** (self.true_msg_log_weight - self.log_normalizer)

    @property
    def max_posterior(self) -> float:
        return float(self.group_posteriors()[-1])

    def normalization_sum(self) -> float:
        return float(np.sum(self.group_posteriors() * np.array(self.counts)))

    # -- kernel views ---------------------------------------------------

    @property
    def _c2(self) -> float:
        return 1.0 if self.channel is None else self.channel.C2

    def _arrays(self):
        size = self.step + 3
        cnt = np.zeros(size, dtype=np.int64)
        cnt[list(self.q_counts)] = self.counts
        pw = K.weight_table(self._c2, size)
        return cnt, self.q_counts[0], self.q_counts[-1], pw

    @classmethod
    def _from_arrays(cls, cnt, lo, hi, *, total, step, ta, tr, channel):
        keys = tuple(a for a in range(lo, hi + 1) if cnt[a] > 0)
        return cls(
            total_messages=total,
            step=step,
            q_counts=keys,
            counts=tuple(int(cnt[a]) for a in keys),
            true_q_count=int(ta),
            true_rank=int(tr),
            channel=channel,
        )


def uniform_init(M: int) -> BeliefState:
    """Uniform prior over ``M >= 2`` messages; the true message is message 1."""
    if int(M) != M or M < 2:
        raise ValueError(f"need at least two messages, got M={M!r}")
    M = int(M)
    return BeliefState(total_messages=M, step=0, q_counts=(0,), counts=(M,), true_q_count=0)


def bayes_update(state: BeliefState, partition, y: int, params: ChannelParams) -> BeliefState:
    """Condition ``state`` on channel output ``y`` sent under ``partition``.

    Members on side ``y`` are multiplied by ``q`` and the rest by ``p``;
    groups that end up with the same q-count merge.

    Raises
    ------
    ValueError
        If the partition's per-group counts do not match the state, if its
        true-message side disagrees with the canonical member ordering, or if
        ``y`` is not a bit.
    """
    if y not in (0, 1):
        raise ValueError(f"channel output must be 0 or 1, got {y!r}")
    if state.channel is not None and state.channel != params:
        raise ValueError("state was built on a different channel")
    s0 = tuple(partition.s0_assignment)
    s1 = tuple(partition.s1_assignment)
    if len(s0) != len(state.counts) or len(s1) != len(state.counts):
        raise ValueError("partition must annotate every group of the state")
    for a, c, n0, n1 in zip(state.q_counts, state.counts, s0, s1):
        if n0 < 0 or n1 < 0 or n0 + n1 != c:
            raise ValueError(
                f"partition splits group q_count={a} of size {c} into {n0}+{n1}"
            )
    cnt, lo, hi, _ = state._arrays()
    a0 = np.zeros_like(cnt)
    a1 = np.zeros_like(cnt)
    a0[list(state.q_counts)] = s0
    a1[list(state.q_counts)] = s1
    side = K.theta_side_fixed(a0, state.true_q_count, state.true_rank)
    if side != partition.true_msg_side:
        raise ValueError("partition.true_msg_side disagrees with the member ordering")
    ta, tr = K.theta_after_shift(a0, a1, y, state.true_q_count, state.true_rank, side, lo)
    out = np.zeros_like(cnt)
    new_lo, new_hi = K.bayes_shift(cnt, lo, hi, a0, a1, y, out)
    return BeliefState._from_arrays(
        out, new_lo, new_hi, total=state.total_messages, step=state.step + 1,
        ta=ta, tr=tr, channel=params,
    )


def true_llr(state: BeliefState) -> LogLikelihoodRatio:
    """Log-likelihood ratio of the transmitted message, computed in the log domain."""
    cnt, lo, hi, pw = state._arrays()
    d, big_l = K.llr_parts(cnt, lo, hi, state.true_q_count, pw)
    return LogLikelihoodRatio(d * state._c2 - big_l)
