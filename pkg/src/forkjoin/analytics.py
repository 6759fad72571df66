"""Closed-form synchronizer occupancy law and memory sizing.

With (almost) Poisson first-partner input the synchronizer behaves as an
M/G/inf system, so the number of unmatched partners is Poisson with mean
``rho = lambda * T`` where ``T`` is the mean pair sojourn (measured by the
simulator). Loss budgets translate into memory sizes through Poisson and
M/M/N queue-length tails.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import gammainc

from .errors import UnstableBranch
from .params import NetworkParams, validate_params


@dataclass(frozen=True)
class OccupancyModel:
    rho: float

    def __post_init__(self):
        if not (self.rho >= 0 and math.isfinite(self.rho)):
            raise ValueError(f"rho must be finite and >= 0, got {self.rho}")

    @classmethod
    def from_sojourn(cls, lam: float, mean_sojourn: float) -> "OccupancyModel":
        return cls(lam * mean_sojourn)

    def pmf(self, k):
        return occupancy_pmf(self, k)

    def tail(self, k: int) -> float:
        return poisson_tail(self.rho, k)


@dataclass(frozen=True)
class MemoryPlan:
    q_a_max: int
    q_b_max: int
    k_max: int
    union_bound: float

    @property
    def loss_estimate(self) -> float:
        """The union bound capped at 1."""
        return min(1.0, self.union_bound)

    @property
    def total(self) -> int:
        return self.q_a_max + self.q_b_max + self.k_max

    def to_dict(self) -> dict:
        return {**asdict(self), "loss_estimate": self.loss_estimate, "m_max": self.total}


def occupancy_pmf(m: OccupancyModel | float, k):
    """Poisson(rho) mass at ``k``, evaluated in log space. Accepts arrays."""
    rho = m.rho if isinstance(m, OccupancyModel) else float(m)
    k_arr = np.asarray(k)
    if np.any(k_arr < 0):
        raise ValueError("k must be >= 0")
    if rho == 0:
        out = np.where(k_arr == 0, 1.0, 0.0)
    else:
        kf = k_arr.astype(np.float64)
        lg = np.vectorize(math.lgamma, otypes=[np.float64])(kf + 1.0)
        out = np.exp(kf * math.log(rho) - rho - lg)
    return float(out) if out.ndim == 0 else out


def poisson_tail(rho: float, k: int) -> float:
    """``P(N > k)`` for ``N ~ Poisson(rho)``; 1 for ``k < 0``."""
    if k < 0:
        return 1.0
    if rho == 0:
        return 0.0
    # P(N <= k) = Q(k + 1, rho), so P(N > k) is the regularized lower gamma
    return float(gammainc(k + 1, rho))


def _check_epsilon(epsilon: float) -> None:
    if not 0 < epsilon < 1:
        raise ValueError(f"epsilon must be in (0, 1), got {epsilon}")


def required_memory(rho: float, epsilon: float) -> int:
    """Smallest ``K`` with ``P(k > K) < epsilon`` under the occupancy law."""
    _check_epsilon(epsilon)
    if rho < 0:
        raise ValueError(f"rho must be >= 0, got {rho}")
    k = max(0, int(rho + 8 * math.sqrt(rho)))
    while poisson_tail(rho, k) >= epsilon:
        k *= 2 if k else 1
        k += 1
    # smallest k in [0, hi] with tail < epsilon; the tail is nonincreasing in k
    lo, hi = -1, k
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if poisson_tail(rho, mid) < epsilon:
            hi = mid
        else:
            lo = mid
    return hi


def _mmn_log_weights(n: int, psi: float, upto: int) -> np.ndarray:
    """Unnormalised log stationary weights of an M/M/n queue for q = 0..upto."""
    a = n * psi  # offered load lambda / mu
    q = np.arange(upto + 1, dtype=np.float64)
    below = q <= n
    logw = np.empty(upto + 1)
    lg = np.vectorize(math.lgamma, otypes=[np.float64])
    logw[below] = q[below] * math.log(a) - lg(q[below] + 1)
    logw[~below] = n * math.log(a) - math.lgamma(n + 1) + (q[~below] - n) * math.log(psi)
    return logw


def branch_overflow_prob(n: int, psi: float, q_max: int) -> float:
    """``P(queue length > q_max)`` for a stationary M/M/n queue with load ``psi``.

    Queue length counts jobs in service plus waiting jobs.
    """
    if not 0 < psi < 1:
        raise UnstableBranch(f"load must be in (0, 1), got {psi}")
    if n < 1:
        raise ValueError("n must be >= 1")
    if q_max < 0:
        return 1.0
    m = max(n, q_max)
    logw = _mmn_log_weights(n, psi, m)
    # geometric tail beyond state n sums in closed form
    log_tail_n = logw[n] + math.log(psi) - math.log1p(-psi)  # sum over q > n
    shift = logw.max()
    head = np.exp(logw[: n + 1] - shift).sum()
    total = head + math.exp(log_tail_n - shift)
    if q_max >= n:
        over = math.exp(logw[q_max] - shift) * psi / (1 - psi)
    else:
        over = np.exp(logw[q_max + 1: n + 1] - shift).sum() + math.exp(log_tail_n - shift)
    return float(min(1.0, over / total))


def _tails(p: NetworkParams, rho: float, m_max: int):
    qa = np.array([branch_overflow_prob(p.n_a, p.psi_a, q) for q in range(m_max + 1)])
    qb = np.array([branch_overflow_prob(p.n_b, p.psi_b, q) for q in range(m_max + 1)])
    ks = np.array([poisson_tail(rho, k) for k in range(m_max + 1)])
    return qa, qb, ks


def partition_memory(p: NetworkParams, rho: float, m_max: int) -> MemoryPlan:
    """Split ``m_max`` slots between branch a, branch b and the synchronizer.

    Minimises the union bound ``overflow_a + overflow_b + P(k > k_max)`` over
    every split; ties go to the larger ``k_max``, then the larger ``q_a_max``.
    """
    validate_params(p)
    if m_max < 0:
        raise ValueError("m_max must be >= 0")
    if rho < 0:
        raise ValueError("rho must be >= 0")
    qa, qb, ks = _tails(p, rho, m_max)
    best = None
    for k in range(m_max, -1, -1):
        rest = m_max - k
        a = np.arange(rest, -1, -1)
        loss = qa[a] + qb[rest - a] + ks[k]
        i = int(np.argmin(loss))  # first minimum = largest q_a_max
        cand = (float(loss[i]), int(a[i]), k)
        if best is None or cand[0] < best[0]:
            best = cand
    loss, a, k = best
    return MemoryPlan(q_a_max=a, q_b_max=m_max - k - a, k_max=k, union_bound=loss)


def min_total_memory(p: NetworkParams, rho: float, epsilon: float, limit: int = 100_000) -> MemoryPlan:
    """Smallest total memory whose best partition has loss below ``epsilon``.

    The best achievable loss is nonincreasing in the total (an extra slot can
    always be given to any part), so the search doubles then bisects.
    """
    _check_epsilon(epsilon)

    def ok(m):
        return partition_memory(p, rho, m).loss_estimate < epsilon

    if ok(0):
        return partition_memory(p, rho, 0)
    hi = 1
    while not ok(hi):
        if hi > limit:
            raise RuntimeError(f"no memory size up to {limit} meets epsilon={epsilon}")
        hi *= 2
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return partition_memory(p, rho, hi)
