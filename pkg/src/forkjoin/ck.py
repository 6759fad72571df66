"""Stationary distribution of the {M/M/1; M/M/1} fork-join branch queues.

The state is ``(q_a, q_b)``, the number of jobs in each branch. An external
arrival moves ``(q_a, q_b) -> (q_a + 1, q_b + 1)`` at rate ``lambda``; a
service completion in branch ``a`` (``b``) decrements ``q_a`` (``q_b``) at rate
``mu_a`` (``mu_b``). The chain is truncated to ``0 <= q <= q_max`` by dropping
arrivals from states on the upper boundary, and solved by power iteration on
the chain uniformized at ``lambda + mu_a + mu_b``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DegenerateDenominator, InvalidParams, NoConvergence, TruncationTooSmall
from .params import NetworkParams, validate_params

DEFAULT_Q_MAX = 200
DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 2_000_000
DEFAULT_BOUNDARY_BUDGET = 1e-8
MAX_AUTO_Q = 6400


@dataclass(frozen=True)
class StationaryGrid:
    """``probs[q_a, q_b]`` on the truncated grid plus convergence diagnostics."""

    probs: np.ndarray
    residual: float
    mass_at_boundary: float
    iterations: int

    @property
    def q_max(self) -> int:
        return self.probs.shape[0] - 1


def _check(p: NetworkParams) -> None:
    validate_params(p)
    if p.n_a != 1 or p.n_b != 1:
        raise InvalidParams("the stationary solver handles n_a = n_b = 1 only")


def boundary_mass(probs: np.ndarray) -> float:
    return float(probs[-1, :].sum() + probs[:-1, -1].sum())


def _flows(P: np.ndarray, lam: float, mu_a: float, mu_b: float):
    """Probability inflow and outflow per state of the truncated chain."""
    inflow = np.zeros_like(P)
    inflow[1:, 1:] += lam * P[:-1, :-1]
    inflow[:-1, :] += mu_a * P[1:, :]
    inflow[:, :-1] += mu_b * P[:, 1:]
    out_rate = np.zeros_like(P)
    out_rate[:-1, :-1] += lam
    out_rate[1:, :] += mu_a
    out_rate[:, 1:] += mu_b
    return inflow, out_rate * P


def balance_residual(g: StationaryGrid | np.ndarray, p: NetworkParams) -> float:
    """Largest ``|inflow - outflow|`` over states off the truncation boundary."""
    P = g.probs if isinstance(g, StationaryGrid) else np.asarray(g, dtype=np.float64)
    if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] < 2:
        raise ValueError(f"grid must be square with side >= 2, got shape {P.shape}")
    inflow, outflow = _flows(P, p.lam, p.mu_a, p.mu_b)
    return float(np.max(np.abs(inflow - outflow)[:-1, :-1]))


def _product_guess(q_max: int, psi_a: float, psi_b: float) -> np.ndarray:
    qa = psi_a ** np.arange(q_max + 1)
    qb = psi_b ** np.arange(q_max + 1)
    P = np.outer(qa, qb)
    return P / P.sum()


def _iterate_numpy(P: np.ndarray, lam: float, mu_a: float, mu_b: float, tol: float, max_iter: int):
    unif = lam + mu_a + mu_b
    out_rate = np.zeros_like(P)
    out_rate[:-1, :-1] += lam
    out_rate[1:, :] += mu_a
    out_rate[:, 1:] += mu_b
    stay = 1.0 - out_rate / unif
    a, b, c = lam / unif, mu_a / unif, mu_b / unif
    P = P.copy()
    new = np.empty_like(P)
    diff = np.empty_like(P)
    change = np.inf
    for it in range(1, max_iter + 1):
        np.multiply(stay, P, out=new)
        new[1:, 1:] += a * P[:-1, :-1]
        new[:-1, :] += b * P[1:, :]
        new[:, :-1] += c * P[:, 1:]
        new /= new.sum()
        np.subtract(new, P, out=diff)
        change = float(np.max(np.abs(diff, out=diff)))
        P, new = new, P
        if unif * change < tol:
            return P, it, change
    return P, -1, change


try:
    from ._cksweep import iterate as _iterate_compiled
except ImportError:  # pragma: no cover - depends on build
    _iterate_compiled = None

SWEEP_BACKEND = "compiled" if _iterate_compiled is not None else "numpy"


def _iterate(p: NetworkParams, P: np.ndarray, tol: float, max_iter: int, backend: str | None):
    backend = backend or SWEEP_BACKEND
    fn = _iterate_compiled if backend == "compiled" else _iterate_numpy
    if fn is None:
        raise ValueError(f"sweep backend {backend!r} is not available")
    P, iters, change = fn(np.ascontiguousarray(P / P.sum()), p.lam, p.mu_a, p.mu_b, tol, max_iter)
    if iters < 0:
        raise NoConvergence(f"no convergence after {max_iter} sweeps (last change {change:.3g})")
    return P, iters


def _embed(P: np.ndarray, q_max: int) -> np.ndarray:
    """Grow a converged grid to a larger one, filling new states geometrically."""
    n = P.shape[0]
    out = np.zeros((q_max + 1, q_max + 1))
    out[:n, :n] = P
    tail = out[n - 1, :n].copy(), out[:n, n - 1].copy()
    ratio_a = P[n - 1, :].sum() / max(P[n - 2, :].sum(), 1e-300)
    ratio_b = P[:, n - 1].sum() / max(P[:, n - 2].sum(), 1e-300)
    for k in range(n, q_max + 1):
        out[k, :n] = tail[0] * ratio_a ** (k - n + 1)
        out[:n, k] = tail[1] * ratio_b ** (k - n + 1)
    return out / out.sum()


def _initial_q(psi_a: float, psi_b: float, budget: float | None) -> int:
    q = DEFAULT_Q_MAX
    if budget is None:
        return q
    # boundary mass of the product of geometric marginals
    while q < MAX_AUTO_Q and (1 - psi_a) * psi_a ** q + (1 - psi_b) * psi_b ** q > budget:
        q *= 2
    return q


def solve_stationary(p: NetworkParams, q_max: int | None = None, tol: float = DEFAULT_TOL,
                     max_iter: int = DEFAULT_MAX_ITER,
                     boundary_budget: float | None = DEFAULT_BOUNDARY_BUDGET,
                     start: np.ndarray | None = None, backend: str | None = None) -> StationaryGrid:
    """Solve the truncated balance equations to a balance residual below ``tol``.

    With ``q_max=None`` the grid size starts at 200 (larger if the geometric
    tail of either branch says so) and doubles until the probability mass on
    the boundary row/column is within ``boundary_budget``. An explicit
    ``q_max`` is used as given and raises ``TruncationTooSmall`` when the
    budget is exceeded; ``boundary_budget=None`` skips that check.
    """
    _check(p)
    if tol <= 0:
        raise ValueError("tol must be > 0")
    auto = q_max is None
    q = _initial_q(p.psi_a, p.psi_b, boundary_budget) if auto else int(q_max)
    if q < 10:
        raise ValueError(f"q_max must be >= 10, got {q}")
    P0 = start if start is not None and start.shape == (q + 1, q + 1) else _product_guess(q, p.psi_a, p.psi_b)
    while True:
        P, iters = _iterate(p, P0, tol, max_iter, backend)
        bm = boundary_mass(P)
        if boundary_budget is None or bm <= boundary_budget:
            res = balance_residual(P, p)
            if not res < tol:
                raise NoConvergence(f"balance residual {res:.3g} not below tol {tol:g}")
            return StationaryGrid(P, res, bm, iters)
        if not auto or q >= MAX_AUTO_Q:
            raise TruncationTooSmall(f"boundary mass {bm:.3g} exceeds budget {boundary_budget:g} at q_max={q}")
        q *= 2
        P0 = _embed(P, q)


# Regions of the conditional-rate formula. Inequalities are strict as written:
# "q_b > q_a > 1" means q_a >= 2 and q_b >= q_a + 1.
REGIONS: dict[str, Callable] = {
    "b>a>0": lambda qa, qb: (qb > qa) & (qa > 0),
    "a>b>0": lambda qa, qb: (qa > qb) & (qb > 0),
    "a=b>0": lambda qa, qb: (qa == qb) & (qa > 0),
    "b>a>1": lambda qa, qb: (qb > qa) & (qa > 1),
    "a>b>1": lambda qa, qb: (qa > qb) & (qb > 1),
    "a=b>1": lambda qa, qb: (qa == qb) & (qa > 1),
}


def region_probability(g: StationaryGrid | np.ndarray, region: str | Callable) -> float:
    """Total probability of states where ``region(q_a, q_b)`` holds.

    ``region`` is a vectorised predicate over integer index arrays or one of
    the names in ``REGIONS``.
    """
    P = g.probs if isinstance(g, StationaryGrid) else np.asarray(g)
    pred = REGIONS[region] if isinstance(region, str) else region
    qa, qb = np.indices(P.shape)
    return float(P[pred(qa, qb)].sum())


def _rate_terms(P, mu_a: float, mu_b: float) -> tuple[float, float]:
    num = (mu_a ** 2 * region_probability(P, "b>a>1")
           + mu_b ** 2 * region_probability(P, "a>b>1")
           + (mu_a ** 2 + mu_b ** 2) * region_probability(P, "a=b>1"))
    den = (mu_a * region_probability(P, "b>a>0")
           + mu_b * region_probability(P, "a>b>0")
           + (mu_a + mu_b) * region_probability(P, "a=b>0"))
    return num, den


def conditional_rate(g: StationaryGrid | np.ndarray, p: NetworkParams) -> float:
    """Intensity of first-partner events just after a first-partner event.

    The denominator is the stationary first-partner rate (a departure from a
    branch that is not behind the other one); the numerator weights each such
    state by the rate at which the same branch produces the next first
    partner.
    """
    P = g.probs if isinstance(g, StationaryGrid) else np.asarray(g)
    num, den = _rate_terms(P, p.mu_a, p.mu_b)
    if not den > 0:
        raise DegenerateDenominator("no probability mass in first-partner regions")
    return num / den


def delta_p_relative(g: StationaryGrid | np.ndarray, p: NetworkParams) -> float:
    return (p.lam - conditional_rate(g, p)) / p.lam


def marginal_distribution(g: StationaryGrid | np.ndarray, branch: str) -> np.ndarray:
    P = g.probs if isinstance(g, StationaryGrid) else np.asarray(g)
    if branch == "a":
        return P.sum(axis=1)
    if branch == "b":
        return P.sum(axis=0)
    raise ValueError(f"branch must be 'a' or 'b', got {branch!r}")


def grid_rows(g: StationaryGrid):
    """``(q_a, q_b, prob)`` rows in row-major order, for CSV export."""
    P = g.probs
    for i in range(P.shape[0]):
        for j in range(P.shape[1]):
            yield i, j, float(P[i, j])
