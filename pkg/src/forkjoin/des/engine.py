"""Simulation driver, run record, and measurements over it.

The event loop itself lives in two interchangeable kernels: a compiled one
(``_cloop``) and a pure-Python one (``_pyloop``). The compiled kernel is used
when it imports; set ``FORKJOIN_BACKEND=python`` to force the fallback.
"""
from __future__ import annotations

import enum
import math
import os
from dataclasses import dataclass, field

import numpy as np

from ..errors import EmptyObservation, TooFewEvents
from ..params import NetworkParams, validate_params
from ..rng import RngStream, generate_arrival_times
from ..stats import IntervalSample
from . import _pyloop

try:
    from . import _cloop
except ImportError:  # pragma: no cover - depends on build
    _cloop = None

_KERNELS = {"python": _pyloop.simulate_events}
if _cloop is not None:
    _KERNELS["compiled"] = _cloop.simulate_events

BACKEND = os.environ.get("FORKJOIN_BACKEND") or ("compiled" if _cloop is not None else "python")
if BACKEND not in _KERNELS:
    raise ImportError(f"FORKJOIN_BACKEND={BACKEND!r} is not available (have {sorted(_KERNELS)})")

DEFAULT_WARMUP = 0.1


class EventKind(enum.IntEnum):
    """Event kinds; at equal timestamps lower values are processed first."""

    COMPLETION_A = _pyloop.COMPLETION_A
    COMPLETION_B = _pyloop.COMPLETION_B
    ARRIVAL = _pyloop.ARRIVAL


def available_backends() -> list[str]:
    return sorted(_KERNELS)


@dataclass(frozen=True)
class SimOutput:
    """Record of one run, restricted to jobs after the warmup prefix.

    ``occupancy_time[k]`` is the total time the synchronizer held ``k``
    unmatched partners, integrated from ``t_start`` (arrival of the first
    observed job) to ``t_end`` (the last pair departure).
    """

    in_trace: np.ndarray
    out_trace: np.ndarray
    sojourn_samples: np.ndarray
    occupancy_time: np.ndarray
    t_start: float
    t_end: float
    meta: dict = field(default_factory=dict)

    @property
    def total_sim_time(self) -> float:
        return self.t_end - self.t_start

    @property
    def jobs_completed(self) -> int:
        return len(self.out_trace)

    @property
    def final_occupancy(self) -> int:
        return len(self.in_trace) - len(self.out_trace)

    @property
    def mean_occupancy(self) -> float:
        k = np.arange(len(self.occupancy_time))
        return float(np.dot(k, self.occupancy_time) / self.total_sim_time)

    def summary(self) -> dict:
        tbar = mean_sojourn(self)
        lam_hat = self.jobs_completed / self.total_sim_time
        return {
            "jobs_completed": self.jobs_completed,
            "total_sim_time": self.total_sim_time,
            "t_start": self.t_start,
            "t_end": self.t_end,
            "rate_in": empirical_rate(self.in_trace),
            "rate_out": empirical_rate(self.out_trace),
            "mean_sojourn": tbar,
            "mean_occupancy": self.mean_occupancy,
            "rho": self.meta.get("lambda", lam_hat) * tbar,
            "rho_empirical_rate": lam_hat * tbar,
            "max_occupancy": len(self.occupancy_time) - 1,
        }


def simulate_from_times(arrivals, svc_a, svc_b, n_a: int, n_b: int, warmup_index: int = 0,
                        backend: str | None = None, meta: dict | None = None) -> SimOutput:
    """Run the event loop on injected arrival epochs and per-job service times."""
    arrivals = np.asarray(arrivals, dtype=np.float64)
    svc_a = np.asarray(svc_a, dtype=np.float64)
    svc_b = np.asarray(svc_b, dtype=np.float64)
    jobs = len(arrivals)
    if jobs < 1 or len(svc_a) != jobs or len(svc_b) != jobs:
        raise ValueError("arrivals, svc_a and svc_b must be non-empty and equally long")
    if np.any(np.diff(arrivals) < 0):
        raise ValueError("arrival times must be nondecreasing")
    if np.any(svc_a < 0) or np.any(svc_b < 0):
        raise ValueError("service times must be non-negative")
    if not 0 <= warmup_index < jobs:
        raise ValueError(f"warmup_index must be in [0, {jobs}), got {warmup_index}")
    kernel = _KERNELS[backend or BACKEND]
    in_tr, out_tr, soj, hist, t0, t1 = kernel(arrivals, svc_a, svc_b, int(n_a), int(n_b), int(warmup_index))
    return SimOutput(in_tr, out_tr, soj, hist, float(t0), float(t1), dict(meta or {}))


def run_simulation(p: NetworkParams, jobs: int, seed: int, warmup_fraction: float = DEFAULT_WARMUP,
                   backend: str | None = None) -> SimOutput:
    """Simulate ``jobs`` external arrivals through the network.

    Random inputs come from three streams of ``seed``: ``"arrivals"``,
    ``"service-a"`` and ``"service-b"``. The first
    ``floor(warmup_fraction * jobs)`` jobs are simulated but not recorded.
    """
    validate_params(p)
    if jobs < 1:
        raise ValueError(f"jobs must be >= 1, got {jobs}")
    if not 0.0 <= warmup_fraction < 1.0:
        raise ValueError(f"warmup_fraction must be in [0, 1), got {warmup_fraction}")
    arrivals = generate_arrival_times(p.lam, jobs, RngStream(seed, "arrivals"))
    svc_a = RngStream(seed, "service-a").exponentials(p.mu_a, jobs)
    svc_b = RngStream(seed, "service-b").exponentials(p.mu_b, jobs)
    meta = {**p.as_dict(), "jobs": jobs, "seed": int(seed), "warmup_fraction": warmup_fraction}
    return simulate_from_times(arrivals, svc_a, svc_b, p.n_a, p.n_b,
                               math.floor(warmup_fraction * jobs), backend=backend, meta=meta)


def extract_intervals(trace) -> IntervalSample:
    trace = np.asarray(trace, dtype=np.float64)
    if len(trace) < 2:
        raise TooFewEvents(f"need at least 2 timestamps, got {len(trace)}")
    return IntervalSample(np.diff(trace))


def empirical_rate(trace) -> float:
    """Events per unit time between the first and last timestamp."""
    if len(trace) < 2 or trace[-1] <= trace[0]:
        return math.nan
    return (len(trace) - 1) / float(trace[-1] - trace[0])


def occupancy_distribution(o: SimOutput) -> np.ndarray:
    """Time-weighted pmf of the synchronizer occupancy, indexed by ``k``."""
    total = float(np.sum(o.occupancy_time))
    if not total > 0:
        raise EmptyObservation("no observed time in the statistics window")
    return o.occupancy_time / total


def mean_sojourn(o: SimOutput) -> float:
    if len(o.sojourn_samples) == 0:
        raise EmptyObservation("no sojourn samples recorded")
    return float(np.mean(o.sojourn_samples))
