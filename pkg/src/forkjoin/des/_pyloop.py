"""Reference event loop in pure Python.

The compiled kernel in ``_cloop.pyx`` follows this loop statement by statement
so both backends perform the same floating-point operations in the same order.
"""
from __future__ import annotations

import heapq

import numpy as np

# event kinds; the numeric order is the tie-break order at equal timestamps
COMPLETION_A = 0
COMPLETION_B = 1
ARRIVAL = 2


def simulate_events(arrivals, svc_a, svc_b, n_a: int, n_b: int, warmup: int):
    """Run the fork -> (M/M/n_a, M/M/n_b) -> synchronizer event loop.

    ``svc_a[i]``/``svc_b[i]`` is the service time job ``i`` receives in each
    branch. FIFO with in-order arrivals means jobs enter service in index
    order, so pre-drawn arrays are equivalent to drawing at service start.

    Returns ``(in_trace, out_trace, sojourns, occupancy_time, t_start, t_end)``.
    """
    arr = [float(x) for x in arrivals]
    sa = [float(x) for x in svc_a]
    sb = [float(x) for x in svc_b]
    jobs = len(arr)
    cap = (n_a, n_b)
    svc = (sa, sb)
    busy = [0, 0]
    next_start = [0, 0]
    arrived = 0

    first: list = [None] * jobs
    occupancy = 0
    hist: list[float] = []
    t_start = arr[warmup]
    last = t_start
    t = t_start
    in_trace: list[float] = []
    out_trace: list[float] = []
    sojourns: list[float] = []

    heap = [(arr[0], ARRIVAL, 0)]
    push, pop = heapq.heappush, heapq.heappop
    while heap:
        t, kind, j = pop(heap)
        if t >= t_start:
            if occupancy >= len(hist):
                hist.extend([0.0] * (occupancy + 1 - len(hist)))
            hist[occupancy] += t - last
            last = t
        if kind == ARRIVAL:
            arrived = j + 1
            for b in (0, 1):
                if busy[b] < cap[b]:
                    busy[b] += 1
                    next_start[b] = j + 1
                    push(heap, (t + svc[b][j], b, j))
            if j + 1 < jobs:
                push(heap, (arr[j + 1], ARRIVAL, j + 1))
            continue

        b = kind
        busy[b] -= 1
        if next_start[b] < arrived:
            k = next_start[b]
            next_start[b] = k + 1
            busy[b] += 1
            push(heap, (t + svc[b][k], b, k))

        f = first[j]
        if f is None:
            first[j] = t
            occupancy += 1
            if j >= warmup:
                in_trace.append(t)
        else:
            first[j] = None
            occupancy -= 1
            if j >= warmup:
                out_trace.append(t)
                sojourns.append(t - f)

    assert occupancy == 0, "synchronizer not drained"
    assert busy == [0, 0] and next_start == [jobs, jobs], "branch not drained"
    return (np.array(in_trace), np.array(out_trace), np.array(sojourns),
            np.array(hist), t_start, last)
