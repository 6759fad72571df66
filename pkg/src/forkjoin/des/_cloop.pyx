# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled event loop; mirrors ``_pyloop.simulate_events`` exactly."""
import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, realloc, free
from libc.math cimport NAN, isnan

cnp.import_array()

cdef enum:
    COMPLETION_A = 0
    COMPLETION_B = 1
    ARRIVAL = 2

cdef struct Event:
    double time
    int kind
    Py_ssize_t job


cdef inline bint _less(Event* x, Event* y) nogil:
    if x.time != y.time:
        return x.time < y.time
    if x.kind != y.kind:
        return x.kind < y.kind
    return x.job < y.job


cdef inline void _push(Event* heap, Py_ssize_t* size, double time, int kind, Py_ssize_t job) nogil:
    cdef Py_ssize_t i = size[0]
    cdef Py_ssize_t parent
    cdef Event e
    e.time = time
    e.kind = kind
    e.job = job
    size[0] += 1
    while i > 0:
        parent = (i - 1) >> 1
        if _less(&e, &heap[parent]):
            heap[i] = heap[parent]
            i = parent
        else:
            break
    heap[i] = e


cdef inline Event _pop(Event* heap, Py_ssize_t* size) nogil:
    cdef Event top = heap[0]
    cdef Event moved
    cdef Py_ssize_t n, i, child
    size[0] -= 1
    n = size[0]
    if n > 0:
        moved = heap[n]
        i = 0
        while True:
            child = 2 * i + 1
            if child >= n:
                break
            if child + 1 < n and _less(&heap[child + 1], &heap[child]):
                child += 1
            if _less(&heap[child], &moved):
                heap[i] = heap[child]
                i = child
            else:
                break
        heap[i] = moved
    return top


def simulate_events(arrivals, svc_a, svc_b, int n_a, int n_b, Py_ssize_t warmup):
    cdef double[::1] arr = np.ascontiguousarray(arrivals, dtype=np.float64)
    cdef double[::1] sa = np.ascontiguousarray(svc_a, dtype=np.float64)
    cdef double[::1] sb = np.ascontiguousarray(svc_b, dtype=np.float64)
    cdef Py_ssize_t jobs = arr.shape[0]
    cdef Py_ssize_t n_obs = jobs - warmup

    in_np = np.empty(n_obs, dtype=np.float64)
    out_np = np.empty(n_obs, dtype=np.float64)
    soj_np = np.empty(n_obs, dtype=np.float64)
    first_np = np.full(jobs, np.nan, dtype=np.float64)
    cdef double[::1] in_trace = in_np
    cdef double[::1] out_trace = out_np
    cdef double[::1] sojourns = soj_np
    cdef double[::1] first = first_np
    cdef Py_ssize_t n_in = 0, n_out = 0

    cdef int cap[2]
    cdef int busy[2]
    cdef Py_ssize_t next_start[2]
    cap[0] = n_a
    cap[1] = n_b
    busy[0] = 0
    busy[1] = 0
    next_start[0] = 0
    next_start[1] = 0
    cdef Py_ssize_t arrived = 0

    cdef Py_ssize_t heap_size = 0
    cdef Event* heap = <Event*> malloc((n_a + n_b + 2) * sizeof(Event))
    cdef Py_ssize_t hist_len = 0, hist_cap = 64, h
    cdef double* hist = <double*> malloc(hist_cap * sizeof(double))
    if heap == NULL or hist == NULL:
        free(heap)
        free(hist)
        raise MemoryError()

    cdef Py_ssize_t occupancy = 0
    cdef double t_start = arr[warmup]
    cdef double last = t_start
    cdef double t, f
    cdef Event ev
    cdef int b, kind
    cdef Py_ssize_t j, k
    cdef double* new_hist

    _push(heap, &heap_size, arr[0], ARRIVAL, 0)
    try:
        while heap_size > 0:
            ev = _pop(heap, &heap_size)
            t = ev.time
            kind = ev.kind
            j = ev.job
            if t >= t_start:
                if occupancy >= hist_len:
                    if occupancy >= hist_cap:
                        while occupancy >= hist_cap:
                            hist_cap *= 2
                        new_hist = <double*> realloc(hist, hist_cap * sizeof(double))
                        if new_hist == NULL:
                            raise MemoryError()
                        hist = new_hist
                    for h in range(hist_len, occupancy + 1):
                        hist[h] = 0.0
                    hist_len = occupancy + 1
                hist[occupancy] += t - last
                last = t
            if kind == ARRIVAL:
                arrived = j + 1
                for b in range(2):
                    if busy[b] < cap[b]:
                        busy[b] += 1
                        next_start[b] = j + 1
                        _push(heap, &heap_size, t + (sa[j] if b == 0 else sb[j]), b, j)
                if j + 1 < jobs:
                    _push(heap, &heap_size, arr[j + 1], ARRIVAL, j + 1)
                continue

            b = kind
            busy[b] -= 1
            if next_start[b] < arrived:
                k = next_start[b]
                next_start[b] = k + 1
                busy[b] += 1
                _push(heap, &heap_size, t + (sa[k] if b == 0 else sb[k]), b, k)

            f = first[j]
            if isnan(f):
                first[j] = t
                occupancy += 1
                if j >= warmup:
                    in_trace[n_in] = t
                    n_in += 1
            else:
                first[j] = NAN
                occupancy -= 1
                if j >= warmup:
                    out_trace[n_out] = t
                    sojourns[n_out] = t - f
                    n_out += 1

        assert occupancy == 0, "synchronizer not drained"
        assert busy[0] == 0 and busy[1] == 0, "branch not drained"
        assert next_start[0] == jobs and next_start[1] == jobs, "branch not drained"
        assert n_in == n_obs and n_out == n_obs, "pair count mismatch"
        hist_np = np.array(<double[:hist_len]> hist, copy=True) if hist_len > 0 else np.empty(0)
    finally:
        free(heap)
        free(hist)
    return in_np, out_np, soj_np, hist_np, t_start, last
