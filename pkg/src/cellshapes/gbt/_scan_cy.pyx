# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled split-scan kernel: the hot inner loop of tree growth.

Bit-for-bit equivalent to ``_scan_py.scan_level``: per-slot prefix sums
accumulate in the same (value-sorted) order, the gain expression is the same
IEEE operation tree, and ties resolve identically (strictly-greater updates
walking features in ascending order and candidates in value order). The
build deliberately disables floating-point contraction so no FMA creeps in.
"""

import numpy as np

BACKEND = "cython"


def scan_level(double[:, ::1] X, int[:, ::1] sorted_idx, int[::1] node_slot,
               double[::1] g, double[::1] h, double[::1] G, double[::1] H,
               int n_slots, double reg_lambda, double gamma,
               double min_child_weight, int[::1] col_subset):
    """Best (gain, feature, threshold) per node slot; see _scan_py for the
    parameter contract."""
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t n_cols = col_subset.shape[0]

    best_gain_arr = np.zeros(n_slots, dtype=np.float64)
    best_feat_arr = np.full(n_slots, -1, dtype=np.int32)
    best_thr_arr = np.zeros(n_slots, dtype=np.float64)
    parent_arr = np.empty(n_slots, dtype=np.float64)
    gl_arr = np.zeros(n_slots, dtype=np.float64)
    hl_arr = np.zeros(n_slots, dtype=np.float64)
    prev_arr = np.zeros(n_slots, dtype=np.float64)
    started_arr = np.zeros(n_slots, dtype=np.uint8)

    cdef double[::1] best_gain = best_gain_arr
    cdef int[::1] best_feat = best_feat_arr
    cdef double[::1] best_thr = best_thr_arr
    cdef double[::1] parent = parent_arr
    cdef double[::1] gl = gl_arr
    cdef double[::1] hl = hl_arr
    cdef double[::1] prev = prev_arr
    cdef unsigned char[::1] started = started_arr

    cdef Py_ssize_t fi, p, s
    cdef int f, r
    cdef double v, thr, hls, hrs, gls, grs, gain, denom

    for s in range(n_slots):
        denom = H[s] + reg_lambda
        parent[s] = (G[s] * G[s] / denom) if denom != 0.0 else 0.0

    for fi in range(n_cols):
        f = col_subset[fi]
        for s in range(n_slots):
            gl[s] = 0.0
            hl[s] = 0.0
            started[s] = 0
        for p in range(n):
            r = sorted_idx[f, p]
            s = node_slot[r]
            if s < 0:
                continue
            v = X[r, f]
            if started[s] and v > prev[s]:
                hls = hl[s]
                hrs = H[s] - hls
                if hls >= min_child_weight and hrs >= min_child_weight:
                    gls = gl[s]
                    grs = G[s] - gls
                    gain = 0.5 * (gls * gls / (hls + reg_lambda)
                                  + grs * grs / (hrs + reg_lambda)
                                  - parent[s]) - gamma
                    if gain > best_gain[s]:
                        thr = 0.5 * (prev[s] + v)
                        if thr <= prev[s]:
                            thr = v
                        best_gain[s] = gain
                        best_feat[s] = f
                        best_thr[s] = thr
            gl[s] += g[r]
            hl[s] += h[r]
            prev[s] = v
            started[s] = 1
    return best_gain_arr, best_feat_arr, best_thr_arr
