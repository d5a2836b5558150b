"""Pure-numpy split-scan kernel: the fallback backend.

Contract (shared with the compiled kernel in ``_scan_cy.pyx``): for every
level-local node slot, find the best (gain, feature, threshold) over exact
greedy enumeration of all midpoints between consecutive distinct sorted
feature values. Both kernels must produce bit-identical outputs, so the
accumulation order (per-slot prefix sums in value order) and the gain
expression are kept structurally identical; ties in gain resolve to the
lower feature index, then the lower threshold.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def scan_level(X, sorted_idx, node_slot, g, h, G, H, n_slots,
               reg_lambda, gamma, min_child_weight, col_subset):
    """Best split per node slot.

    Parameters
    ----------
    X : (n, p) float64, feature matrix
    sorted_idx : (p, n) int32, rows of each column in ascending value order
    node_slot : (n,) int32, level-local slot per row; -1 = not participating
    g, h : (n,) float64, gradient and hessian per row
    G, H : (n_slots,) float64, canonical per-slot totals
    col_subset : (q,) int32, feature indices to scan, ascending

    Returns
    -------
    best_gain (n_slots,) f8, best_feat (n_slots,) i4 (-1 = none),
    best_thr (n_slots,) f8
    """
    best_gain = np.zeros(n_slots)
    best_feat = np.full(n_slots, -1, dtype=np.int32)
    best_thr = np.zeros(n_slots)

    parent = np.empty(n_slots)
    np.divide(G * G, H + reg_lambda, out=parent,
              where=(H + reg_lambda) != 0)
    parent[(H + reg_lambda) == 0] = 0.0

    for f in col_subset:
        order = sorted_idx[f]
        slots = node_slot[order]
        active = slots >= 0
        rows = order[active]
        slot_of = slots[active]
        if len(rows) == 0:
            continue
        # stable sort groups rows by slot while preserving value order
        grouping = np.argsort(slot_of, kind="stable")
        rows = rows[grouping]
        slot_sorted = slot_of[grouping]
        starts = np.searchsorted(slot_sorted, np.arange(n_slots), side="left")
        ends = np.searchsorted(slot_sorted, np.arange(n_slots), side="right")
        for s in range(n_slots):
            lo, hi = starts[s], ends[s]
            if hi - lo < 2:
                continue
            rr = rows[lo:hi]
            v = X[rr, f]
            gl = np.cumsum(g[rr])[:-1]
            hl = np.cumsum(h[rr])[:-1]
            cand = v[1:] > v[:-1]
            if not cand.any():
                continue
            hr = H[s] - hl
            valid = cand & (hl >= min_child_weight) & (hr >= min_child_weight)
            if not valid.any():
                continue
            gr = G[s] - gl
            with np.errstate(divide="ignore", invalid="ignore"):
                gain = 0.5 * (gl * gl / (hl + reg_lambda)
                              + gr * gr / (hr + reg_lambda)
                              - parent[s]) - gamma
            # NaN gains (0/0 at lambda=0) must lose, as in the compiled scan
            gain = np.where(valid & ~np.isnan(gain), gain, -np.inf)
            i = int(np.argmax(gain))
            if gain[i] > best_gain[s]:
                thr = 0.5 * (v[i] + v[i + 1])
                if thr <= v[i]:
                    thr = v[i + 1]
                best_gain[s] = gain[i]
                best_feat[s] = f
                best_thr[s] = thr
    return best_gain, best_feat, best_thr
