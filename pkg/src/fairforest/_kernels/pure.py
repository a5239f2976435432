"""Pure-Python kernel backend.

Reference implementation of the hot loops. The compiled backend in
``_core.pyx`` mirrors this module operation for operation, in the same
arithmetic order, so both backends return bit-identical results; the
cross-backend tests assert exact equality.
"""

import math

import numpy as np

NAME = "pure"

SPLIT = 0
LEAF = 1

CRIT_PLAIN = 0
CRIT_SUB = 1
CRIT_DIV = 2
CRIT_ADD = 3

# entropy gains below this are float residue of a mathematically zero gain
# (true nonzero gains from integer counts are orders of magnitude larger);
# clamping keeps the fair_div guard stable
GAIN_EPS = 1e-12


def entropy2(a, b):
    """Shannon entropy in bits of a two-class distribution given as counts."""
    if a == 0 or b == 0:
        return 0.0
    n = a + b
    pa = a / n
    pb = b / n
    return -(pa * math.log2(pa) + pb * math.log2(pb))


def info_gain_counts(pn1, pn0, ln1, ln0, rn1, rn0):
    """Entropy gain of a two-way partition, from per-side class counts.

    Degenerate partitions (an empty side) gain 0; tiny negative values
    from rounding are clamped to 0.
    """
    n = pn1 + pn0
    nl = ln1 + ln0
    nr = rn1 + rn0
    g = entropy2(pn1, pn0) - (nl / n) * entropy2(ln1, ln0) - (nr / n) * entropy2(rn1, rn0)
    return g if g > GAIN_EPS else 0.0


def combine_gains(gain_y, gain_s, criterion):
    """Fold the class gain and the sensitive-attribute gain into one score."""
    if criterion == CRIT_PLAIN:
        return gain_y
    if criterion == CRIT_SUB:
        return gain_y - gain_s
    if criterion == CRIT_DIV:
        # a split that carries no sensitive information keeps its class gain
        return gain_y if gain_s == 0.0 else gain_y / gain_s
    if criterion == CRIT_ADD:
        return gain_y + gain_s
    raise ValueError(f"unknown criterion code {criterion}")


def scan_split(values, y, s, min_leaf, criterion):
    """Best threshold for one feature column.

    ``values`` must be sorted ascending with ``y``/``s`` in the same order.
    Candidate thresholds are midpoints between consecutive distinct values;
    boundaries that would leave fewer than ``min_leaf`` rows on a side are
    skipped. Returns ``(found, combined, gain_y, gain_s, threshold)``.
    """
    n = len(values)
    tot_y1 = 0
    tot_s1 = 0
    for i in range(n):
        tot_y1 += int(y[i])
        tot_s1 += int(s[i])
    h_y = entropy2(tot_y1, n - tot_y1)
    h_s = entropy2(tot_s1, n - tot_s1) if criterion != CRIT_PLAIN else 0.0

    found = False
    best_comb = -math.inf
    best_gy = 0.0
    best_gs = 0.0
    best_thr = 0.0
    left_n = 0
    left_y1 = 0
    left_s1 = 0
    for i in range(n - 1):
        left_n += 1
        left_y1 += int(y[i])
        left_s1 += int(s[i])
        if not (values[i] < values[i + 1]):
            continue
        right_n = n - left_n
        if left_n < min_leaf or right_n < min_leaf:
            continue
        right_y1 = tot_y1 - left_y1
        gy = (
            h_y
            - (left_n / n) * entropy2(left_y1, left_n - left_y1)
            - (right_n / n) * entropy2(right_y1, right_n - right_y1)
        )
        if gy < GAIN_EPS:
            gy = 0.0
        if criterion == CRIT_PLAIN:
            gs = 0.0
            comb = gy
        else:
            right_s1 = tot_s1 - left_s1
            gs = (
                h_s
                - (left_n / n) * entropy2(left_s1, left_n - left_s1)
                - (right_n / n) * entropy2(right_s1, right_n - right_s1)
            )
            if gs < GAIN_EPS:
                gs = 0.0
            comb = combine_gains(gy, gs, criterion)
        if comb > best_comb:
            found = True
            best_comb = comb
            best_gy = gy
            best_gs = gs
            best_thr = (values[i] + values[i + 1]) / 2.0
    return found, best_comb, best_gy, best_gs, best_thr


def route_batch(kind, feature, threshold, left, right, root, X):
    """Leaf ids reached by every row of ``X``; `<=` goes left.

    Level-synchronous descent: integer comparisons only, so the result is
    identical to the compiled per-row loop.
    """
    n = X.shape[0]
    out = np.full(n, root, dtype=np.int32)
    active = np.nonzero(kind[out] == SPLIT)[0]
    while active.size:
        nodes = out[active]
        f = feature[nodes]
        go_left = X[active, f] <= threshold[nodes]
        out[active] = np.where(go_left, left[nodes], right[nodes])
        active = active[kind[out[active]] == SPLIT]
    return out
