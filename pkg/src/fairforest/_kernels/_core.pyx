# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernel backend.

Mirrors ``pure.py`` operation for operation and in the same arithmetic
order; both backends return bit-identical results.
"""

from libc.math cimport log2, INFINITY

import numpy as np

NAME = "compiled"

SPLIT = 0
LEAF = 1

CRIT_PLAIN = 0
CRIT_SUB = 1
CRIT_DIV = 2
CRIT_ADD = 3

# entropy gains below this are float residue of a mathematically zero gain;
# clamping keeps the fair_div guard stable (mirrors pure.GAIN_EPS)
GAIN_EPS = 1e-12
DEF _GAIN_EPS = 1e-12


cdef inline double _entropy2(long long a, long long b) nogil:
    if a == 0 or b == 0:
        return 0.0
    cdef double n = <double> (a + b)
    cdef double pa = (<double> a) / n
    cdef double pb = (<double> b) / n
    return -(pa * log2(pa) + pb * log2(pb))


cdef inline double _combine(double gain_y, double gain_s, int criterion) nogil:
    if criterion == 0:
        return gain_y
    if criterion == 1:
        return gain_y - gain_s
    if criterion == 2:
        return gain_y if gain_s == 0.0 else gain_y / gain_s
    return gain_y + gain_s


def entropy2(a, b):
    """Shannon entropy in bits of a two-class distribution given as counts."""
    return _entropy2(a, b)


def info_gain_counts(pn1, pn0, ln1, ln0, rn1, rn0):
    """Entropy gain of a two-way partition, from per-side class counts."""
    cdef long long n = pn1 + pn0
    cdef long long nl = ln1 + ln0
    cdef long long nr = rn1 + rn0
    cdef double g = (
        _entropy2(pn1, pn0)
        - ((<double> nl) / (<double> n)) * _entropy2(ln1, ln0)
        - ((<double> nr) / (<double> n)) * _entropy2(rn1, rn0)
    )
    return g if g > _GAIN_EPS else 0.0


def combine_gains(gain_y, gain_s, criterion):
    """Fold the class gain and the sensitive-attribute gain into one score."""
    if not 0 <= criterion <= 3:
        raise ValueError(f"unknown criterion code {criterion}")
    return _combine(gain_y, gain_s, criterion)


def scan_split(const double[::1] values, const unsigned char[::1] y,
               const unsigned char[::1] s, long long min_leaf, int criterion):
    """Best threshold for one feature column; see pure.scan_split."""
    cdef long long n = values.shape[0]
    cdef long long i, tot_y1 = 0, tot_s1 = 0
    cdef long long left_n = 0, left_y1 = 0, left_s1 = 0
    cdef long long right_n, right_y1, right_s1
    cdef double h_y, h_s = 0.0
    cdef double gy, gs, comb
    cdef double best_comb = -INFINITY, best_gy = 0.0, best_gs = 0.0, best_thr = 0.0
    cdef double dn
    cdef bint found = False

    with nogil:
        for i in range(n):
            tot_y1 += y[i]
            tot_s1 += s[i]
        h_y = _entropy2(tot_y1, n - tot_y1)
        if criterion != 0:
            h_s = _entropy2(tot_s1, n - tot_s1)
        dn = <double> n
        for i in range(n - 1):
            left_n += 1
            left_y1 += y[i]
            left_s1 += s[i]
            if not (values[i] < values[i + 1]):
                continue
            right_n = n - left_n
            if left_n < min_leaf or right_n < min_leaf:
                continue
            right_y1 = tot_y1 - left_y1
            gy = (
                h_y
                - ((<double> left_n) / dn) * _entropy2(left_y1, left_n - left_y1)
                - ((<double> right_n) / dn) * _entropy2(right_y1, right_n - right_y1)
            )
            if gy < _GAIN_EPS:
                gy = 0.0
            if criterion == 0:
                gs = 0.0
                comb = gy
            else:
                right_s1 = tot_s1 - left_s1
                gs = (
                    h_s
                    - ((<double> left_n) / dn) * _entropy2(left_s1, left_n - left_s1)
                    - ((<double> right_n) / dn) * _entropy2(right_s1, right_n - right_s1)
                )
                if gs < _GAIN_EPS:
                    gs = 0.0
                comb = _combine(gy, gs, criterion)
            if comb > best_comb:
                found = True
                best_comb = comb
                best_gy = gy
                best_gs = gs
                best_thr = (values[i] + values[i + 1]) / 2.0

    return bool(found), best_comb, best_gy, best_gs, best_thr


def route_batch(const unsigned char[::1] kind, const int[::1] feature,
                const double[::1] threshold, const int[::1] left,
                const int[::1] right, int root, const double[:, ::1] X):
    """Leaf ids reached by every row of ``X``; `<=` goes left."""
    cdef long long n = X.shape[0]
    out = np.empty(n, dtype=np.int32)
    cdef int[::1] ov = out
    cdef long long i
    cdef int node
    with nogil:
        for i in range(n):
            node = root
            while kind[node] == 0:
                if X[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            ov[i] = node
    return out
