"""Analytic double-sum oracle for exceedance-cell expected counts.

For window [m, N)^2 with m = ceil(ln N), a cell (i, j) exceeds budget B when
some level n with x_n = n/ln^2 n >= B*i*j fires (p_n = 1/(2n^2)); the expected
count is  sum_{i,j} q(B*i*j)  with q(t) = sum of p_n over {n : x_n >= t},
summed to infinity via the exact trigamma tail.
"""
import numpy as np
from math import ceil, log
from scipy.special import polygamma

def level_inverse(t):
    """Smallest n >= 8 on the increasing branch with x_n >= t (vectorized)."""
    t = np.asarray(t, dtype=np.float64)
    n = np.maximum(8.0, t * np.log(np.maximum(t, 8.0)) ** 2)
    for _ in range(12):
        n = np.maximum(8.0, t * np.log(n) ** 2)
    m = np.floor(n).astype(np.int64)
    for _ in range(4):  # integer adjustment
        m = np.where(m / np.log(m) ** 2 < t, m + 1, m)
        down_ok = (m > 8) & ((m - 1) / np.log(m - 1) ** 2 >= t)
        m = np.where(down_ok, m - 1, m)
    return np.maximum(m, 8)

def q(t):
    t = np.asarray(t, dtype=np.float64)
    s = 0.5 * polygamma(1, level_inverse(t))
    for n in range(2, 8):
        s = s + np.where(n / log(n) ** 2 >= t, 0.5 / n ** 2, 0.0)
    return s

def expected_count(N, B):
    m = ceil(log(N))
    j = np.arange(m, N, dtype=np.float64)
    total = 0.0
    for i in range(m, N):
        total += float(np.sum(q(B * i * j)))
    return total

for B in (1.0, 4.0, 16.0):
    e3 = expected_count(1000, B)
    e4 = expected_count(10000, B)
    print(f"B={B:g}  E(1e3)={e3:.6f}  E(1e4)={e4:.6f}  ratio={e4 / e3:.4f}")
