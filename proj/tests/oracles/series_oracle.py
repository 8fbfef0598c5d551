"""Independent term-summation oracle for the heavy-level moment series.

Levels: value x_n = n / ln^2 n with probability p_n = 1/(2 n^2), n >= 2.
Reports partial sums of p_n * f(x_n) at decade checkpoints for
f(x) = x * ln^{1-eps}(1+x) (eps = 0.5) and f(x) = x * ln(1+x).
"""
import numpy as np

def partials(N, f, chunk=10_000_000):
    s = 0.0
    out = {}
    lo = 2
    checkpoints = [10 ** k for k in range(1, 10) if 10 ** k <= N]
    for hi in checkpoints:
        while lo <= hi:
            end = min(hi, lo + chunk - 1)
            n = np.arange(lo, end + 1, dtype=np.float64)
            x = n / np.log(n) ** 2
            s += float(np.sum(f(x) / (2.0 * n * n)))
            lo = end + 1
        out[hi] = s
    return out

g05 = lambda x: x * np.log1p(x) ** 0.5
xlog = lambda x: x * np.log1p(x)

for name, f in [("g_eps=0.5", g05), ("x*ln(1+x)", xlog)]:
    p = partials(10 ** 8, f)
    print(name)
    for k in sorted(p):
        print(f"  N=1e{int(np.log10(k))}  S={p[k]:.12f}")
    gap = (p[10 ** 8] - p[10 ** 6]) / p[10 ** 8]
    print(f"  rel gap 1e6 vs 1e8: {gap:.6%}")
    print(f"  growth 1e3 -> 1e6: {p[10 ** 6] - p[10 ** 3]:.10f}")
