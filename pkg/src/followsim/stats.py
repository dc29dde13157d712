"""Two-sided Fisher exact test for 2x2 tables."""
from __future__ import annotations

import math

_REL_TOL = 1e-12


def _log_factorial(n: int) -> float:
    return math.lgamma(n + 1)


def _log_table_prob(a: int, r1: int, r2: int, c1: int, n: int) -> float:
    b, c = r1 - a, c1 - a
    d = r2 - c
    # fsum over the same multiset gives bit-identical results for mirrored
    # tables, so equal-probability tables compare equal.
    numer = math.fsum(_log_factorial(k) for k in sorted((r1, r2, c1, n - c1)))
    denom = math.fsum(_log_factorial(k) for k in sorted((n, a, b, c, d)))
    return numer - denom


def fisher_exact(a: int, b: int, c: int, d: int) -> float:
    """Two-sided p-value for the table [[a, b], [c, d]].

    Sums the hypergeometric probabilities of every table with the observed
    margins whose probability does not exceed the observed one.
    """
    for v in (a, b, c, d):
        if isinstance(v, bool) or int(v) != v or v < 0:
            raise ValueError("counts must be non-negative integers")
    a, b, c, d = int(a), int(b), int(c), int(d)
    r1, r2, c1 = a + b, c + d, a + c
    n = r1 + r2
    if r1 == 0 or r2 == 0 or c1 == 0 or c1 == n:
        return 1.0
    lo, hi = max(0, c1 - r2), min(r1, c1)
    logs = [_log_table_prob(k, r1, r2, c1, n) for k in range(lo, hi + 1)]
    observed = logs[a - lo]
    cutoff = observed + math.log1p(_REL_TOL)
    peak = max(logs)
    # Scale by the mode before exponentiating to avoid underflow.
    total = math.fsum(math.exp(x - peak) for x in logs)
    tail = math.fsum(math.exp(x - peak) for x in logs if x <= cutoff)
    return min(1.0, tail / total)
