"""Minimum-cost linear assignment (Kuhn-Munkres with potentials).

The solver pads rectangular inputs to a square matrix, runs the classic
O(n^3) shortest-augmenting-path Hungarian method, then uses the dual
potentials to pick, among all optimal assignments, the one whose sorted
(row, col) pair list is lexicographically smallest.
"""
from __future__ import annotations

import math
from typing import List, Sequence, Tuple

Pair = Tuple[int, int]

_TIGHT_RTOL = 1e-12


def _solve_square(a: List[List[float]]) -> Tuple[List[int], List[float], List[float]]:
    """Return (col_of_row, u, v) for a square cost matrix."""
    n = len(a)
    inf = math.inf
    # 1-based arrays with a virtual column 0, as in the textbook formulation.
    u = [0.0] * (n + 1)
    v = [0.0] * (n + 1)
    p = [0] * (n + 1)
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [inf] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = inf
            j1 = 0
            row = a[i0 - 1]
            ui0 = u[i0]
            for j in range(1, n + 1):
                if not used[j]:
                    cur = row[j - 1] - ui0 - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    col_of_row = [0] * n
    for j in range(1, n + 1):
        col_of_row[p[j] - 1] = j - 1
    return col_of_row, u[1:], v[1:]


def _has_perfect_matching(adj: List[List[int]], rows: Sequence[int], free_cols: set) -> bool:
    match_col = {}

    def augment(r: int, seen: set) -> bool:
        for c in adj[r]:
            if c in free_cols and c not in seen:
                seen.add(c)
                if c not in match_col or augment(match_col[c], seen):
                    match_col[c] = r
                    return True
        return False

    return all(augment(r, set()) for r in rows)


def _lexicographic_optimum(a: List[List[float]], u: List[float], v: List[float]) -> List[int]:
    n = len(a)
    scale = max(1.0, max(abs(x) for row in a for x in row))
    tol = _TIGHT_RTOL * scale
    adj = [[j for j in range(n) if abs(a[i][j] - u[i] - v[j]) <= tol] for i in range(n)]
    free = set(range(n))
    chosen = []
    for i in range(n):
        for j in adj[i]:
            if j not in free:
                continue
            free.discard(j)
            if _has_perfect_matching(adj, range(i + 1, n), free):
                chosen.append(j)
                break
            free.add(j)
        else:
            return []
    return chosen


def hungarian(cost: Sequence[Sequence[float]]) -> List[Pair]:
    """Optimal assignment of ``min(n, m)`` (row, col) pairs, sorted by row."""
    n = len(cost)
    m = len(cost[0]) if n else 0
    if n == 0 or m == 0:
        return []
    k = max(n, m)
    # Dummy rows/columns cost 0; real columns come first so that, on ties,
    # a real row prefers a real column over being left unassigned.
    a = [[float(cost[i][j]) if (i < n and j < m) else 0.0 for j in range(k)] for i in range(k)]
    for row in a:
        for x in row:
            if not math.isfinite(x):
                raise ValueError("cost matrix must be finite; gate with a large sentinel instead")
    col_of_row, u, v = _solve_square(a)
    lex = _lexicographic_optimum(a, u, v)
    if lex:
        total_lex = math.fsum(a[i][lex[i]] for i in range(k))
        total_raw = math.fsum(a[i][col_of_row[i]] for i in range(k))
        # Both are optimal up to rounding; never trade cost for ordering.
        if total_lex <= total_raw:
            col_of_row = lex
    return [(i, col_of_row[i]) for i in range(n) if col_of_row[i] < m]


def assignment_cost(cost: Sequence[Sequence[float]], pairs: Sequence[Pair]) -> float:
    return math.fsum(cost[r][c] for r, c in pairs)
