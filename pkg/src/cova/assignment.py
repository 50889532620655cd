"""Minimum-cost bipartite assignment (Hungarian / Jonker-Volgenant style)."""

import numpy as np


def _jv(cost):
    """Potential-based shortest augmenting path solver for n <= m.

    Returns (total_cost, col_of_row list).
    """
    n, m = cost.shape
    INF = float("inf")
    u = [0.0] * (n + 1)
    v = [0.0] * (m + 1)
    p = [0] * (m + 1)  # p[j] = row (1-based) assigned to column j
    way = [0] * (m + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [INF] * (m + 1)
        used = [False] * (m + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = INF
            j1 = 0
            for j in range(1, m + 1):
                if used[j]:
                    continue
                cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(m + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    col_of_row = [-1] * n
    for j in range(1, m + 1):
        if p[j]:
            col_of_row[p[j] - 1] = j - 1
    total = sum(cost[i, col_of_row[i]] for i in range(n) if col_of_row[i] >= 0)
    return total, col_of_row


def _min_cost(cost):
    """Minimum total cost over all one-to-one assignments of min(n, m) pairs."""
    n, m = cost.shape
    if n == 0 or m == 0:
        return 0.0
    if n > m:
        cost = cost.T
    return _jv(cost)[0]


def hungarian(cost):
    """Optimal assignment of min(n, m) (row, col) pairs, minimizing total cost.

    Among cost-optimal assignments, returns the lexicographically smallest
    pair list (ordered by row, then column).
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise ValueError("cost matrix must be 2-D")
    if np.isnan(cost).any():
        raise ValueError("NaN in cost matrix")
    n, m = cost.shape
    k = min(n, m)
    if k == 0:
        return []

    target = _min_cost(cost)
    tol = 1e-9 * (1.0 + abs(target))
    avail = list(range(m))
    pairs = []
    acc = 0.0
    for r in range(n):
        if len(pairs) == k:
            break
        rows_rest = list(range(r + 1, n))
        for c in avail:
            cols_rest = [cc for cc in avail if cc != c]
            if rows_rest and cols_rest:
                rest = _min_cost(cost[np.ix_(rows_rest, cols_rest)])
            else:
                rest = 0.0
            if abs(acc + cost[r, c] + rest - target) <= tol:
                pairs.append((r, c))
                avail.remove(c)
                acc += cost[r, c]
                break
        # If no column keeps optimality, every optimal assignment skips row r
        # (possible only when n > m).
    return pairs
