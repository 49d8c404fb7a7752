"""Compiled inner loops.

Everything here works on plain float arrays; the public modules handle
validation and the SampledPath wrapping. Values are flattened to shape
(n, k) and distances are Euclidean (Frobenius for matrices).
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _dist(vals, i, j):
    s = 0.0
    for c in range(vals.shape[1]):
        d = vals[j, c] - vals[i, c]
        s += d * d
    return np.sqrt(s)


@njit(cache=True, nogil=True)
def pvar_prefix(vals, p, start, stop):
    """V[j - start] = max over grid partitions of [start, j] of sum |dx|^p."""
    m = stop - start + 1
    V = np.zeros(m)
    for j in range(start + 1, stop + 1):
        best = 0.0
        for i in range(start, j):
            cand = V[i - start] + _dist(vals, i, j) ** p
            if cand > best:
                best = cand
        V[j - start] = best
    return V


@njit(cache=True, nogil=True)
def pvar_scalar(x, p):
    """p-th power of the grid p-variation of a scalar sequence.

    Interior points of monotone runs never help when p >= 1, so only the
    endpoints and turning points enter the quadratic DP.
    """
    n = x.shape[0]
    if n < 2:
        return 0.0
    keep = np.empty(n, dtype=np.int64)
    m = 0
    keep[m] = 0
    m += 1
    for i in range(1, n - 1):
        a = x[i] - x[keep[m - 1]]
        b = x[i + 1] - x[i]
        if a == 0.0:
            continue
        if a * b < 0.0 or b == 0.0:
            keep[m] = i
            m += 1
    keep[m] = n - 1
    m += 1
    V = np.zeros(m)
    for j in range(1, m):
        best = 0.0
        xj = x[keep[j]]
        for i in range(j):
            cand = V[i] + abs(xj - x[keep[i]]) ** p
            if cand > best:
                best = cand
        V[j] = best
    return V[m - 1]


@njit(cache=True, nogil=True)
def holder_sup(times, vals, alpha, delta, start, stop):
    """max |x(t)-x(s)| / (t-s)^alpha over grid pairs with 0 < t-s <= delta."""
    best = 0.0
    for i in range(start, stop):
        for j in range(i + 1, stop + 1):
            h = times[j] - times[i]
            if h > delta:
                break
            r = _dist(vals, i, j) / h ** alpha
            if r > best:
                best = r
    return best


@njit(cache=True, nogil=True)
def greedy_next(times, vals, start, stop, p, budget, tol):
    """First grid index j > start with (t_j - t_start) + |||x|||_{p,[start,j]} >= budget.

    The left-hand side is nondecreasing in j, so the first crossing is the
    grid-restricted solution of the defining equality. Returns ``stop`` if
    the budget is never reached.
    """
    m = stop - start + 1
    V = np.zeros(m)
    for j in range(start + 1, stop + 1):
        best = 0.0
        for i in range(start, j):
            cand = V[i - start] + _dist(vals, i, j) ** p
            if cand > best:
                best = cand
        V[j - start] = best
        if (times[j] - times[start]) + best ** (1.0 / p) >= budget - tol:
            return j
    return stop


@njit(cache=True, nogil=True)
def _qvar_norm_diff(X, Y, q):
    # q-var seminorm of X - Y plus its value at the first node
    m = X.shape[0]
    k = X.shape[1] * X.shape[2]
    D = np.empty((m, k))
    for i in range(m):
        c = 0
        for r in range(X.shape[1]):
            for s in range(X.shape[2]):
                D[i, c] = X[i, r, s] - Y[i, r, s]
                c += 1
    V = pvar_prefix(D, q, 0, m - 1)
    head = 0.0
    for c in range(k):
        head += D[0, c] * D[0, c]
    return np.sqrt(head) + V[m - 1] ** (1.0 / q)


@njit(cache=True, nogil=True)
def picard_interval(G, xa, q, tol, max_iter):
    """Picard iteration of X_j = xa + sum_{i<j} G_i X_i on one interval.

    ``G`` has shape (m, d, d) with G_i = exp(M_i) - I the exact cell
    increment operator; ``xa`` has shape (d, k). The initial iterate is the
    constant path xa. Returns (X, iterations, distances) where distances
    holds the q-var norm of successive iterate differences.
    """
    m = G.shape[0]
    d = xa.shape[0]
    k = xa.shape[1]
    X = np.empty((m + 1, d, k))
    for j in range(m + 1):
        X[j] = xa
    dists = np.zeros(max_iter)
    scale = 0.0
    for r in range(d):
        for s in range(k):
            scale += xa[r, s] * xa[r, s]
    scale = max(np.sqrt(scale), 1e-300)
    Xn = np.empty_like(X)
    for it in range(max_iter):
        Xn[0] = xa
        acc = xa.copy()
        for i in range(m):
            acc += G[i] @ X[i]
            Xn[i + 1] = acc
        dist = _qvar_norm_diff(Xn, X, q)
        dists[it] = dist
        X, Xn = Xn, X
        if dist <= tol * scale:
            return X, it + 1, dists[: it + 1]
    return X, -1, dists


@njit(cache=True, nogil=True)
def picard_partition(G, bounds, x0, q, tol, max_iter):
    """Run ``picard_interval`` on consecutive cell ranges and chain the results.

    ``bounds`` holds the node indices tau_0 = 0 < tau_1 < ... < tau_N = m
    relative to the first node. Returns (X, iterations per interval,
    worst observed contraction ratio per interval). A negative iteration
    count marks an interval that did not converge.
    """
    m = G.shape[0]
    d = x0.shape[0]
    k = x0.shape[1]
    nint = bounds.shape[0] - 1
    X = np.empty((m + 1, d, k))
    iters = np.zeros(nint, dtype=np.int64)
    ratios = np.zeros(nint)
    xa = x0.copy()
    X[0] = xa
    for r in range(nint):
        a = bounds[r]
        b = bounds[r + 1]
        Xi, it, dists = picard_interval(G[a:b], xa, q, tol, max_iter)
        scale = 0.0
        for u in range(d):
            for v in range(k):
                scale += xa[u, v] * xa[u, v]
        floor = 1e-13 * np.sqrt(scale)
        worst = 0.0
        for s in range(1, dists.shape[0]):
            if dists[s - 1] > floor and dists[s] > floor:
                ratio = dists[s] / dists[s - 1]
                if ratio > worst:
                    worst = ratio
        iters[r] = it
        ratios[r] = worst
        for j in range(b - a + 1):
            X[a + j] = Xi[j]
        xa = Xi[b - a].copy()
    return X, iters, ratios
