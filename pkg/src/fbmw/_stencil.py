"""Sparse scaling iterations for entropic transport between periodic grid measures.

The plan is restricted to moves within a ball of ``radius`` cells. ``outside_mass``
certifies the restriction afterwards: it is the mass the unrestricted Gibbs kernel
would put on the excluded pairs at the final potentials.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit


def stencil(m: int, d: int, radius: int, p: float):
    """Flat periodic neighbour table (n, k) and the cost of each offset."""
    h = m // 2
    r = np.arange(-h, m - h)
    r = r[np.abs(r) <= radius]
    offs = np.array(np.meshgrid(*([r] * d), indexing="ij")).reshape(d, -1).T
    offs = offs[(offs**2).sum(1) <= radius * radius]
    cost = (np.sqrt((offs**2).sum(1)) / m) ** p
    idx = np.array(np.meshgrid(*([np.arange(m)] * d), indexing="ij")).reshape(d, -1).T
    nb = (idx[:, None, :] + offs[None, :, :]) % m
    flat = np.zeros(nb.shape[:2], dtype=np.int64)
    for j in range(d):
        flat = flat * m + nb[..., j]
    return flat, cost


@njit(cache=True)
def _gibbs(f, g, nbr, cost, reg, Kt):
    n, k = nbr.shape
    for x in range(n):
        for s in range(k):
            Kt[x, s] = math.exp((f[x] + g[nbr[x, s]] - cost[s]) / reg)


@njit(cache=True)
def _row_error(a, u, v, Kt, nbr):
    n, k = nbr.shape
    err = 0.0
    for x in range(n):
        acc = 0.0
        for s in range(k):
            acc += Kt[x, s] * v[nbr[x, s]]
        err += abs(u[x] * acc - a[x])
    return err


@njit(cache=True)
def sinkhorn(a, b, nbr, cost, reg, f, g, max_iter, tol, omega, absorb=30.0, stall=2000):
    """Over-relaxed scaling updates; f and g are updated in place.

    Returns (transport cost of the plan, L1 row-marginal error, iterations).
    """
    n, k = nbr.shape
    Kt = np.empty((n, k))
    _gibbs(f, g, nbr, cost, reg, Kt)
    u = np.ones(n)
    v = np.ones(n)
    col = np.empty(n)
    err = np.inf
    best = np.inf
    best_it = 0
    it = 0
    while it < max_iter:
        it += 1
        big = 0.0
        for x in range(n):
            if a[x] <= 0.0:
                u[x] = 0.0
                continue
            acc = 0.0
            for s in range(k):
                acc += Kt[x, s] * v[nbr[x, s]]
            u[x] = u[x] ** (1.0 - omega) * (a[x] / acc) ** omega if acc > 0.0 else 1e300
            big = max(big, abs(math.log(u[x])))
        col[:] = 0.0
        for x in range(n):
            if u[x] != 0.0:
                for s in range(k):
                    col[nbr[x, s]] += Kt[x, s] * u[x]
        for y in range(n):
            if b[y] <= 0.0:
                v[y] = 0.0
                continue
            v[y] = v[y] ** (1.0 - omega) * (b[y] / col[y]) ** omega if col[y] > 0.0 else 1e300
            big = max(big, abs(math.log(v[y])))
        if not math.isfinite(big):
            return np.nan, np.inf, it
        if big > absorb:
            for x in range(n):
                if a[x] > 0.0:
                    f[x] += reg * math.log(u[x])
                if b[x] > 0.0:
                    g[x] += reg * math.log(v[x])
            _gibbs(f, g, nbr, cost, reg, Kt)
            u[:] = 1.0
            v[:] = 1.0
        if it % 10 == 0:
            err = _row_error(a, u, v, Kt, nbr)
            if err < tol:
                break
            if err < 0.5 * best:
                best = err
                best_it = it
            # over-relaxation can oscillate instead of converging; let the caller fall back
            if omega != 1.0 and (not math.isfinite(err) or it - best_it > stall):
                return np.nan, np.inf, it
    err = _row_error(a, u, v, Kt, nbr)
    tot = 0.0
    for x in range(n):
        for s in range(k):
            tot += u[x] * Kt[x, s] * v[nbr[x, s]] * cost[s]
    for x in range(n):
        if a[x] > 0.0:
            f[x] += reg * math.log(u[x])
        if b[x] > 0.0:
            g[x] += reg * math.log(v[x])
    return tot, err, it


@njit(cache=True)
def outside_mass(a, b, f, g, m, d, radius, p, reg):
    n = a.size
    r2 = radius * radius
    coords = np.empty((n, d), dtype=np.int64)
    for x in range(n):
        q = x
        for j in range(d - 1, -1, -1):
            coords[x, j] = q % m
            q //= m
    tot = 0.0
    for x in range(n):
        if a[x] <= 0.0:
            continue
        for y in range(n):
            if b[y] <= 0.0:
                continue
            s2 = 0
            for j in range(d):
                o = abs(coords[x, j] - coords[y, j])
                o = min(o, m - o)
                s2 += o * o
            if s2 > r2:
                c = (math.sqrt(s2) / m) ** p
                tot += math.exp((f[x] + g[y] - c) / reg)
    return tot
