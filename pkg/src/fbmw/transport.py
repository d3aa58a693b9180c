"""Wasserstein distances between grid measures on the flat torus."""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass

import numpy as np
from scipy import special

from . import _stencil
from .occupation import GridMeasure, SpectralOccupation, spectrum_of_points
from .spectral import center, default_cutoff, grad_l2_norm, grad_lp_norm, heat_smooth, poisson_gradient

EXACT_BUDGET = 4096

# keep POT from importing every tensor framework in the environment
for _backend in ("TENSORFLOW", "PYTORCH", "JAX", "CUPY"):
    os.environ.setdefault(f"POT_BACKEND_DISABLE_{_backend}", "1")


class BudgetExceeded(ValueError):
    """Support too large for the exact solver; use :func:`wasserstein_entropic`."""


class NotConverged(RuntimeError):
    def __init__(self, msg, marginal_error):
        super().__init__(f"{msg} (marginal error {marginal_error:.3e})")
        self.marginal_error = marginal_error


def torus_displacement(x, y):
    """Per-axis displacement wrapped into [-1/2, 1/2]."""
    dlt = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    return dlt - np.round(dlt)


def torus_distance(x, y):
    dist = np.sqrt(np.sum(torus_displacement(x, y) ** 2, axis=-1))
    return float(dist) if np.ndim(dist) == 0 else dist


def cost_matrix(xs, ys, p):
    xs = np.atleast_2d(xs)
    ys = np.atleast_2d(ys)
    D = torus_distance(xs[:, None, :], ys[None, :, :])
    return np.ascontiguousarray(D**p)


@dataclass(frozen=True)
class TransportPlan:
    """Sparse coupling between flat cell indices."""

    src: np.ndarray
    dst: np.ndarray
    mass: np.ndarray
    cost: np.ndarray
    p: float

    def marginals(self, size):
        a = np.bincount(self.src, weights=self.mass, minlength=size)
        b = np.bincount(self.dst, weights=self.mass, minlength=size)
        return a, b

    def total_cost(self) -> float:
        return float(np.sum(self.mass * self.cost))

    def write_csv(self, fh) -> None:
        fh.write("src_cell,dst_cell,mass,cost\n")
        for s, t, w, c in zip(self.src, self.dst, self.mass, self.cost):
            fh.write(f"{s},{t},{w:.17g},{c:.17g}\n")


def _check_pair(mu: GridMeasure, nu: GridMeasure, rtol=1e-9):
    if mu.masses.shape != nu.masses.shape:
        raise ValueError("measures live on different grids")
    a, b = mu.total_mass, nu.total_mass
    if abs(a - b) > rtol * max(a, b):
        raise ValueError(f"total masses differ: {a!r} vs {b!r}")


def _ot():
    import ot

    return ot


def wasserstein_exact(mu: GridMeasure, nu: GridMeasure, p: float = 1.0, budget: int = EXACT_BUDGET):
    """Exact W_p via network simplex on cell centers; returns ``(W_p, plan)``."""
    if p < 1:
        raise ValueError("p must be >= 1")
    _check_pair(mu, nu)
    a = mu.masses.reshape(-1)
    b = nu.masses.reshape(-1)
    si = np.flatnonzero(a > 0)
    ti = np.flatnonzero(b > 0)
    if len(np.union1d(si, ti)) > budget:
        raise BudgetExceeded(f"combined support {len(np.union1d(si, ti))} exceeds {budget}; use the entropic solver")
    if len(si) == 0:
        empty = np.zeros(0, dtype=int)
        return 0.0, TransportPlan(empty, empty, np.zeros(0), np.zeros(0), p)
    centers = mu.centers()
    C = cost_matrix(centers[si], centers[ti], p)
    total = a.sum()
    # work with probabilities; W_p^p is linear in mass
    aa = a[si] / total
    bb = b[ti] / b.sum()
    G, log = _ot().emd(aa, bb, C, numItermax=10_000_000, log=True)
    if log.get("warning"):
        raise NotConverged(f"network simplex: {log['warning']}", float("nan"))
    r, c = np.nonzero(G > 0)
    mass = G[r, c] * total
    cost = C[r, c]
    value = float(np.sum(G[r, c] * cost)) * total
    plan = TransportPlan(si[r], ti[c], mass, cost, p)
    return max(value, 0.0) ** (1.0 / p), plan


# ---------------------------------------------------------------- entropic


def _sinkhorn_stabilized(a, b, C, reg, f, g, max_iter, tol, absorb=50.0, omega=1.0):
    """Scaling iterations on exp((f + g - C)/reg), folding large scalings back into f, g.

    ``omega`` > 1 over-relaxes each update in log space. ``a`` and ``b`` must be strictly
    positive. Returns potentials, plan and marginal error.
    """
    Kt = np.exp((f[:, None] + g[None, :] - C) / reg)
    u = np.ones_like(a)
    v = np.ones_like(b)
    err = np.inf
    for it in range(max_iter):
        if omega == 1.0:
            u = a / np.maximum(Kt @ v, 1e-300)
            v = b / np.maximum(Kt.T @ u, 1e-300)
        else:
            with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
                u = u ** (1 - omega) * (a / np.maximum(Kt @ v, 1e-300)) ** omega
                v = v ** (1 - omega) * (b / np.maximum(Kt.T @ u, 1e-300)) ** omega
            if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
                return f, g, None, np.inf
        if max(np.abs(np.log(u)).max(), np.abs(np.log(v)).max()) > absorb:
            f = f + reg * np.log(u)
            g = g + reg * np.log(v)
            Kt = np.exp((f[:, None] + g[None, :] - C) / reg)
            u[:] = 1.0
            v[:] = 1.0
        if it % 10 == 9 or it == max_iter - 1:
            err = float(np.sum(np.abs(u * (Kt @ v) - a)))
            if err < tol:
                break
    f = f + reg * np.log(u)
    g = g + reg * np.log(v)
    plan = u[:, None] * Kt * v[None, :]
    return f, g, plan, err


def _ot_dense(a, b, C, reg, max_iter, tol, schedule, omega=1.5):
    """Transport cost of the entropic plan, with a geometric reg schedule ending at ``reg``.

    Runs over-relaxed first and repeats with plain updates if that does not converge.
    """
    si = a > 0
    ti = b > 0
    a, b, C = a[si], b[ti], C[np.ix_(si, ti)]
    regs = [reg]
    if schedule:
        r = 0.1 * float(C.max())
        regs = []
        while r > reg:
            regs.append(r)
            r /= 2
        regs.append(reg)
    for w in dict.fromkeys((omega, 1.0)):
        f = np.zeros_like(a)
        g = np.zeros_like(b)
        for i, r in enumerate(regs):
            last = i == len(regs) - 1
            f, g, plan, err = _sinkhorn_stabilized(a, b, C, r, f, g, max_iter, tol if last else max(tol, 1e-5), omega=w)
            if plan is None:
                break
        if err < tol:
            return float(np.sum(plan * C))
    raise NotConverged("Sinkhorn did not converge", err)


def _ot_stencil(a, b, reg, p, max_iter, tol, radius=4, omega=1.8, leak_tol=1e-2):
    """Entropic plan restricted to moves of at most ``radius`` cells.

    The radius grows until the Gibbs mass the final potentials put on excluded pairs is
    below ``leak_tol``. For p = 1 that mass decays slowly along transport rays while the
    cost has long settled, hence a looser threshold than the marginal tolerance.
    """
    m, d = a.shape[0], a.ndim
    A = np.ascontiguousarray(a.ravel())
    B = np.ascontiguousarray(b.ravel())
    f0 = np.zeros(A.size)
    g0 = np.zeros(B.size)
    while True:
        full = radius * radius >= d * (m // 2) ** 2
        nbr, cost = _stencil.stencil(m, d, radius, float(p))
        # every cell with mass must see the other support inside its stencil
        if full or ((A[nbr] > 0).any(1) | (B <= 0)).all() and ((B[nbr] > 0).any(1) | (A <= 0)).all():
            for om in dict.fromkeys((omega, 1.0)):
                # potentials from a smaller radius are a good start for a larger one
                f = f0.copy()
                g = g0.copy()
                tot, err, _ = _stencil.sinkhorn(A, B, nbr, cost, float(reg), f, g, max_iter, tol, om)
                if err < tol:
                    f0, g0 = f, g
                    break
                omega = 1.0
            if err < tol:
                if full or _stencil.outside_mass(A, B, f, g, m, d, radius, float(p), float(reg)) < leak_tol:
                    return float(tot)
            elif full:
                raise NotConverged("Sinkhorn did not converge", err)
        radius = min((3 * radius + 1) // 2, math.isqrt(d * (m // 2) ** 2) + 1)


def wasserstein_entropic(
    mu: GridMeasure,
    nu: GridMeasure,
    p: float = 1.0,
    reg: float = 1e-3,
    max_iter: int = 20_000,
    tol: float = 1e-6,
    *,
    method: str = "auto",
    schedule: bool = True,
) -> float:
    """Debiased Sinkhorn estimate of W_p.

    Each of the three entropic problems (mu to nu, mu to mu, nu to nu) is scored by the
    transport cost of its plan. ``method="dense"`` works on the full cost matrix with a
    reg schedule halving from 0.1 (times the largest cost) down to ``reg``.
    ``method="stencil"`` restricts plans to a neighbourhood of each cell and suits large
    grids. ``"auto"`` picks dense up to 1024 cells.
    """
    _check_pair(mu, nu)
    if reg <= 0:
        raise ValueError("reg must be positive")
    total = mu.total_mass
    a = mu.masses / total
    b = nu.masses / nu.total_mass
    n = a.size
    if method == "auto":
        method = "dense" if n <= 1024 else "stencil"
    if method == "dense":
        C = cost_matrix(mu.centers(), mu.centers(), p)
        fa, fb = a.reshape(-1), b.reshape(-1)
        ot = lambda x, y: _ot_dense(x, y, C, reg, max_iter, tol, schedule)
    elif method == "stencil":
        ot = lambda x, y: _ot_stencil(x, y, reg, p, max_iter, tol)
        fa, fb = a, b
    else:
        raise ValueError(f"unknown method {method!r}")
    s = ot(fa, fb) - 0.5 * ot(fa, fa) - 0.5 * ot(fb, fb)
    return (max(s, 0.0) * total) ** (1.0 / p)


# ---------------------------------------------------------------- circle oracle


def _circle_atoms(gm: GridMeasure):
    m = gm.resolution
    return (np.arange(m) + 0.5) / m, gm.masses.astype(float)


def _circle_quantile_cost(x, a, y, b, theta, p):
    """Integral over t of |Fmu^-1(t) - Fnu^-1(t - theta)|^p with the nu quantile extended periodically."""
    A = np.concatenate([[0.0], np.cumsum(a)])
    A[-1] = 1.0
    # three periods of nu cover t - theta for t in [0,1), theta in [-1, 1]
    ys = np.concatenate([y - 1, y, y + 1, y + 2])
    bs = np.concatenate([b, b, b, b])
    B = np.concatenate([[-1.0], -1.0 + np.cumsum(bs)])
    brk = np.unique(np.concatenate([A, np.clip(B + theta, 0.0, 1.0)]))
    mid = 0.5 * (brk[:-1] + brk[1:])
    length = np.diff(brk)
    ia = np.clip(np.searchsorted(A, mid, side="right") - 1, 0, len(a) - 1)
    ib = np.clip(np.searchsorted(B, mid - theta, side="right") - 1, 0, len(bs) - 1)
    return float(np.sum(length * np.abs(x[ia] - ys[ib]) ** p))


def wasserstein_circle_exact(mu: GridMeasure, nu: GridMeasure, p: float = 1.0) -> float:
    """W_p on the circle from cumulative distributions (independent of any LP solver)."""
    if mu.dim != 1 or nu.dim != 1:
        raise ValueError("circle oracle requires d = 1")
    _check_pair(mu, nu)
    total = mu.total_mass
    x, a = _circle_atoms(mu)
    _, b = _circle_atoms(nu)
    a = a / total
    b = b / nu.total_mass
    m = mu.resolution
    if p == 1:
        D = np.cumsum(a - b)
        return float(np.sum(np.abs(D - np.median(D))) / m) * total
    # the cost is piecewise linear in the rotation theta, with kinks where quantile
    # breakpoints of mu and nu meet, and convex for convex costs. Neighbouring kinks can
    # be ~1e-17 apart, so compare well-separated kinks (ternary search) and finish by scan.
    A = np.unique(np.cumsum(a))
    B = np.unique(np.cumsum(b))
    cand = (A[:, None] - B[None, :]).ravel()
    cand = np.concatenate([cand, cand + 1, cand - 1, [0.0]])
    cand = np.unique(cand[(cand >= -1) & (cand <= 1)])
    cost = lambda k: _circle_quantile_cost(x, a, x, b, cand[k], p)
    lo, hi = 0, len(cand) - 1
    while hi - lo > 64:
        k1 = lo + (hi - lo) // 3
        k2 = hi - (hi - lo) // 3
        if cost(k1) <= cost(k2):
            hi = k2
        else:
            lo = k1
    best = min(cost(k) for k in range(lo, hi + 1))
    return (best * total) ** (1.0 / p)


# ---------------------------------------------------------------- brute-force oracles


def _support(gm):
    w = gm.masses.reshape(-1)
    idx = np.flatnonzero(w > 0)
    return idx, w[idx]


def assignment_oracle(mu: GridMeasure, nu: GridMeasure, p: float, q: int) -> float:
    """Exact W_p^p when every mass is a multiple of total/q, by trying all q! atom matchings."""
    _check_pair(mu, nu)
    total = mu.total_mass
    cen = mu.centers()
    atoms = []
    for gm in (mu, nu):
        units = gm.masses.reshape(-1) * q / total
        k = np.rint(units).astype(int)
        if np.any(np.abs(units - k) > 1e-9):
            raise ValueError("masses are not multiples of total/q")
        atoms.append(np.repeat(np.arange(k.size), k))
    C = cost_matrix(cen[atoms[0]], cen[atoms[1]], p)
    rows = np.arange(q)
    best = min(C[rows, list(perm)].sum() for perm in itertools.permutations(range(q)))
    return float(best) * total / q


def _tree_flows(edges, a, b):
    """Flows on a spanning tree of the bipartite support graph, or None if not a tree."""
    na, nb = len(a), len(b)
    supply = np.concatenate([a, -b]).astype(float)
    adj = [[] for _ in range(na + nb)]
    for e, (i, j) in enumerate(edges):
        adj[i].append((na + j, e))
        adj[na + j].append((i, e))
    deg = np.array([len(x) for x in adj])
    if np.any(deg == 0):
        return None
    flow = np.zeros(len(edges))
    alive = np.ones(len(edges), dtype=bool)
    leaves = [v for v in range(na + nb) if deg[v] == 1]
    done = 0
    while leaves:
        v = leaves.pop()
        if deg[v] != 1:
            continue
        nbrs = [(w, e) for w, e in adj[v] if alive[e]]
        w, e = nbrs[0]
        # a leaf pushes its whole residual supply through its only edge
        flow[e] = supply[v] if v < na else -supply[v]
        supply[w] += supply[v]
        supply[v] = 0.0
        alive[e] = False
        deg[v] -= 1
        deg[w] -= 1
        done += 1
        if deg[w] == 1:
            leaves.append(w)
    if done != len(edges):
        return None
    return flow


def vertex_enumeration_oracle(mu: GridMeasure, nu: GridMeasure, p: float, max_bases: int = 200_000) -> float:
    """Exact W_p^p as the best basic feasible solution over all spanning-tree bases."""
    _check_pair(mu, nu)
    si, a = _support(mu)
    ti, b = _support(nu)
    b = b * (a.sum() / b.sum())
    cen = mu.centers()
    C = cost_matrix(cen[si], cen[ti], p)
    edges = [(i, j) for i in range(len(si)) for j in range(len(ti))]
    r = len(si) + len(ti) - 1
    if math.comb(len(edges), r) > max_bases:
        raise ValueError("instance too large for vertex enumeration")
    best = math.inf
    scale = a.sum()
    for sub in itertools.combinations(range(len(edges)), r):
        es = [edges[k] for k in sub]
        fl = _tree_flows(es, a, b)
        if fl is None or np.any(fl < -1e-12 * scale):
            continue
        best = min(best, float(sum(f * C[i, j] for f, (i, j) in zip(fl, es))))
    return best


# ---------------------------------------------------------------- predicates


def check_monotonicity(mu: GridMeasure, nu: GridMeasure, p: float, q: float):
    """(W_p^p, mu(X)^(1-p/q) (W_q^q)^(p/q)); the first never exceeds the second."""
    if p > q:
        raise ValueError("need p <= q")
    wp, _ = wasserstein_exact(mu, nu, p)
    wq, _ = wasserstein_exact(mu, nu, q)
    mass = mu.total_mass
    return wp**p, mass ** (1 - p / q) * (wq**q) ** (p / q)


def cell_heat_kernel(m: int, eps: float) -> np.ndarray:
    """Mass the heat kernel at time eps moves from a cell center into each cell, by offset.

    Per axis the kernel is a Gaussian of variance eps wrapped onto the circle, so
    k[j] = sum_n Phi((j + 1/2)/m + n) - Phi((j - 1/2)/m + n) with Phi the Gaussian CDF.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    s = math.sqrt(eps)
    off = np.minimum(np.arange(m), m - np.arange(m)) / m
    wraps = np.arange(-math.ceil(8 * s) - 1, math.ceil(8 * s) + 2)[:, None]
    hi = (off[None, :] + 0.5 / m + wraps) / (s * math.sqrt(2))
    lo = (off[None, :] - 0.5 / m + wraps) / (s * math.sqrt(2))
    k = 0.5 * np.sum(special.erf(hi) - special.erf(lo), axis=0)
    return k / k.sum()


def heat_smooth_grid(gm: GridMeasure, eps: float) -> GridMeasure:
    """P_eps of the masses (as Diracs at cell centers), integrated over each cell.

    The transition kernel is a product of per-axis wrapped-Gaussian cell masses, so the
    result is a nonnegative measure of the same total mass.
    """
    m, d = gm.resolution, gm.dim
    kf = np.fft.rfft(cell_heat_kernel(m, eps))
    out = gm.masses.astype(float)
    for ax in range(d):
        out = np.fft.irfft(np.fft.rfft(out, axis=ax) * kf.reshape([-1 if j == ax else 1 for j in range(d)]), n=m, axis=ax)
    out = np.clip(out, 0.0, None)
    return GridMeasure(out * (gm.total_mass / out.sum()))


def check_heat_contraction(mu: GridMeasure, nu: GridMeasure, p: float, eps: float):
    """(W_p(mu, nu), W_p(P_eps mu, P_eps nu))."""
    _check_pair(mu, nu)
    before, _ = wasserstein_exact(mu, nu, p)
    after, _ = wasserstein_exact(heat_smooth_grid(mu, eps), heat_smooth_grid(nu, eps), p)
    return before, after


def grid_spectrum(gm: GridMeasure, cutoff: int) -> SpectralOccupation:
    """Exact Fourier coefficients of the masses as Diracs at cell centers, any cutoff."""
    w = gm.masses.reshape(-1)
    keep = w > 0
    return spectrum_of_points(gm.centers()[keep], w[keep], cutoff, gm.total_mass)


def check_sobolev_upper(mu: GridMeasure, eps: float):
    """(W_1(P_eps mu, uniform), ||grad u_eps||_2) with -Laplace u_eps = P_eps(mu - mass)."""
    nu = GridMeasure(np.full(mu.masses.shape, mu.total_mass / mu.masses.size))
    w1, _ = wasserstein_exact(heat_smooth_grid(mu, eps), nu, 1.0)
    spec = grid_spectrum(mu, default_cutoff(eps))
    g = poisson_gradient(center(heat_smooth(spec, eps)))
    return w1, grad_l2_norm(g)


def sobolev_lower_proxy(spec: SpectralOccupation, eps: float, M: float, C: float) -> float:
    """(1/M) ||grad u_eps||_2^2 - (C/M^3) ||grad u_eps||_4^4."""
    g = poisson_gradient(center(heat_smooth(spec, eps)))
    l2 = grad_l2_norm(g)
    l4 = grad_lp_norm(g, 4, 4 * g.cutoff + 2)
    return l2**2 / M - C * l4**4 / M**3
