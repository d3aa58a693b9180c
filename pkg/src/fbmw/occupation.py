"""Occupation measures of torus paths: lattice Fourier coefficients and grid binning."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._deposit import cell_counts, line_modes
from .fbm import TorusPath

# points per block when forming mode products
_BLOCK = 1 << 14


def _lex_positive(K: int, d: int) -> np.ndarray:
    """Mask of lattice points whose first nonzero coordinate is positive."""
    axes = np.meshgrid(*([np.arange(-K, K + 1)] * d), indexing="ij")
    mask = np.zeros((2 * K + 1,) * d, dtype=bool)
    undecided = np.ones_like(mask)
    for a in axes:
        mask |= undecided & (a > 0)
        undecided &= a == 0
    return mask


def hermitian_complete(coeffs: np.ndarray, zero_value=None) -> np.ndarray:
    """Overwrite the lexicographically negative half by conjugates of the positive half."""
    d = coeffs.ndim
    K = (coeffs.shape[0] - 1) // 2
    pos = _lex_positive(K, d)
    mirrored = np.conj(np.flip(coeffs))
    out = np.where(pos, coeffs, mirrored)
    center = (K,) * d
    out[center] = out[center].real if zero_value is None else zero_value
    return out


@dataclass(frozen=True)
class SpectralOccupation:
    """Fourier coefficients on ``{|xi|_inf <= K}``.

    ``coeffs`` is a dense array of shape ``(2K+1,) * d`` with ``coeffs[xi + K]``
    holding the coefficient at lattice point ``xi``.
    """

    coeffs: np.ndarray
    total_mass: float

    @property
    def dim(self) -> int:
        return self.coeffs.ndim

    @property
    def cutoff(self) -> int:
        return (self.coeffs.shape[0] - 1) // 2

    def __getitem__(self, xi):
        xi = (xi,) if np.isscalar(xi) else tuple(xi)
        K = self.cutoff
        return self.coeffs[tuple(int(k) + K for k in xi)]

    def lattice(self) -> np.ndarray:
        """Integer lattice coordinates, shape ``(d, 2K+1, ..., 2K+1)``."""
        K = self.cutoff
        return np.array(np.meshgrid(*([np.arange(-K, K + 1)] * self.dim), indexing="ij"))

    def sq_norms(self) -> np.ndarray:
        return np.sum(self.lattice().astype(float) ** 2, axis=0)

    def write_csv(self, fh) -> None:
        lat = self.lattice().reshape(self.dim, -1).T
        c = self.coeffs.reshape(-1)
        hdr = ",".join(f"xi_{j + 1}" for j in range(self.dim))
        fh.write(f"{hdr},re,im\n")
        for xi, v in zip(lat, c):
            fh.write(",".join(str(int(k)) for k in xi) + f",{v.real:.17g},{v.imag:.17g}\n")


@dataclass(frozen=True)
class GridMeasure:
    """Nonnegative masses on ``m**d`` cells; cell ``j`` covers ``[j/m, (j+1)/m)``."""

    masses: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.masses, dtype=float)
        if a.ndim < 1 or len(set(a.shape)) != 1:
            raise ValueError("masses must be a cubic array")
        if np.any(a < 0):
            raise ValueError("masses must be nonnegative")
        object.__setattr__(self, "masses", a)

    @property
    def dim(self) -> int:
        return self.masses.ndim

    @property
    def resolution(self) -> int:
        return self.masses.shape[0]

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())

    def normalized(self) -> "GridMeasure":
        return GridMeasure(self.masses / self.total_mass)

    def centers(self) -> np.ndarray:
        """Cell centers in row-major order, shape ``(m**d, d)``."""
        m = self.resolution
        c = (np.arange(m) + 0.5) / m
        g = np.meshgrid(*([c] * self.dim), indexing="ij")
        return np.stack([x.reshape(-1) for x in g], axis=1)

    def write(self, fh) -> None:
        fh.write(f"{self.dim},{self.resolution},{self.total_mass:.17g}\n")
        for x in self.masses.reshape(-1):
            fh.write(f"{x:.17g}\n")

    @classmethod
    def read(cls, fh) -> "GridMeasure":
        d, m, _ = fh.readline().strip().split(",")
        d, m = int(d), int(m)
        vals = np.array([float(line) for line in fh if line.strip()])
        return cls(vals.reshape((m,) * d))


def _mode_sums(points: np.ndarray, weight: float, K: int) -> np.ndarray:
    """Sum of ``weight * exp(-2 pi i xi . x)`` for xi_1 in [0, K], other axes in [-K, K].

    ``weight`` is a scalar or one value per point.
    """
    n, d = points.shape
    if d == 1:
        return line_modes(points[:, 0], weight, K)
    per_point = np.ndim(weight) > 0
    half = K + 1
    full = 2 * K + 1
    out = np.zeros((half,) + (full,) * (d - 1), dtype=complex)
    inner = half * full ** max(d - 2, 0)
    block = max(256, min(_BLOCK, (1 << 22) // inner))
    for s in range(0, n, block):
        x = points[s : s + block]
        z = np.exp(-2j * np.pi * x)
        # powers z^k, k = 0..K, via cumulative product; negative powers by conjugation
        pw = np.empty((x.shape[0], d, K + 1), dtype=complex)
        pw[..., 0] = 1.0
        if K >= 1:
            pw[..., 1:] = z[..., None]
            np.cumprod(pw[..., 1:], axis=-1, out=pw[..., 1:])
        acc = pw[:, 0, :]
        if per_point:
            acc = acc * np.asarray(weight)[s : s + block, None]
        for j in range(1, d):
            pj = np.concatenate([np.conj(pw[:, j, :0:-1]), pw[:, j, :]], axis=1)
            if j == d - 1:
                out += (acc.reshape(acc.shape[0], -1).T @ pj).reshape(out.shape)
                break
            acc = (acc[..., None] * pj.reshape((pj.shape[0],) + (1,) * (acc.ndim - 1) + (full,)))
        else:
            out += acc.sum(axis=0)
    return out if per_point else out * weight


def spectrum_of_points(points: np.ndarray, weight, K: int, total_mass: float) -> SpectralOccupation:
    if K < 1:
        raise ValueError("cutoff must be >= 1")
    points = np.atleast_2d(np.asarray(points, dtype=float))
    d = points.shape[1]
    half = _mode_sums(points, weight, K)
    full = np.zeros((2 * K + 1,) * d, dtype=complex)
    full[K:] = half
    return SpectralOccupation(hermitian_complete(full, zero_value=total_mass), float(total_mass))


def occupation_points(path: TorusPath):
    """Left endpoints and their common weight ``dt``."""
    return path.values[:-1], path.dt


def discrete_points(path: TorusPath, tau: float, T: float):
    """Sample points ``B_{t tau}``, ``t = 1..floor(T/tau)``, and weight ``tau``."""
    k = int(round(tau / path.dt))
    if k < 1 or abs(k * path.dt - tau) > 1e-9 * tau:
        raise ValueError("tau must be an integer multiple of the path step")
    if tau > T * (1 + 1e-12):
        raise ValueError("tau must not exceed T")
    count = int(math.floor(T / tau + 1e-9))
    if count * k > path.n_steps:
        raise ValueError("path too short for the requested horizon")
    return path.values[k : count * k + 1 : k], float(tau)


def occupation_fourier(path: TorusPath, cutoff: int) -> SpectralOccupation:
    """Left-endpoint Riemann sum of the occupation measure's Fourier coefficients."""
    if path.n_steps < 1:
        raise ValueError("path needs at least two points")
    pts, w = occupation_points(path)
    return spectrum_of_points(pts, w, cutoff, path.n_steps * path.dt)


def discrete_occupation_fourier(path: TorusPath, tau: float, T: float, cutoff: int) -> SpectralOccupation:
    pts, w = discrete_points(path, tau, T)
    return spectrum_of_points(pts, w, cutoff, len(pts) * w)


def occupation_grid(path: TorusPath, resolution: int) -> GridMeasure:
    """Mass ``dt`` per step in the cell holding the step's left endpoint."""
    m = int(resolution)
    if m < 2:
        raise ValueError("resolution must be >= 2")
    counts = cell_counts(path.values[:-1], m)
    return GridMeasure(counts * path.dt)


def uniform_grid(d: int, m: int, total_mass: float = 1.0) -> GridMeasure:
    return GridMeasure(np.full((m,) * d, total_mass / m**d))


def grid_fourier(gm: GridMeasure, cutoff: int) -> SpectralOccupation:
    """Coefficients of the grid measure with mass placed at cell centers."""
    K, m, d = int(cutoff), gm.resolution, gm.dim
    if K < 1:
        raise ValueError("cutoff must be >= 1")
    if 2 * K >= m:
        raise ValueError("cutoff must satisfy K < m/2")
    F = np.fft.fftn(gm.masses)
    idx = np.arange(-K, K + 1) % m
    sub = F[np.ix_(*([idx] * d))]
    ks = np.arange(-K, K + 1)
    phase = np.exp(-1j * np.pi * ks / m)
    for j in range(d):
        shape = [1] * d
        shape[j] = -1
        sub = sub * phase.reshape(shape)
    return SpectralOccupation(hermitian_complete(sub, zero_value=gm.total_mass), gm.total_mass)
