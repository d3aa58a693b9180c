"""Compiled point-to-grid deposition kernels."""

import numpy as np
from numba import njit


@njit(cache=True)
def _cic(points, m, weight, out):
    n, d = points.shape
    strides = np.empty(d, np.int64)
    s = 1
    for j in range(d - 1, -1, -1):
        strides[j] = s
        s *= m
    base = np.empty(d, np.int64)
    frac = np.empty(d)
    for i in range(n):
        for j in range(d):
            u = points[i, j] * m
            b = int(np.floor(u))
            frac[j] = u - b
            base[j] = b % m
        for c in range(1 << d):
            w = weight
            idx = 0
            for j in range(d):
                b = base[j]
                if (c >> j) & 1:
                    w *= frac[j]
                    b += 1
                    if b == m:
                        b = 0
                else:
                    w *= 1.0 - frac[j]
                idx += b * strides[j]
            out[idx] += w


@njit(cache=True)
def _ngp_counts(points, m, out):
    n, d = points.shape
    for i in range(n):
        idx = 0
        for j in range(d):
            b = int(np.floor(points[i, j] * m))
            if b >= m:
                b = m - 1
            idx = idx * m + b
        out[idx] += 1


def cic_deposit(points: np.ndarray, m: int, weight: float, out: np.ndarray | None = None) -> np.ndarray:
    """Cloud-in-cell deposit of equally weighted points onto nodes ``j/m``.

    Returns an array of shape ``(m,) * d``; accumulates into ``out`` if given.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    d = points.shape[1]
    if out is None:
        out = np.zeros((m,) * d)
    _cic(points, int(m), float(weight), out.reshape(-1))
    return out


def cell_counts(points: np.ndarray, m: int) -> np.ndarray:
    """Number of points per cell ``floor(x * m)``; shape ``(m,) * d``."""
    points = np.ascontiguousarray(points, dtype=np.float64)
    d = points.shape[1]
    out = np.zeros(m**d, dtype=np.int64)
    _ngp_counts(points, int(m), out)
    return out.reshape((m,) * d)


@njit(cache=True)
def _line_modes(x, weight, K, out):
    # out[k] += sum_i w_i exp(-2 pi i k x_i), k = 0..K, by power recurrence
    n = x.shape[0]
    per_point = weight.shape[0] == n
    for i in range(n):
        w = weight[i] if per_point else weight[0]
        z = np.exp(-2j * np.pi * x[i])
        acc = w + 0j
        out[0] += acc
        for k in range(1, K + 1):
            acc *= z
            out[k] += acc


def line_modes(x: np.ndarray, weight, K: int) -> np.ndarray:
    """Fourier sums of weighted points on the circle for frequencies 0..K."""
    x = np.ascontiguousarray(x, dtype=np.float64).reshape(-1)
    w = np.atleast_1d(np.asarray(weight, dtype=np.float64))
    out = np.zeros(K + 1, dtype=complex)
    _line_modes(x, w, int(K), out)
    return out
