"""Exact sampling of fractional Gaussian noise and fBm paths, plus torus projection."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft as sfft
import scipy.linalg

MASK64 = (1 << 64) - 1
# odd multiplier of the golden ratio; coordinate j mixes seed with (j+1) * GOLDEN
GOLDEN = 0x9E3779B97F4A7C15
NEG_EIG_RTOL = 1e-10


class CovarianceError(RuntimeError):
    """Raised when a covariance matrix fails to factor."""


@dataclass(frozen=True)
class HurstIndex:
    value: float

    def __post_init__(self):
        v = float(self.value)
        if not (0.0 < v < 1.0) or not np.isfinite(v):
            raise ValueError(f"Hurst index must lie in (0, 1), got {self.value!r}")
        object.__setattr__(self, "value", v)

    def __float__(self):
        return self.value


def _h(H) -> float:
    return H.value if isinstance(H, HurstIndex) else HurstIndex(H).value


@dataclass(frozen=True)
class FbmPath:
    """Path values on a uniform time grid, ``values[0]`` at the origin.

    ``values`` has shape ``(n + 1, d)``.
    """

    hurst: float
    dt: float
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] < 1:
            raise ValueError("values must have shape (n+1, d)")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "hurst", _h(self.hurst))

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def n_steps(self) -> int:
        return self.values.shape[0] - 1

    @property
    def horizon(self) -> float:
        return self.n_steps * self.dt

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt


class TorusPath(FbmPath):
    """An :class:`FbmPath` whose coordinates lie in ``[0, 1)``."""

    def __post_init__(self):
        super().__post_init__()
        v = self.values
        if v.size and (v.min() < 0.0 or v.max() >= 1.0):
            raise ValueError("torus coordinates must lie in [0, 1)")


def fbm_covariance(s, t, H):
    """Covariance 0.5 (s^2H + t^2H - |t-s|^2H) of standard fBm."""
    h2 = 2.0 * _h(H)
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s < 0) or np.any(t < 0):
        raise ValueError("times must be nonnegative")
    out = 0.5 * (s**h2 + t**h2 - np.abs(t - s) ** h2)
    return float(out) if out.ndim == 0 else out


def fgn_autocovariance(k, H, dt=1.0):
    """Autocovariance of fBm increments of length ``dt`` at integer lag ``k``."""
    h2 = 2.0 * _h(H)
    k = np.abs(np.asarray(k, dtype=float))
    out = 0.5 * dt**h2 * (np.abs(k + 1) ** h2 + np.abs(k - 1) ** h2 - 2.0 * k**h2)
    return float(out) if out.ndim == 0 else out


@lru_cache(maxsize=8)
def _embedding_eigenvalues(n: int, H: float) -> np.ndarray:
    """Eigenvalues (first n+1 of 2n) of the circulant embedding at unit step."""
    r = fgn_autocovariance(np.arange(n + 1), H, 1.0)
    row = np.concatenate([r, r[-2:0:-1]])
    lam = sfft.rfft(row).real
    lam.setflags(write=False)
    return lam


def circulant_eigenvalues(n: int, H) -> np.ndarray:
    return _embedding_eigenvalues(int(n), _h(H))


def embedding_is_valid(n: int, H) -> bool:
    lam = circulant_eigenvalues(n, H)
    return bool(lam.min() >= -NEG_EIG_RTOL * lam.max())


def make_generator(seed: int) -> np.random.Generator:
    """Counter-based generator keyed by a 64-bit seed."""
    return np.random.Generator(np.random.Philox(key=int(seed) & MASK64))


def coordinate_seed(seed: int, j: int) -> int:
    return (int(seed) ^ ((GOLDEN * (j + 1)) & MASK64)) & MASK64


def _sample_circulant(n, H, rng):
    lam = np.clip(circulant_eigenvalues(n, H), 0.0, None)
    N = 2 * n
    z = rng.standard_normal(N)
    w = np.empty(n + 1, dtype=complex)
    w[0] = np.sqrt(lam[0]) * z[0]
    w[n] = np.sqrt(lam[n]) * z[1]
    s = np.sqrt(lam[1:n] / 2.0)
    w[1:n].real = s * z[2 : n + 1]
    w[1:n].imag = s * z[n + 1 :]
    del z
    x = sfft.irfft(w, n=N, overwrite_x=True)[:n]
    x *= np.sqrt(N)
    return x


def _sample_cholesky(n, H, rng):
    r = fgn_autocovariance(np.arange(n), H, 1.0)
    cov = scipy.linalg.toeplitz(r)
    try:
        L = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise CovarianceError("non-positive pivot in fGN covariance") from exc
    if np.any(np.diag(L) <= 0):
        raise CovarianceError("non-positive pivot in fGN covariance")
    return L @ rng.standard_normal(n)


def sample_fgn(n: int, H, dt: float = 1.0, seed: int = 0, *, method: str = "auto") -> np.ndarray:
    """Exact fractional Gaussian noise sample of length ``n``.

    Parameters
    ----------
    n : int
        Number of increments.
    H : float or HurstIndex
    dt : float
        Step size; increments have variance ``dt**(2H)``.
    seed : int
        64-bit key for the Philox generator.
    method : {"auto", "circulant", "cholesky"}
        ``"auto"`` uses circulant embedding and falls back to Cholesky when the
        embedding has eigenvalues below ``-1e-10 * max``. ``"cholesky"`` forces
        the fallback.
    """
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    if dt <= 0:
        raise ValueError("dt must be positive")
    h = _h(H)
    rng = make_generator(seed)
    if method == "cholesky":
        x = _sample_cholesky(n, h, rng)
    elif method in ("auto", "circulant"):
        if embedding_is_valid(n, h):
            x = _sample_circulant(n, h, rng)
        elif method == "auto":
            x = _sample_cholesky(n, h, rng)
        else:
            raise CovarianceError("circulant embedding is not nonnegative definite")
    else:
        raise ValueError(f"unknown method {method!r}")
    x *= dt**h
    return x


def sample_fbm_path(T: float, n_steps: int, H, d: int = 1, seed: int = 0, *, method: str = "auto") -> FbmPath:
    """d independent fBm coordinates on ``[0, T]`` with ``n_steps`` increments."""
    n_steps = int(n_steps)
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    if T <= 0 or d < 1:
        raise ValueError("T and d must be positive")
    h = _h(H)
    dt = T / n_steps
    values = np.empty((n_steps + 1, d))
    values[0] = 0.0
    for j in range(d):
        inc = sample_fgn(n_steps, h, dt, coordinate_seed(seed, j), method=method)
        np.cumsum(inc, out=values[1:, j])
    return FbmPath(h, dt, values)


def project_to_torus(path: FbmPath) -> TorusPath:
    v = np.mod(path.values, 1.0)
    # mod can round up to exactly 1.0 for tiny negative inputs
    v[v >= 1.0] = 0.0
    return TorusPath(path.hurst, path.dt, v)


def sample_torus_path(T, n_steps, H, d=1, seed=0) -> TorusPath:
    """Sample and project in place, avoiding a second copy of long paths."""
    p = sample_fbm_path(T, n_steps, H, d, seed)
    v = p.values
    np.mod(v, 1.0, out=v)
    v[v >= 1.0] = 0.0
    return TorusPath(p.hurst, p.dt, v)


def write_path_csv(path: FbmPath, fh) -> None:
    """CSV with header ``t,x1,...,xd`` and 17-significant-digit floats."""
    cols = ",".join(f"x{j + 1}" for j in range(path.dim))
    fh.write(f"t,{cols}\n")
    t = path.times
    for i in range(path.n_steps + 1):
        row = [t[i], *path.values[i]]
        fh.write(",".join(format(float(x), ".17g") for x in row) + "\n")
