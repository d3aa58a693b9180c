"""Heat smoothing, Poisson gradients, Sobolev norms and moment envelopes on the torus lattice."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.fft as sfft
import scipy.signal
from scipy import integrate

from ._deposit import cic_deposit
from .occupation import SpectralOccupation

TWO_PI2 = 2.0 * math.pi**2


def rational(x, max_den: int = 10**6) -> Fraction:
    """Closest fraction with bounded denominator, so 1/3 as a float becomes exactly 1/3."""
    return x if isinstance(x, Fraction) else Fraction(x).limit_denominator(max_den)


# ---------------------------------------------------------------- semigroup, Poisson


def heat_multiplier(sq_norm, t):
    return np.exp(-TWO_PI2 * t * np.asarray(sq_norm, dtype=float))


def heat_smooth(spec: SpectralOccupation, eps: float) -> SpectralOccupation:
    """Multiply every coefficient by exp(-2 pi^2 eps |xi|^2)."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    c = spec.coeffs * heat_multiplier(spec.sq_norms(), eps)
    return SpectralOccupation(c, spec.total_mass)


def center(spec: SpectralOccupation) -> SpectralOccupation:
    """Remove the uniform part, i.e. zero the xi = 0 coefficient."""
    c = spec.coeffs.copy()
    c[(spec.cutoff,) * spec.dim] = 0.0
    return SpectralOccupation(c, spec.total_mass)


@dataclass(frozen=True)
class GradientField:
    """Fourier coefficients of a gradient, shape ``(d, 2K+1, ..., 2K+1)``; zero at xi = 0."""

    coeffs: np.ndarray

    @property
    def dim(self) -> int:
        return self.coeffs.shape[0]

    @property
    def cutoff(self) -> int:
        return (self.coeffs.shape[1] - 1) // 2

    def lattice(self) -> np.ndarray:
        K = self.cutoff
        return np.array(np.meshgrid(*([np.arange(-K, K + 1)] * self.dim), indexing="ij"))

    def modulus(self) -> np.ndarray:
        return np.sqrt(np.sum(np.abs(self.coeffs) ** 2, axis=0))


def _inverse_laplacian_weights(lat):
    q = np.sum(lat.astype(float) ** 2, axis=0)
    w = np.zeros_like(q)
    nz = q > 0
    w[nz] = 1.0 / q[nz]
    return w


def poisson_gradient(spec: SpectralOccupation, atol: float = 0.0) -> GradientField:
    """grad u with -Laplace u = spec: coefficients (i xi / 2 pi) mu(xi) / |xi|^2."""
    K = spec.cutoff
    if abs(spec.coeffs[(K,) * spec.dim]) > atol:
        raise ValueError("spectrum must be centered before solving")
    lat = spec.lattice()
    w = _inverse_laplacian_weights(lat)
    g = (1j / (2 * math.pi)) * lat * (spec.coeffs * w)[None]
    return GradientField(g)


def divergence(g: GradientField) -> np.ndarray:
    """Fourier coefficients of div g, i.e. sum_j 2 pi i xi_j g_j."""
    lat = g.lattice()
    return np.sum(2j * math.pi * lat * g.coeffs, axis=0)


def scalar_potential(spec: SpectralOccupation) -> np.ndarray:
    """Coefficients of u solving -Laplace u = spec (mean zero)."""
    return spec.coeffs * _inverse_laplacian_weights(spec.lattice()) / (4 * math.pi**2)


def laplacian_multiplier(lat) -> np.ndarray:
    """Symbol of -Laplace: 4 pi^2 |xi|^2."""
    return 4 * math.pi**2 * np.sum(np.asarray(lat, dtype=float) ** 2, axis=0)


def grad_l2_norm(g: GradientField) -> float:
    return float(np.sqrt(np.sum(np.abs(g.coeffs) ** 2)))


def to_physical(coeffs: np.ndarray, m: int) -> np.ndarray:
    """Real values on the ``m**d`` grid of a band-limited function (component axis first)."""
    comp = coeffs.shape[0]
    d = coeffs.ndim - 1
    K = (coeffs.shape[1] - 1) // 2
    grid = np.zeros((comp,) + (m,) * d, dtype=complex)
    idx = np.arange(-K, K + 1) % m
    grid[(slice(None),) + np.ix_(*([idx] * d))] = coeffs
    vals = sfft.ifftn(grid, axes=tuple(range(1, d + 1)), norm="forward")
    return vals.real


def grad_lp_norm(g: GradientField, p: float, resolution: int) -> float:
    """(m^-d sum |grad u(x)|^p)^(1/p) on an oversampled grid, m >= 4K."""
    m = int(resolution)
    if p < 1:
        raise ValueError("p must be >= 1")
    if m < 4 * g.cutoff:
        raise ValueError("resolution must be at least 4K")
    vals = to_physical(g.coeffs, m)
    mod = np.sqrt(np.sum(vals**2, axis=0))
    return float(np.mean(mod**p) ** (1.0 / p))


def default_cutoff(eps: float, rtol: float = 1e-12) -> int:
    """Smallest K with exp(-2 pi^2 eps K^2) <= rtol."""
    return max(1, math.ceil(math.sqrt(math.log(1.0 / rtol) / (TWO_PI2 * eps))))


# ---------------------------------------------------------------- epsilon rules


@dataclass(frozen=True)
class EpsilonRule:
    """sqrt(eps(T)) = T^(-exponent) * (log T)^log_power."""

    d: int
    H: float
    regime: str
    exponent: Fraction
    log_power: Fraction = Fraction(0)
    alpha: float | None = None
    case: int = 0

    def sqrt_eps(self, T):
        T = np.asarray(T, dtype=float)
        if self.log_power and np.any(T <= 1.0):
            raise ValueError("logarithmic rule needs T > 1")
        out = T ** (-float(self.exponent))
        if self.log_power:
            out = out * np.log(T) ** float(self.log_power)
        return float(out) if out.ndim == 0 else out

    def __call__(self, T):
        s = self.sqrt_eps(T)
        return s * s


def regime_of(d: int, H) -> str:
    crit = 2 + 1 / rational(H)
    if d < crit:
        return "subcritical"
    return "critical" if d == crit else "supercritical"


def epsilon_rule_continuous(d: int, H) -> EpsilonRule:
    if d < 1:
        raise ValueError("d must be >= 1")
    h = rational(H)
    if not 0 < h < 1:
        raise ValueError("H must lie in (0, 1)")
    reg = regime_of(d, h)
    if reg == "subcritical":
        return EpsilonRule(d, float(H), reg, Fraction(1, 2), case=1)
    if reg == "critical":
        return EpsilonRule(d, float(H), reg, Fraction(1, 2), Fraction(1, 2), case=2)
    return EpsilonRule(d, float(H), reg, 1 / (d - 1 / h), case=3)


def epsilon_rule_discrete(d: int, H, alpha) -> EpsilonRule:
    """Seven-case rule for samples spaced tau ~ T^-alpha."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    h, a = rational(H), rational(alpha)
    reg = regime_of(d, h)
    inv = 1 / h
    tail = (1 + a) / d
    mk = lambda e, case, lp=Fraction(0): EpsilonRule(d, float(H), reg, e, lp, float(alpha), case)
    if d <= 2:
        return mk(Fraction(1, 2), 1)
    if reg == "subcritical":
        return mk(Fraction(1, 2), 2) if a > Fraction(d, 2) - 1 else mk(tail, 3)
    if reg == "critical":
        return mk(tail, 4) if a < 1 / (2 * h) else mk(Fraction(1, 2), 5, Fraction(1, 2))
    return mk(tail, 6) if a <= inv / (d - inv) else mk(1 / (d - inv), 7)


# ---------------------------------------------------------------- g-norms


def _square_counts(K: int, Q: int) -> np.ndarray:
    """c[q] = #{k in [-K, K] : k^2 = q}, q = 0..Q."""
    k = np.arange(-K, K + 1)
    k2 = k * k
    return np.bincount(k2[k2 <= Q], minlength=Q + 1).astype(float)


def shell_counts(d: int, K: int, Q: int | None = None) -> np.ndarray:
    """Number of lattice points with |xi|_inf <= K and |xi|^2 = q, for q = 0..Q."""
    Q = d * K * K if Q is None else Q
    c = _square_counts(K, Q)
    acc = np.array([1.0])
    for _ in range(d):
        acc = scipy.signal.fftconvolve(acc, c)[: Q + 1] if len(acc) > 64 else np.convolve(acc, c)[: Q + 1]
    acc = np.round(acc) if acc.max() < 2**50 else acc
    out = np.zeros(Q + 1)
    out[: len(acc)] = acc
    return out


def g_function(sq_norm, eps):
    q = np.asarray(sq_norm, dtype=float)
    return np.exp(-eps * q) / (np.sqrt(q) + 1.0)


def g_cutoff(eps: float, rtol: float = 1e-12) -> int:
    return math.ceil(math.sqrt(math.log(1.0 / rtol) / eps))


def _smooth_step(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.clip(t, 0.0, 1.0)
    a = np.where(t > 0, np.exp(-1.0 / np.maximum(t, 1e-300)), 0.0)
    b = np.where(t < 1, np.exp(-1.0 / np.maximum(1.0 - t, 1e-300)), 0.0)
    return a / (a + b)


def _g_power_shells(eps, d, p, K, Q):
    counts = shell_counts(d, K, Q)
    q = np.arange(Q + 1)
    return float(np.sum(counts * g_function(q, eps) ** p))


def _g_power_radial(eps, d, p, r1=50.0, r2=200.0):
    """sum over Z^d of g^p with a smooth radial split at r1..r2.

    Inside, exact shell sums of g^p * chi; outside, the integral of g^p * (1 - chi),
    whose lattice sum differs from the integral only by Fourier tails of a function
    smooth on scale r2 - r1.
    """
    G = lambda r: np.exp(-p * eps * r * r) / (r + 1.0) ** p
    chi = lambda r: 1.0 - _smooth_step((r - r1) / (r2 - r1))
    Q = int(r2 * r2)
    counts = shell_counts(d, int(r2) + 1, Q)
    r = np.sqrt(np.arange(Q + 1))
    inner = float(np.sum(counts * G(r) * chi(r)))
    area = 2 * math.pi ** (d / 2) / math.gamma(d / 2)
    f = lambda x: area * x ** (d - 1) * G(x) * (1.0 - chi(x))
    mid, _ = integrate.quad(f, r1, r2, limit=500)
    tail, _ = integrate.quad(f, r2, r2 + 40.0 / math.sqrt(p * eps), limit=2000)
    return inner + mid + tail


def g_norm(eps: float, d: int, p: float, cutoff: int | None = None, method: str = "auto") -> float:
    """l^p norm over Z^d of g(xi) = exp(-eps |xi|^2) / (|xi| + 1).

    ``method="shells"`` sums lattice shells up to the cutoff; ``"radial"`` sums exactly up
    to radius 200 and integrates the smooth remainder, which reaches eps far below
    what shell tables allow. ``"auto"`` uses shells while the cutoff is at most 200.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    need = g_cutoff(eps)
    if method == "auto":
        method = "shells" if cutoff is not None or need <= 200 else "radial"
    if method == "radial":
        return _g_power_radial(eps, d, p) ** (1.0 / p)
    if method != "shells":
        raise ValueError(f"unknown method {method!r}")
    K = need if cutoff is None else int(cutoff)
    if K < need:
        raise ValueError(f"cutoff {K} too small; need exp(-eps K^2) <= 1e-12 (K >= {need})")
    # points outside the ball |xi| <= need carry weight below 1e-12 ** p
    return _g_power_shells(eps, d, p, K, need * need) ** (1.0 / p)


def g_norm_asymptotic(d: int, p: float):
    """Leading behaviour of ||g||_p as eps -> 0: ('bounded' | 'log' | 'power', exponent in eps)."""
    if d < p:
        return ("bounded", 0.0)
    if d == p:
        return ("log", 1.0 / p)
    return ("power", -(d / p - 1.0) / 2.0)


# ---------------------------------------------------------------- Young bound


def _lp(f, r):
    f = np.abs(np.asarray(f, dtype=float))
    top = float(f.max()) if f.size else 0.0
    if math.isinf(r) or top == 0.0:
        return top
    # scale by the max so large r does not overflow
    return top * float(np.sum((f / top) ** r) ** (1.0 / r))


def young_exponents_valid(lambdas, Lambdas, atol=1e-12) -> bool:
    lam = list(lambdas)
    Lam = list(Lambdas)
    if len(lam) < 2 or len(Lam) != len(lam) - 1:
        return False
    inv = lambda x: 0.0 if math.isinf(x) else 1.0 / x
    if any(x < 1 for x in lam + Lam):
        return False
    if abs(inv(lam[0]) + inv(lam[1]) + inv(Lam[0]) - 2.0) > atol:
        return False
    return all(abs(inv(lam[k]) + inv(Lam[k - 1]) - 1.0) <= atol for k in range(2, len(lam)))


def young_product_bound(f_list, F_list, lambda_list, Lambda_list):
    """(lhs, rhs) of the generalized Young inequality for functions on a truncated lattice.

    ``f_list`` holds p arrays and ``F_list`` holds p-1 arrays (for F_2..F_p), all of shape
    ``(2K+1,) * d`` centered at xi = 0 and zero outside the box. lhs sums
    prod f_i(xi_i) prod_j F_j(xi_1 + ... + xi_j) over all tuples.
    """
    if not young_exponents_valid(lambda_list, Lambda_list):
        raise ValueError("exponents violate the Young conditions")
    fs = [np.asarray(f, dtype=float) for f in f_list]
    Fs = [np.asarray(F, dtype=float) for F in F_list]
    if any(np.any(f < 0) for f in fs + Fs):
        raise ValueError("functions must be nonnegative")
    acc = fs[0]
    for f, F in zip(fs[1:], Fs):
        acc = scipy.signal.convolve(acc, f, mode="same", method="direct") * F
    lhs = float(acc.sum())
    rhs = math.prod(_lp(f, r) for f, r in zip(fs, lambda_list)) * math.prod(
        _lp(F, r) for F, r in zip(Fs, Lambda_list)
    )
    return lhs, rhs


# ---------------------------------------------------------------- envelopes


def mixed_moment_envelope(xis, T: float, H) -> float:
    """sum over orderings of prod_j min(|xi_s1 + ... + xi_sj|^(-1/H), T)."""
    xs = [np.atleast_1d(np.asarray(x, dtype=float)) for x in xis]
    if not xs:
        raise ValueError("need at least one lattice point")
    inv = 1.0 / float(H)
    total = 0.0
    for perm in itertools.permutations(range(len(xs))):
        s = np.zeros_like(xs[0])
        prod = 1.0
        for i in perm:
            s = s + xs[i]
            r = float(np.sqrt(np.sum(s * s)))
            prod *= T if r == 0.0 else min(r ** (-inv), T)
        total += prod
    return total


def discrete_moment_envelope(xi, T: float, tau: float, H) -> float:
    """T (|xi|^(-1/H) + tau)."""
    r = float(np.sqrt(np.sum(np.asarray(xi, dtype=float) ** 2)))
    if r == 0.0:
        raise ValueError("xi must be nonzero")
    if not 0 < tau <= T:
        raise ValueError("need 0 < tau <= T")
    return T * (r ** (-1.0 / float(H)) + tau)


def second_moment(sq_norm: float, T: float, H) -> float:
    """E|mu_T(xi)|^2 = 2 int_0^T (T - u) exp(-2 pi^2 |xi|^2 u^(2H)) du for the occupation measure."""
    a = TWO_PI2 * float(sq_norm)
    h = float(H)
    if a == 0.0:
        return float(T) ** 2
    b = a ** (-1.0 / (2.0 * h))
    pts = [x for x in (b, 5 * b, 20 * b) if x < T]
    val, _ = integrate.quad(lambda u: (T - u) * np.exp(-a * u ** (2 * h)), 0.0, T, limit=1000, points=pts or None)
    return 2.0 * val


def second_moment_discrete(sq_norm: float, T: float, tau: float, H) -> float:
    """E|sum_t tau exp(-2 pi i xi . B_{t tau})|^2 over t = 1..floor(T / tau)."""
    a = TWO_PI2 * float(sq_norm)
    n = int(math.floor(T / tau + 1e-9))
    k = np.arange(1, n)
    return float(tau**2 * (n + 2.0 * np.sum((n - k) * np.exp(-a * (k * tau) ** (2 * float(H))))))


# ---------------------------------------------------------------- path Sobolev estimator


def _l2_weights(sq, t):
    w = np.zeros_like(sq)
    nz = sq > 0
    w[nz] = np.exp(-2 * TWO_PI2 * t * sq[nz]) / (4 * math.pi**2 * sq[nz])
    return w


def sobolev_l2_direct(points, weight, heat_time, K) -> float:
    """||grad u|| for -Laplace u = P_t(mu - mass) with mu = weight * sum of Diracs; exact mode sums."""
    from .occupation import spectrum_of_points

    pts = np.atleast_2d(points)
    spec = spectrum_of_points(pts, weight, K, weight * len(pts))
    return grad_l2_norm(poisson_gradient(center(heat_smooth(spec, heat_time))))


def spread_resolution(K: int) -> int:
    return sfft.next_fast_len(max(2 * K + 2, 8), real=True)


def sobolev_l2_spread(points, weight, heat_time, K, resolution=None, chunk=1 << 20) -> float:
    """Same quantity as :func:`sobolev_l2_direct`, with mode sums from a cloud-in-cell grid.

    The deposit's window |W(xi)|^2 = prod sinc^4(pi xi_j / m) is divided out; aliasing from
    modes beyond m/2 is the only approximation.
    """
    pts = np.atleast_2d(points)
    d = pts.shape[1]
    m = spread_resolution(K) if resolution is None else int(resolution)
    if m < 2 * K + 2:
        raise ValueError("resolution must exceed 2K + 1")
    grid = np.zeros((m,) * d)
    for s in range(0, len(pts), chunk):
        cic_deposit(pts[s : s + chunk], m, weight, out=grid)
    F = sfft.rfftn(grid, overwrite_x=True)
    del grid
    k_full = np.fft.fftfreq(m, 1.0 / m)
    k_last = np.arange(m // 2 + 1, dtype=float)
    win = lambda k: np.sinc(k / m) ** 2
    keep_full = np.abs(k_full) <= K
    kf = k_full[keep_full]
    kl = k_last[: K + 1]
    # conjugate pairs along the halved axis count twice
    herm = np.where(kl == 0, 1.0, 2.0)
    total = 0.0
    # loop over the first axis to bound temporaries
    for i0 in np.nonzero(keep_full)[0] if d > 1 else [None]:
        if d == 1:
            sub = F[: K + 1]
            sq = kl**2
            wnd = win(kl)
            total += float(np.sum(herm * _l2_weights(sq, heat_time) * np.abs(sub) ** 2 / wnd**2))
            break
        sub = F[i0][np.ix_(*([np.nonzero(keep_full)[0]] * (d - 2) + [np.arange(K + 1)]))]
        grids = np.meshgrid(*([kf] * (d - 2) + [kl]), indexing="ij")
        sq = k_full[i0] ** 2 + sum(g * g for g in grids)
        wnd = win(k_full[i0]) * math.prod(win(g) for g in grids)
        total += float(np.sum(herm * _l2_weights(sq, heat_time) * np.abs(sub) ** 2 / wnd**2))
    return math.sqrt(total)


def sobolev_l2_points(points, weight, heat_time, K, method="auto") -> float:
    """Dispatch between exact mode sums and the gridded estimator by cost."""
    pts = np.atleast_2d(points)
    n, d = pts.shape
    if method == "auto":
        method = "direct" if n * (K + 1) * (2 * K + 1) ** (d - 1) <= 2e8 else "spread"
    if method == "direct":
        return sobolev_l2_direct(pts, weight, heat_time, K)
    if method == "spread":
        return sobolev_l2_spread(pts, weight, heat_time, K)
    raise ValueError(f"unknown method {method!r}")


def l2_cutoff(heat_time: float, sq_tol: float = 1e-3) -> int:
    """K beyond which the squared heat multiplier falls below ``sq_tol``."""
    return default_cutoff(heat_time, rtol=math.sqrt(sq_tol))
