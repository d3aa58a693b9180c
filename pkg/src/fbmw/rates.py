"""Closed-form convergence laws as (exponent, log power) pairs."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .spectral import epsilon_rule_continuous, epsilon_rule_discrete, rational, regime_of

PER_UNIT = "per-unit-mass W_p^p"
OCCUPATION = "occupation W_p^p"
OCCUPATION_W1 = "W_1 of occupation"


@dataclass(frozen=True)
class RateLaw:
    """Law T^exponent (log T)^log_power."""

    regime: str
    exponent: Fraction
    log_power: Fraction = Fraction(0)
    normalization: str = PER_UNIT
    heuristic: bool = False

    def __post_init__(self):
        if self.log_power != 0 and self.regime != "critical":
            raise ValueError("a logarithmic factor only appears at the critical dimension")

    def __call__(self, T):
        T = np.asarray(T, dtype=float)
        out = T ** float(self.exponent)
        if self.log_power:
            out = out * np.log(T) ** float(self.log_power)
        return out

    def occupation_scale(self) -> "RateLaw":
        """Same law for the occupation measure of mass T (one more power of T)."""
        if self.normalization != PER_UNIT:
            return self
        return RateLaw(self.regime, self.exponent + 1, self.log_power, OCCUPATION, self.heuristic)

    def columns(self) -> dict:
        return {
            "regime": self.regime,
            "exponent_num": self.exponent.numerator,
            "exponent_den": self.exponent.denominator,
            "log_power": str(self.log_power),
        }


def _check(d, H):
    if int(d) != d or d < 1:
        raise ValueError("d must be a positive integer")
    h = rational(H)
    if not 0 < h < 1:
        raise ValueError("H must lie in (0, 1)")
    return int(d), h


def rate_continuous(d: int, H, p=1) -> RateLaw:
    """Per-unit-mass E W_p^p of the empirical measure against the uniform measure."""
    d, h = _check(d, H)
    p = rational(p)
    if p < 1:
        raise ValueError("p must be >= 1")
    reg = regime_of(d, h)
    if reg == "subcritical":
        return RateLaw(reg, -p / 2)
    if reg == "critical":
        return RateLaw(reg, -p / 2, p / 2)
    return RateLaw(reg, -p / (d - 1 / h))


def rate_discrete(d: int, H, alpha, reading: str = "reciprocal") -> RateLaw:
    """Occupation-scale E W_1 of the sampled measure with spacing tau ~ T^-alpha.

    ``reading="reciprocal"`` uses 1/(d - 1/H) as the first argument of the minimum in the
    supercritical case, in line with the matching epsilon rule. ``reading="printed"``
    uses the bare d - 1/H.
    """
    d, h = _check(d, H)
    a = rational(alpha)
    if a <= 0:
        raise ValueError("alpha must be positive")
    reg = regime_of(d, h)
    tail = (1 + a) / d
    half = Fraction(1, 2)
    if d <= 2:
        return RateLaw(reg, 1 - half, normalization=OCCUPATION_W1)
    if reg == "subcritical":
        return RateLaw(reg, 1 - min(half, tail), normalization=OCCUPATION_W1)
    if reg == "critical":
        # max{sqrt(log T / T), T^-tail}: the slower decay wins, ties go to the log term
        if tail >= half:
            return RateLaw(reg, half, half, OCCUPATION_W1)
        return RateLaw(reg, 1 - tail, normalization=OCCUPATION_W1)
    if reading == "reciprocal":
        first = 1 / (d - 1 / h)
    elif reading == "printed":
        first = d - 1 / h
    else:
        raise ValueError(f"unknown reading {reading!r}")
    return RateLaw(reg, 1 - min(first, tail), normalization=OCCUPATION_W1)


def proxy_rate(d: int, H) -> RateLaw:
    """Growth of T sqrt(eps(T)) under the continuous epsilon rule."""
    d, h = _check(d, H)
    rule = epsilon_rule_continuous(d, h)
    return RateLaw(rule.regime, 1 - rule.exponent, rule.log_power, OCCUPATION_W1)


def proxy_rate_discrete(d: int, H, alpha) -> RateLaw:
    """Growth of T sqrt(eps(T)) under the sampled-path epsilon rule."""
    d, h = _check(d, H)
    rule = epsilon_rule_discrete(d, h, alpha)
    return RateLaw(rule.regime, 1 - rule.exponent, rule.log_power, OCCUPATION_W1)


def conjectured_quantization_rate(d: int, H) -> RateLaw:
    """Heuristic occupation-scale law T^(1 - 1/(d - 1/H)); reported, never asserted."""
    d, h = _check(d, H)
    if d <= 1 / h:
        raise ValueError("requires d > 1/H")
    return RateLaw(regime_of(d, h), 1 - 1 / (d - 1 / h), normalization=OCCUPATION_W1, heuristic=True)
