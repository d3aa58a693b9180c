"""Experiment configuration: dataclass, ``key=value`` files and validation."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

METRICS = ("wasserstein_exact", "wasserstein_entropic", "sobolev_l2", "sobolev_lp")
EPSILON_MODES = ("rule_continuous", "rule_discrete", "fixed")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    """One Monte Carlo rate sweep.

    ``n_steps_max`` is the step count at the largest horizon; smaller horizons keep the
    same step ``T_grid[-1] / n_steps_max``. Discrete sweeps ignore it and step by
    ``tau = tau_scale * T**-alpha`` instead.

    ``eps_scale`` converts the epsilon of the rule into the heat time of the semigroup:
    the default 1/(2 pi^2) damps mode xi by exp(-eps |xi|^2). ``spectral_tol`` drops
    modes whose squared damping factor falls below it.
    """

    d: int = 1
    H: float = 0.5
    p: float = 1.0
    T_grid: tuple = tuple(2.0**k for k in range(4, 11))
    replicas: int = 32
    metric: str = "wasserstein_exact"
    epsilon_mode: str = "rule_continuous"
    epsilon: float | None = None
    alpha: float | None = None
    n_steps_max: int = 1 << 20
    tau_scale: float = 1.0
    resolution: int = 256
    seed: int = 0
    tolerance: float = 0.1
    threads: int = 1
    reg: float = 1e-3
    sinkhorn_tol: float = 1e-6
    sinkhorn_max_iter: int = 20_000
    eps_scale: float = 1.0 / (2.0 * math.pi**2)
    spectral_tol: float = 1e-3
    spectral_method: str = "auto"
    rate_reading: str = "reciprocal"

    def __post_init__(self):
        object.__setattr__(self, "T_grid", tuple(float(t) for t in self.T_grid))

    @property
    def discrete(self) -> bool:
        return self.epsilon_mode == "rule_discrete" or (self.alpha is not None and self.metric.startswith("wass"))

    def validate(self, discrete: bool = False) -> "ExperimentConfig":
        T = self.T_grid
        if len(T) < 4:
            raise ConfigError("T_grid too short: a slope fit needs at least 4 horizons")
        if any(b <= a for a, b in zip(T, T[1:])):
            raise ConfigError("T_grid must be strictly increasing")
        if T[0] <= 0:
            raise ConfigError("horizons must be positive")
        if self.replicas < 8:
            raise ConfigError("replicas must be >= 8")
        if self.metric not in METRICS:
            raise ConfigError(f"unknown metric {self.metric!r}; choose from {METRICS}")
        if self.epsilon_mode not in EPSILON_MODES:
            raise ConfigError(f"unknown epsilon_mode {self.epsilon_mode!r}")
        if self.epsilon_mode == "fixed" and not (self.epsilon and self.epsilon > 0):
            raise ConfigError("fixed epsilon mode needs epsilon > 0")
        if discrete or self.epsilon_mode == "rule_discrete":
            if self.alpha is None or self.alpha <= 0:
                raise ConfigError("discrete sweeps need alpha > 0")
        if not 0 < self.H < 1:
            raise ConfigError("H must lie in (0, 1)")
        if self.d < 1 or self.p < 1:
            raise ConfigError("need d >= 1 and p >= 1")
        if self.metric.startswith("wasserstein") and self.resolution < 2:
            raise ConfigError("resolution must be >= 2")
        if self.epsilon_mode == "rule_continuous" and self.metric.startswith("sobolev") and T[0] <= 1:
            raise ConfigError("epsilon rules need horizons above 1")
        return self

    def replace(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
_ALIASES = {"hurst": "H", "t_grid": "T_grid", "t-grid": "T_grid", "epsilon-mode": "epsilon_mode"}


def parse_t_grid(text: str) -> tuple:
    """``16,32,64`` or a power-of-two range ``2^4..2^10``."""
    text = text.strip()
    if ".." in text:
        lo, hi = (s.strip() for s in text.split(".."))
        base_lo, e_lo = lo.split("^")
        base_hi, e_hi = hi.split("^")
        if base_lo != base_hi:
            raise ConfigError("range endpoints need the same base")
        b = float(base_lo)
        return tuple(b**k for k in range(int(e_lo), int(e_hi) + 1))
    return tuple(float(x) for x in text.replace(" ", "").split(",") if x)


def parse_epsilon_mode(text: str):
    """``rule_continuous``, ``rule_discrete(0.2)`` or ``fixed(0.01)`` -> (mode, value)."""
    text = text.strip()
    if "(" in text:
        name, arg = text.rstrip(")").split("(", 1)
        return name.strip(), float(arg)
    return text, None


def coerce(key: str, value: str):
    key = _ALIASES.get(key, key)
    if key not in _FIELDS:
        raise ConfigError(f"unknown config key {key!r}")
    if key == "T_grid":
        return key, parse_t_grid(value)
    typ = _FIELDS[key].type
    if key in ("epsilon", "alpha"):
        return key, None if value.lower() in ("", "none") else float(value)
    if typ == "int":
        return key, int(float(value)) if "e" in value.lower() else int(value, 0)
    if typ == "float":
        return key, float(value)
    return key, value


def apply_settings(cfg: ExperimentConfig, settings: dict) -> ExperimentConfig:
    kw = {}
    for k, v in settings.items():
        if k in ("epsilon_mode", "epsilon-mode"):
            mode, val = parse_epsilon_mode(v)
            kw["epsilon_mode"] = mode
            if mode == "fixed" and val is not None:
                kw["epsilon"] = val
            if mode == "rule_discrete" and val is not None:
                kw["alpha"] = val
            continue
        key, val = coerce(k, v)
        kw[key] = val
    return cfg.replace(**kw)


def read_config(path) -> dict:
    """Line-oriented ``key=value`` pairs; ``#`` starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{n}: expected key=value")
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def write_config(cfg: ExperimentConfig, fh) -> None:
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        if f.name == "T_grid":
            v = ",".join(format(t, ".17g") for t in v)
        elif isinstance(v, float):
            v = format(v, ".17g")
        fh.write(f"{f.name}={'none' if v is None else v}\n")
