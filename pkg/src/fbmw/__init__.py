"""Fractional Brownian motion on the flat torus: occupation measures, spectral proxies and transport rates."""

from .fbm import FbmPath, TorusPath, sample_fbm_path, sample_fgn, sample_torus_path
from .occupation import GridMeasure, SpectralOccupation, occupation_fourier, occupation_grid
from .rates import RateLaw, rate_continuous, rate_discrete
from .transport import wasserstein_circle_exact, wasserstein_entropic, wasserstein_exact

__version__ = "0.1.0"

__all__ = [
    "FbmPath",
    "GridMeasure",
    "RateLaw",
    "SpectralOccupation",
    "TorusPath",
    "occupation_fourier",
    "occupation_grid",
    "rate_continuous",
    "rate_discrete",
    "sample_fbm_path",
    "sample_fgn",
    "sample_torus_path",
    "wasserstein_circle_exact",
    "wasserstein_entropic",
    "wasserstein_exact",
]
