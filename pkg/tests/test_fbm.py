import io
import math

import numpy as np
import pytest

from fbmw.fbm import (
    CovarianceError,
    FbmPath,
    HurstIndex,
    circulant_eigenvalues,
    coordinate_seed,
    embedding_is_valid,
    fbm_covariance,
    fgn_autocovariance,
    project_to_torus,
    sample_fbm_path,
    sample_fgn,
    sample_torus_path,
    write_path_csv,
)
from fbmw.transport import torus_distance


def fgn_batch(n, H, reps, seed0=0, **kw):
    return np.array([sample_fgn(n, H, 1.0, seed0 + r, **kw) for r in range(reps)])


def within_se(samples, target, k=3.0):
    se = samples.std(ddof=1) / math.sqrt(samples.size)
    return abs(samples.mean() - target) <= k * se


class TestHurstIndex:
    @pytest.mark.parametrize("bad", [0.0, 1.0, -0.1, 1.5, float("nan")])
    def test_rejects_endpoints_and_outside(self, bad):
        with pytest.raises(ValueError):
            HurstIndex(bad)

    def test_accepts_interior(self):
        assert float(HurstIndex(0.3)) == 0.3


class TestCovariance:
    def test_unit_variance(self):
        assert fbm_covariance(1, 1, 0.5) == 1.0

    def test_brownian_min(self):
        assert fbm_covariance(1, 2, 0.5) == pytest.approx(1.0, abs=1e-15)

    def test_rough_value(self):
        ref = 0.5 * (0.5**0.5 + 2**0.5 - 1.5**0.5)
        assert fbm_covariance(0.5, 2.0, 0.25) == pytest.approx(ref, rel=1e-14)
        # 40-digit mpmath evaluation of the same closed formula
        assert fbm_covariance(0.5, 2.0, 0.25) == pytest.approx(0.44828773608402676205, rel=1e-14)

    def test_symmetric_and_diagonal(self):
        rng = np.random.default_rng(1)
        for s, t, h in rng.random((20, 3)) * [5, 5, 0.98] + [0, 0, 0.01]:
            assert fbm_covariance(s, t, h) == pytest.approx(fbm_covariance(t, s, h), rel=1e-14)
            assert fbm_covariance(t, t, h) == pytest.approx(t ** (2 * h), rel=1e-14)

    def test_autocovariance_examples(self):
        assert fgn_autocovariance(0, 0.75, 1.0) == 1.0
        assert fgn_autocovariance(1, 0.5, 1.0) == 0.0
        assert fgn_autocovariance(1, 0.75, 1.0) == pytest.approx(0.5 * (2**1.5 - 2), rel=1e-14)
        assert fgn_autocovariance(1, 0.75, 1.0) == pytest.approx(0.41421, abs=5e-6)

    def test_autocovariance_matches_increments_of_covariance(self):
        # Cov(B_{(k+1)dt} - B_{k dt}, B_dt - B_0) expanded through fbm_covariance
        H, dt = 0.37, 0.25
        for k in range(0, 6):
            a, b = k * dt, (k + 1) * dt
            ref = fbm_covariance(b, dt, H) - fbm_covariance(a, dt, H)
            assert fgn_autocovariance(k, H, dt) == pytest.approx(ref, rel=1e-12, abs=1e-15)
            assert fgn_autocovariance(-k, H, dt) == fgn_autocovariance(k, H, dt)

    def test_dt_scaling(self):
        assert fgn_autocovariance(0, 0.3, 4.0) == pytest.approx(4.0**0.6)


class TestSampler:
    def test_single_draw_is_standard_normal(self):
        x = np.array([sample_fgn(1, 0.7, 1.0, s)[0] for s in range(20000)])
        assert within_se(x, 0.0)
        assert abs(x.var() - 1.0) < 0.05

    def test_deterministic(self):
        a = sample_fgn(1000, 0.3, 0.5, 12345)
        b = sample_fgn(1000, 0.3, 0.5, 12345)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, sample_fgn(1000, 0.3, 0.5, 12346))

    def test_lag_one_covariance(self):
        X = fgn_batch(8, 0.75, 100_000)
        prod = X[:, 0] * X[:, 1]
        assert within_se(prod, 0.41421356237309515)

    def test_partial_sum_variance(self):
        X = fgn_batch(64, 0.3, 100_000)
        s2 = X.sum(axis=1) ** 2
        assert within_se(s2, 64**0.6)

    def test_covariance_matrix_exact(self):
        n, reps = 24, 100_000
        X = fgn_batch(n, 0.25, reps, seed0=7)
        C = X.T @ X / reps
        ref = fgn_autocovariance(np.abs(np.subtract.outer(np.arange(n), np.arange(n))), 0.25, 1.0)
        # SE of a product mean: sqrt(Var(x_i x_j)/reps), Var = C_ii C_jj + C_ij^2 for Gaussians
        se = np.sqrt((np.outer(np.diag(ref), np.diag(ref)) + ref**2) / reps)
        assert np.all(np.abs(C - ref) <= 4 * se)

    def test_forced_cholesky_matches_law(self):
        X = fgn_batch(16, 0.75, 40_000, method="cholesky")
        assert within_se(X[:, 3] * X[:, 4], fgn_autocovariance(1, 0.75, 1.0))
        assert within_se(X[:, 0] ** 2, 1.0)

    def test_cholesky_failure_raises(self, monkeypatch):
        import fbmw.fbm as fbm

        monkeypatch.setattr(fbm, "fgn_autocovariance", lambda k, H, dt=1.0: -np.ones(np.shape(k)))
        with pytest.raises(CovarianceError):
            fbm.sample_fgn(4, 0.5, method="cholesky")

    @pytest.mark.parametrize("H", [round(0.05 * i, 2) for i in range(1, 20)])
    def test_embedding_nonnegative(self, H):
        for e in range(4, 17, 2):
            assert embedding_is_valid(2**e, H)
        lam = circulant_eigenvalues(2**10, H)
        assert lam.min() >= -1e-10 * lam.max()

    def test_rejects_bad_n(self):
        with pytest.raises(ValueError):
            sample_fgn(0, 0.5)


class TestPaths:
    def test_two_point_path(self):
        p = sample_fbm_path(1.0, 1, 0.5, 1, 3)
        assert p.values.shape == (2, 1)
        assert np.all(p.values[0] == 0)
        assert p.values[1, 0] == sample_fgn(1, 0.5, 1.0, coordinate_seed(3, 0))[0]

    def test_origin_and_length(self):
        p = sample_fbm_path(2.0, 100, 0.6, 3, 1)
        assert p.values.shape == (101, 3)
        assert np.all(p.values[0] == 0)
        assert p.dt == pytest.approx(0.02)
        assert p.horizon == pytest.approx(2.0)

    @pytest.mark.parametrize("H", [0.25, 0.5, 0.75])
    @pytest.mark.parametrize("T", [1.0, 4.0, 16.0])
    def test_self_similarity(self, H, T):
        end = np.array([sample_fbm_path(T, 16, H, 1, s).values[-1, 0] for s in range(20_000)])
        assert within_se(end**2, T ** (2 * H))

    def test_variance_example(self):
        end = np.array([sample_fbm_path(4.0, 32, 0.6, 1, s).values[-1, 0] for s in range(20_000)])
        assert within_se(end**2, 4**1.2)

    def test_coordinates_uncorrelated(self):
        e = np.array([sample_fbm_path(1.0, 8, 0.5, 2, s).values[-1] for s in range(20_000)])
        assert within_se(e[:, 0] * e[:, 1], 0.0)

    def test_path_deterministic(self):
        a = sample_fbm_path(3.0, 50, 0.4, 2, 99)
        b = sample_fbm_path(3.0, 50, 0.4, 2, 99)
        assert np.array_equal(a.values, b.values)

    def test_projection_examples(self):
        p = FbmPath(0.5, 1.0, np.array([[0.0], [1.75], [-0.25], [3.0]]))
        t = project_to_torus(p)
        assert t.values[:, 0].tolist() == [0.0, 0.75, 0.75, 0.0]
        assert t.dt == p.dt

    def test_projection_in_unit_cube(self):
        t = sample_torus_path(50.0, 1000, 0.3, 2, 5)
        assert t.values.min() >= 0 and t.values.max() < 1

    def test_projection_is_one_lipschitz(self):
        rng = np.random.default_rng(2)
        x = rng.normal(scale=3, size=(500, 3))
        y = rng.normal(scale=3, size=(500, 3))
        px = project_to_torus(FbmPath(0.5, 1.0, x)).values
        py = project_to_torus(FbmPath(0.5, 1.0, y)).values
        for a, b, u, v in zip(px, py, x, y):
            assert torus_distance(a, b) <= np.linalg.norm(u - v) + 1e-12

    def test_csv_export(self):
        p = sample_fbm_path(1.0, 4, 0.5, 2, 0)
        buf = io.StringIO()
        write_path_csv(p, buf)
        lines = buf.getvalue().split("\n")
        assert lines[0] == "t,x1,x2"
        assert len(lines) == 7 and lines[-1] == ""
        row = [float(v) for v in lines[2].split(",")]
        assert row[0] == 0.25 and row[1] == p.values[1, 0]
