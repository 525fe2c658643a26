import numpy as np
import pytest

from batchbo.acquisition import AcquisitionContext, ei_surface, expected_improvement
from batchbo.gp import GpHyperparams, GpPosterior, exact_posterior


class _FixedPosterior:
    """Stand-in posterior returning preset (mean, variance) pairs,
    so EI can be exercised at exact inputs."""

    def __init__(self, mean, var):
        self.mean = float(mean)
        self.var = float(var)

    def predict_many(self, points):
        n = np.atleast_2d(points).shape[0]
        return np.full(n, self.mean), np.full(n, self.var)


def _mc_ei(mu, sigma, incumbent, n=10**6, seed=0):
    """Monte Carlo oracle: E[max(Y - f*, 0)], Y ~ N(mu, sigma^2)."""
    rng = np.random.default_rng(seed)
    y = rng.normal(mu, sigma, size=n)
    return float(np.maximum(y - incumbent, 0.0).mean())


class TestExpectedImprovement:
    def test_at_incumbent_unit_sigma(self):
        """mu = f*, sigma = 1: EI collapses to phi(0)."""
        ctx = AcquisitionContext(_FixedPosterior(0.0, 1.0), incumbent=0.0)
        ei = expected_improvement(ctx, [0.0])
        assert ei == pytest.approx(0.3989422804014327, abs=1e-12)
        assert ei == pytest.approx(_mc_ei(0.0, 1.0, 0.0), abs=1e-3)

    def test_degenerate_no_improvement(self):
        ctx = AcquisitionContext(_FixedPosterior(-0.5, 0.0), incumbent=0.0)
        assert expected_improvement(ctx, [0.0]) == 0.0

    def test_degenerate_sure_improvement(self):
        ctx = AcquisitionContext(_FixedPosterior(1.0, 0.0), incumbent=0.0)
        assert expected_improvement(ctx, [0.0]) == 1.0

    def test_monte_carlo_agreement(self):
        """Closed form vs MC at 20 random (mu, sigma, f*) triples,
        within 3 standard errors."""
        rng = np.random.default_rng(7)
        for i in range(20):
            mu = float(rng.normal(0, 2))
            sigma = float(rng.uniform(0.1, 3.0))
            inc = float(rng.normal(0, 2))
            ctx = AcquisitionContext(_FixedPosterior(mu, sigma**2), incumbent=inc)
            ei = expected_improvement(ctx, [0.0])
            n = 10**6
            draws = rng.normal(mu, sigma, size=n)
            gains = np.maximum(draws - inc, 0.0)
            se = gains.std() / np.sqrt(n)
            assert abs(ei - gains.mean()) < 3 * se + 1e-12

    def test_monotone_in_mean(self):
        incs = 0.0
        values = [
            expected_improvement(AcquisitionContext(_FixedPosterior(mu, 1.0), incs), [0.0])
            for mu in np.linspace(-3, 3, 41)
        ]
        assert np.all(np.diff(values) >= 0)

    def test_monotone_in_sigma_at_incumbent(self):
        values = [
            expected_improvement(AcquisitionContext(_FixedPosterior(0.0, s**2), 0.0), [0.0])
            for s in np.linspace(2.0, 1e-6, 40)
        ]
        assert np.all(np.diff(values) <= 0)

    def test_non_negative(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            ctx = AcquisitionContext(
                _FixedPosterior(rng.normal(), rng.uniform(0, 2)), rng.normal()
            )
            assert expected_improvement(ctx, [0.0]) >= 0.0


class TestEiSurface:
    def _real_ctx(self):
        X = np.array([[0.0], [0.5], [1.0]])
        y = np.array([0.1, 0.4, 0.2])
        gp = exact_posterior(GpHyperparams(1.0, [0.3], 1e-6), X, y)
        return AcquisitionContext(gp, incumbent=float(y.max()))

    def test_singleton_matches_scalar(self):
        ctx = self._real_ctx()
        pts = np.array([[0.3]])
        np.testing.assert_allclose(ei_surface(ctx, pts)[0],
                                   expected_improvement(ctx, pts[0]))

    def test_matches_scalar_loop(self):
        """Vectorized surface equals the scalar loop elementwise.

        BLAS picks different kernels for (1, d) and (1000, d) products,
        so the last bits can differ; 5e-13 bounds that rounding while
        still catching any real vectorization bug.
        """
        ctx = self._real_ctx()
        rng = np.random.default_rng(11)
        pts = rng.uniform(0, 1, size=(1000, 1))
        vec = ei_surface(ctx, pts)
        loop = np.array([expected_improvement(ctx, p) for p in pts])
        assert np.max(np.abs(vec - loop)) < 5e-13

    def test_near_zero_at_observed_optimum(self):
        """With tiny noise, no expected gain remains at training points."""
        X = np.array([[0.0], [0.5], [1.0]])
        y = np.array([0.1, 0.4, 0.2])
        gp = exact_posterior(GpHyperparams(1.0, [0.3], 1e-12), X, y)
        ctx = AcquisitionContext(gp, incumbent=float(y.max()))
        ei = ei_surface(ctx, X)
        assert np.all(ei < 1e-4 * gp.hyperparams.signal_variance)
