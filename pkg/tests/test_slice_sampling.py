import numpy as np
import pytest
from scipy import stats

from batchbo.errors import FlatSurfaceError
from batchbo.objectives import Domain
from batchbo.slice_sampling import bgss_sample, estimate_alpha_min

UNIT = Domain.continuous([(0.0, 1.0)])


def constant_surface(X):
    return np.full(np.atleast_2d(X).shape[0], 2.0)


def linear_surface(X):
    return np.atleast_2d(X)[:, 0].copy()


def neg_x_sin_x(X):
    x = np.atleast_2d(X)[:, 0]
    return -x * np.sin(x)


class TestEstimateAlphaMin:
    def test_nonnegative_surface_floor(self):
        """EI-like surfaces are >= 0, so the floor cannot dip below that
        by more than numerical slack."""
        def surface(X):
            x = np.atleast_2d(X)[:, 0]
            return (x - 0.3) ** 2
        floor = estimate_alpha_min(surface, UNIT, seed=0)
        assert -1e-9 <= floor <= float(np.min(surface(UNIT.sample_uniform(
            1000, np.random.default_rng(0)))))

    def test_constant_surface(self):
        floor = estimate_alpha_min(constant_surface, UNIT, seed=1)
        assert floor == pytest.approx(2.0, abs=1e-9)

    def test_toy_surface_grid_oracle(self):
        """-x sin(x) on [0,10]: dense-grid oracle pins the minimum."""
        domain = Domain.continuous([(0.0, 10.0)])
        xs = np.linspace(0.0, 10.0, 10**6)
        grid_min = float(np.min(-xs * np.sin(xs)))
        grid_argmin = float(xs[np.argmin(-xs * np.sin(xs))])
        assert grid_min == pytest.approx(-7.9167, abs=1e-3)
        assert grid_argmin == pytest.approx(7.9787, abs=1e-3)
        floor = estimate_alpha_min(neg_x_sin_x, domain, seed=2)
        assert floor <= grid_min + 1e-6
        assert floor == pytest.approx(grid_min, abs=1e-4)

    def test_discrete_exact_minimum(self):
        pool = Domain.discrete([[0.0], [1.0], [2.0]])
        floor = estimate_alpha_min(lambda X: np.atleast_2d(X)[:, 0] ** 2, pool, seed=3)
        assert floor == 0.0


class TestBgssContinuous:
    def test_constant_surface_uniform_marginal(self):
        """Flat surface above the floor: chi-square over 10 bins."""
        ss = bgss_sample(constant_surface, UNIT, 10_000, alpha_min=0.0, seed=4)
        counts, _ = np.histogram(ss.samples[:, 0], bins=10, range=(0, 1))
        _, p = stats.chisquare(counts)
        assert p > 0.01

    def test_linear_surface_triangular_marginal(self):
        """alpha(x) = x with floor 0 has CDF x^2; KS distance < 0.02."""
        ss = bgss_sample(linear_surface, UNIT, 10_000, alpha_min=0.0, seed=5)
        d, _ = stats.kstest(ss.samples[:, 0], lambda t: t**2)
        assert d < 0.02

    def test_samples_above_floor(self):
        ss = bgss_sample(linear_surface, UNIT, 2000, alpha_min=0.2, seed=6)
        assert np.all(ss.alpha_values > 0.2)
        assert np.all(ss.samples >= 0.0) and np.all(ss.samples <= 1.0)
        assert ss.samples.shape == (2000, 1)

    def test_determinism(self):
        a = bgss_sample(linear_surface, UNIT, 500, alpha_min=0.0, seed=7)
        b = bgss_sample(linear_surface, UNIT, 500, alpha_min=0.0, seed=7)
        np.testing.assert_array_equal(a.samples, b.samples)
        np.testing.assert_array_equal(a.alpha_values, b.alpha_values)
        assert a.n_proposals_used == b.n_proposals_used

    def test_region_mass_consistency(self):
        """Acceptance rate x envelope volume ~ integral of the shifted
        surface (Monte Carlo integration identity), within 5%."""
        ss = bgss_sample(linear_surface, UNIT, 20_000, alpha_min=0.0, seed=8)
        assert ss.n_restarts == 0
        rate = ss.n_requested / ss.n_proposals_used
        envelope_volume = (ss.envelope - ss.alpha_min) * 1.0
        mass = rate * envelope_volume
        assert mass == pytest.approx(0.5, rel=0.05)

    def test_flat_surface_raises(self):
        with pytest.raises(FlatSurfaceError):
            bgss_sample(constant_surface, UNIT, 100, alpha_min=2.0, seed=9)

    def test_budget_exhaustion_raises(self):
        """A spike so narrow the sampler cannot hit it within budget."""
        def needle(X):
            x = np.atleast_2d(X)[:, 0]
            return np.where(np.abs(x - 0.5) < 1e-9, 1.0, 1e-15)
        with pytest.raises(FlatSurfaceError):
            bgss_sample(needle, UNIT, 100, alpha_min=0.0, seed=10,
                        proposal_budget_factor=100)


class TestBgssDiscrete:
    def test_exact_weight_frequencies(self):
        pool = Domain.discrete([[0.0], [1.0], [2.0]])

        def weights(X):
            x = np.atleast_2d(X)[:, 0]
            return np.where(x == 1.0, 2.0, 1.0)

        ss = bgss_sample(weights, pool, 10_000, alpha_min=0.0, seed=11)
        freq = np.array([np.mean(ss.samples[:, 0] == v) for v in (0.0, 1.0, 2.0)])
        np.testing.assert_allclose(freq, [0.25, 0.5, 0.25], atol=0.02)

    def test_zero_weight_candidates_never_drawn(self):
        pool = Domain.discrete([[0.0], [1.0], [2.0]])

        def weights(X):
            x = np.atleast_2d(X)[:, 0]
            return np.where(x == 2.0, 5.0, 0.0)

        ss = bgss_sample(weights, pool, 1000, alpha_min=0.0, seed=12)
        assert np.all(ss.samples[:, 0] == 2.0)

    def test_all_zero_raises(self):
        pool = Domain.discrete([[0.0], [1.0]])
        with pytest.raises(FlatSurfaceError):
            bgss_sample(lambda X: np.zeros(np.atleast_2d(X).shape[0]), pool,
                        100, alpha_min=0.0, seed=13)
