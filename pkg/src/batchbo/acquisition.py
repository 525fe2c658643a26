"""Expected improvement over a GP posterior (maximization convention).

Closed form: EI(x) = (mu - f*) Phi(g) + sigma phi(g) with
g = (mu - f*) / sigma, where f* is the best observed value.  When the
predictive deviation collapses (sigma < 1e-12) the degenerate value
max(mu - f*, 0) is returned, avoiding the 0/0 in g.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .gp import GpPosterior

_SIGMA_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class AcquisitionContext:
    """Posterior plus the incumbent best observed value f*."""

    gp: GpPosterior
    incumbent: float


def _normal_pdf(z: np.ndarray) -> np.ndarray:
    return np.exp(-0.5 * z**2) / math.sqrt(2 * math.pi)


def ei_surface(ctx: AcquisitionContext, points) -> np.ndarray:
    """Expected improvement at each row of an (n, d) array."""
    means, variances = ctx.gp.predict_many(points)
    sigma = np.sqrt(variances)
    delta = means - ctx.incumbent

    degenerate = sigma < _SIGMA_FLOOR
    safe_sigma = np.where(degenerate, 1.0, sigma)
    g = delta / safe_sigma
    ei = delta * ndtr(g) + safe_sigma * _normal_pdf(g)
    ei = np.where(degenerate, np.maximum(delta, 0.0), ei)
    return np.maximum(ei, 0.0)


def expected_improvement(ctx: AcquisitionContext, x) -> float:
    """Expected improvement at a single d-vector."""
    return float(ei_surface(ctx, np.asarray(x, dtype=float)[None, :])[0])
