"""Batch generalized slice sampling over an acquisition surface.

Draws points distributed proportionally to alpha(x) - alpha_min by
sampling uniformly from the region under the shifted surface and keeping
the x-marginal.  Continuous domains use rejection sampling beneath an
adaptively tracked envelope; discrete domains sample candidates exactly
by normalized weights.

Acquisition surfaces are vectorized callables: (n, d) array -> (n,) values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import FlatSurfaceError, ParameterError
from .objectives import Domain

_PILOT_SIZE = 2048
_ENVELOPE_HEADROOM = 1.5


@dataclass
class SliceSampleSet:
    """Samples from the region under the acquisition surface.

    ``envelope`` is the final rejection ceiling and ``n_restarts`` counts
    envelope breaches (each discards the samples collected so far to keep
    the marginal exact).  Both are informational for continuous domains
    and zero/NaN-free trivia for discrete ones.
    """

    samples: np.ndarray
    alpha_min: float
    alpha_values: np.ndarray
    n_requested: int
    n_proposals_used: int
    envelope: float
    n_restarts: int


def latin_hypercube(n: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    """n stratified points in the unit box."""
    u = (rng.random((n, dim)) + np.array([rng.permutation(n) for _ in range(dim)]).T) / n
    return u


def estimate_alpha_min(acq, domain: Domain, seed: int, n_starts: int = 20) -> float:
    """Floor of the acquisition surface over the domain.

    Discrete domains return the exact pool minimum; continuous domains
    run local descent from Latin-hypercube starts and return the best
    minimum found.
    """
    if domain.kind == "discrete":
        return float(np.min(acq(domain.candidates)))

    rng = np.random.default_rng(seed)
    lower, widths = domain.lower, domain.widths
    starts = lower + latin_hypercube(n_starts, domain.dim, rng) * widths
    best = float(np.min(acq(starts)))
    bounds = list(domain.bounds)

    def scalar(x):
        return float(acq(np.asarray(x, dtype=float)[None, :])[0])

    for x0 in starts:
        res = minimize(scalar, x0, method="L-BFGS-B", bounds=bounds)
        if res.fun < best:
            best = float(res.fun)
    return best


def _sample_discrete(acq, domain, n_s, alpha_min, rng):
    weights = acq(domain.candidates) - alpha_min
    np.maximum(weights, 0.0, out=weights)
    total = float(weights.sum())
    if total <= 0.0 or not np.isfinite(total):
        raise FlatSurfaceError("no candidate rises above the acquisition floor")
    idx = rng.choice(domain.n_candidates, size=n_s, replace=True, p=weights / total)
    return SliceSampleSet(
        samples=domain.candidates[idx].copy(),
        alpha_min=float(alpha_min),
        alpha_values=weights[idx] + alpha_min,
        n_requested=n_s,
        n_proposals_used=n_s,
        envelope=float(weights.max() + alpha_min),
        n_restarts=0,
    )


def bgss_sample(acq, domain: Domain, n_s: int, alpha_min: float, seed: int,
                proposal_budget_factor: int = 10_000) -> SliceSampleSet:
    """Draw n_s points with density proportional to acq(x) - alpha_min.

    Raises FlatSurfaceError when the surface never rises measurably above
    the floor or the proposal budget (proposal_budget_factor * n_s) runs
    out; callers fall back to uniform domain sampling.
    """
    if n_s < 1:
        raise ParameterError("n_s must be >= 1")
    rng = np.random.default_rng(seed)
    if domain.kind == "discrete":
        return _sample_discrete(acq, domain, n_s, alpha_min, rng)

    pilot = domain.sample_uniform(_PILOT_SIZE, rng)
    pilot_alpha = acq(pilot)
    peak = float(np.max(pilot_alpha))
    flat_tol = 1e-12 * max(1.0, abs(alpha_min), abs(peak))
    if peak - alpha_min <= flat_tol:
        raise FlatSurfaceError("surface indistinguishable from its floor on the pilot scan")
    envelope = alpha_min + (peak - alpha_min) * _ENVELOPE_HEADROOM

    budget = proposal_budget_factor * n_s
    chunk = max(8192, 4 * n_s)
    accepted_x: list[np.ndarray] = []
    accepted_alpha: list[np.ndarray] = []
    n_accepted = 0
    n_used = 0
    n_restarts = 0
    while n_used < budget:
        m = min(chunk, budget - n_used)
        xs = domain.sample_uniform(m, rng)
        alphas = acq(xs)
        u = rng.uniform(alpha_min, envelope, size=m)
        n_used += m
        top = float(np.max(alphas))
        if top > envelope:
            # Envelope breach: the marginal so far is biased, start over.
            envelope = alpha_min + (top - alpha_min) * _ENVELOPE_HEADROOM
            accepted_x.clear()
            accepted_alpha.clear()
            n_accepted = 0
            n_restarts += 1
            continue
        keep = u < alphas
        if np.any(keep):
            hits = np.nonzero(keep)[0]
            if n_accepted + hits.size >= n_s:
                # Stop at the accepting proposal so n_proposals_used
                # reflects exactly the work the n_s samples required.
                last = hits[n_s - n_accepted - 1]
                n_used -= m - (int(last) + 1)
                keep[last + 1:] = False
            accepted_x.append(xs[keep])
            accepted_alpha.append(alphas[keep])
            n_accepted += int(keep.sum())
        if n_accepted >= n_s:
            return SliceSampleSet(
                samples=np.concatenate(accepted_x),
                alpha_min=float(alpha_min),
                alpha_values=np.concatenate(accepted_alpha),
                n_requested=n_s,
                n_proposals_used=n_used,
                envelope=float(envelope),
                n_restarts=n_restarts,
            )
    raise FlatSurfaceError(
        f"proposal budget ({budget}) exhausted with {n_accepted}/{n_s} acceptances"
    )
