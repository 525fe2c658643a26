"""Batch-construction strategies.

Every strategy maps (posterior, dataset, domain, k, seed) to a batch of
exactly k points.  KMBBO clusters slice samples of the expected
improvement surface and proposes the centroids; the baselines are naive
top-q EI, Thompson sampling, Constant Liar (mean lie), and Local
Penalization.

Tie-breaking is lowest-index-wins throughout so fixed seeds reproduce
bit-identical batches.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import ndtr

from .acquisition import AcquisitionContext, ei_surface
from .errors import (
    FlatSurfaceError,
    GpFitError,
    ParameterError,
    PoolExhausted,
    StrategyFailure,
)
from .gp import GpPosterior, fit
from .objectives import Dataset, Domain
from .slice_sampling import bgss_sample, latin_hypercube

_MAX_SEED = 2**31 - 1


@dataclass
class Batch:
    """k points chosen for simultaneous evaluation."""

    points: np.ndarray
    strategy: str
    provenance: list = field(default_factory=list)
    snapped: list = field(default_factory=list)
    flags: list = field(default_factory=list)


@dataclass
class KMeansResult:
    centroids: np.ndarray
    assignments: np.ndarray
    inertia: float
    degenerate: bool = False


def _plusplus_seeds(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centroids = np.empty((k, X.shape[1]))
    centroids[0] = X[rng.integers(n)]
    d2 = np.sum((X - centroids[0]) ** 2, axis=1)
    for j in range(1, k):
        total = float(d2.sum())
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centroids[j] = X[idx]
        np.minimum(d2, np.sum((X - centroids[j]) ** 2, axis=1), out=d2)
    return centroids


def _lloyd(X: np.ndarray, centroids: np.ndarray, max_iters: int):
    k = centroids.shape[0]
    assign = None
    for _ in range(max_iters):
        d2 = np.sum((X[:, None, :] - centroids[None, :, :]) ** 2, axis=2)
        new_assign = np.argmin(d2, axis=1)
        own = d2[np.arange(X.shape[0]), new_assign]
        for c in range(k):
            if not np.any(new_assign == c):
                far = int(np.argmax(own))
                new_assign[far] = c
                own[far] = 0.0
        if assign is not None and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for c in range(k):
            centroids[c] = X[assign == c].mean(axis=0)
    _polish_single_moves(X, centroids, assign)
    d2 = np.sum((X[:, None, :] - centroids[None, :, :]) ** 2, axis=2)
    assign = np.argmin(d2, axis=1)
    inertia = float(d2[np.arange(X.shape[0]), assign].sum())
    return centroids, assign, inertia


def _polish_single_moves(X, centroids, assign, max_sweeps: int = 20):
    """Hartigan-style polish: move single points between clusters while
    that lowers the total within-cluster sum of squares.  Escapes Lloyd
    fixpoints that are not single-move optimal."""
    k = centroids.shape[0]
    counts = np.bincount(assign, minlength=k).astype(float)
    sums = np.zeros_like(centroids)
    for c in range(k):
        sums[c] = X[assign == c].sum(axis=0)
    for _ in range(max_sweeps):
        moved = False
        for i in range(X.shape[0]):
            a = assign[i]
            if counts[a] <= 1:
                continue
            x = X[i]
            cost_out = counts[a] / (counts[a] - 1) * float(np.sum((x - centroids[a]) ** 2))
            gain = counts / (counts + 1) * np.sum((x - centroids) ** 2, axis=1)
            gain[a] = np.inf
            b = int(np.argmin(gain))
            if gain[b] < cost_out - 1e-12:
                sums[a] -= x
                counts[a] -= 1
                centroids[a] = sums[a] / counts[a]
                sums[b] += x
                counts[b] += 1
                centroids[b] = sums[b] / counts[b]
                assign[i] = b
                moved = True
        if not moved:
            break


def kmeans_fit(points, k: int, seed: int, n_restarts: int = 10,
               max_iters: int = 300) -> KMeansResult:
    """Lloyd iterations from k-means++ seeding, best of n_restarts by
    within-cluster sum of squares; deterministic given seed."""
    X = np.atleast_2d(np.asarray(points, dtype=float))
    if k < 1:
        raise ParameterError("k must be >= 1")
    n = X.shape[0]
    if n < k:
        centroids = np.unique(X, axis=0)
        d2 = np.sum((X[:, None, :] - centroids[None, :, :]) ** 2, axis=2)
        assign = np.argmin(d2, axis=1)
        inertia = float(d2[np.arange(n), assign].sum())
        return KMeansResult(centroids, assign, inertia, degenerate=True)

    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_restarts):
        seeds = _plusplus_seeds(X, k, rng)
        centroids, assign, inertia = _lloyd(X, seeds.copy(), max_iters)
        if best is None or inertia < best.inertia:
            best = KMeansResult(centroids, assign, inertia)
    return best


def snap_to_candidates(points, domain: Domain, exclude) -> np.ndarray:
    """Greedy nearest-neighbor assignment of points onto distinct,
    unevaluated pool rows, processed in order."""
    if domain.kind != "discrete":
        raise ParameterError("snapping requires a discrete domain")
    cand = domain.candidates
    taken = np.zeros(cand.shape[0], dtype=bool)
    index_of = {cand[i].tobytes(): i for i in range(cand.shape[0])}
    for row in np.atleast_2d(np.asarray(exclude, dtype=float)):
        idx = index_of.get(row.tobytes())
        if idx is not None:
            taken[idx] = True
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if int((~taken).sum()) < pts.shape[0]:
        raise PoolExhausted(
            f"{int((~taken).sum())} unevaluated candidates left, need {pts.shape[0]}"
        )
    out = np.empty((pts.shape[0], cand.shape[1]))
    for i, p in enumerate(pts):
        d2 = np.sum((cand - p) ** 2, axis=1)
        d2[taken] = np.inf
        idx = int(np.argmin(d2))
        taken[idx] = True
        out[i] = cand[idx]
    return out


def _unevaluated_candidates(domain: Domain, data: Dataset) -> np.ndarray:
    cand = domain.candidates
    seen = {p.tobytes() for p in data.points}
    mask = np.array([cand[i].tobytes() not in seen for i in range(cand.shape[0])])
    return cand[mask]


def _argmax_surface(surface, domain: Domain, rng: np.random.Generator,
                    n_starts: int = 20) -> np.ndarray:
    """Multi-start local ascent of a vectorized surface over a box."""
    starts = domain.lower + latin_hypercube(n_starts, domain.dim, rng) * domain.widths
    vals = surface(starts)
    best_idx = int(np.argmax(vals))
    best_x, best_v = starts[best_idx].copy(), float(vals[best_idx])
    bounds = list(domain.bounds)

    def neg(x):
        return -float(surface(np.asarray(x, dtype=float)[None, :])[0])

    for x0 in starts:
        res = minimize(neg, x0, method="L-BFGS-B", bounds=bounds)
        if -res.fun > best_v:
            best_v = -float(res.fun)
            best_x = domain.clip(np.asarray(res.x, dtype=float))
    return best_x


def _pad_to_k(points: np.ndarray, k: int) -> np.ndarray:
    reps = int(np.ceil(k / points.shape[0]))
    return np.tile(points, (reps, 1))[:k]


def slice_centroid_proposals(gp: GpPosterior, incumbent: float, domain: Domain,
                             k: int, n_s: int, seed: int):
    """Core KMBBO proposal step: slice-sample the EI surface, cluster the
    samples, return (k centroids, flags).  Shared with the compressed
    variant, which runs it in a reduced space."""
    if k < 1:
        raise ParameterError("k must be >= 1")
    if n_s < k:
        raise ParameterError("n_s must be >= k")
    rng = np.random.default_rng(seed)
    seed_bgss = int(rng.integers(_MAX_SEED))
    seed_km = int(rng.integers(_MAX_SEED))
    seed_fallback = int(rng.integers(_MAX_SEED))

    ctx = AcquisitionContext(gp, incumbent=incumbent)

    def surface(X):
        return ei_surface(ctx, X)

    flags: list[str] = []
    try:
        # EI is non-negative analytically, so the floor is 0 without a
        # global minimization pass.
        samples = bgss_sample(surface, domain, n_s, 0.0, seed_bgss).samples
    except FlatSurfaceError:
        samples = domain.sample_uniform(n_s, np.random.default_rng(seed_fallback))
        flags.append("bgss-flat-uniform-fallback")

    km = kmeans_fit(samples, k, seed_km)
    points = km.centroids
    if km.degenerate or points.shape[0] < k:
        flags.append("kmeans-degenerate")
        points = _pad_to_k(points, k)
    return points, flags


def kmbbo_batch(gp: GpPosterior, data: Dataset, domain: Domain, k: int,
                n_s: int, seed: int) -> Batch:
    """K-means over slice samples of the EI surface; the centroids form
    the batch (snapped to unevaluated rows on discrete domains)."""
    incumbent = float(np.max(data.oriented_values))
    points, flags = slice_centroid_proposals(gp, incumbent, domain, k, n_s, seed)
    snapped = [False] * k
    if domain.kind == "discrete":
        points = snap_to_candidates(points, domain, data.points_array())
        snapped = [True] * k
    return Batch(points, "kmbbo", provenance=["centroid"] * k, snapped=snapped, flags=flags)


def thompson_batch(gp: GpPosterior, data: Dataset, domain: Domain, k: int,
                   seed: int, n_grid: int = 2000) -> Batch:
    """Each batch point is the argmax of one joint posterior draw over a
    candidate set; duplicates are redrawn, then resolved next-best."""
    rng = np.random.default_rng(seed)
    if domain.kind == "discrete":
        cands = _unevaluated_candidates(domain, data)
        if cands.shape[0] < k:
            raise PoolExhausted(f"{cands.shape[0]} unevaluated candidates left, need {k}")
    else:
        cands = domain.sample_uniform(n_grid, rng)

    draws = gp.sample_posterior(cands, k, int(rng.integers(_MAX_SEED)))
    chosen: list[int] = []
    for i in range(k):
        row = draws[i]
        idx = int(np.argmax(row))
        redraws = 0
        while idx in chosen and redraws < 10:
            row = gp.sample_posterior(cands, 1, int(rng.integers(_MAX_SEED)))[0]
            idx = int(np.argmax(row))
            redraws += 1
        if idx in chosen:
            for j in np.argsort(-row, kind="stable"):
                if int(j) not in chosen:
                    idx = int(j)
                    break
        chosen.append(idx)
    return Batch(
        cands[chosen].copy(),
        "thompson",
        provenance=["posterior-draw"] * k,
        snapped=[False] * k,
        flags=[],
    )


def naive_qei_batch(gp: GpPosterior, data: Dataset, domain: Domain, k: int,
                    seed: int, n_grid: int = 2000) -> Batch:
    """The k distinct candidates with highest EI over a uniform grid
    (continuous) or the unevaluated pool (discrete)."""
    rng = np.random.default_rng(seed)
    if domain.kind == "discrete":
        cands = _unevaluated_candidates(domain, data)
        if cands.shape[0] < k:
            raise PoolExhausted(f"{cands.shape[0]} unevaluated candidates left, need {k}")
    else:
        cands = domain.sample_uniform(n_grid, rng)
    ctx = AcquisitionContext(gp, incumbent=float(np.max(data.oriented_values)))
    ei = ei_surface(ctx, cands)
    order = np.argsort(-ei, kind="stable")[:k]
    return Batch(
        cands[order].copy(),
        "qei",
        provenance=["top-q"] * k,
        snapped=[False] * k,
        flags=[],
    )


def constant_liar_batch(gp: GpPosterior, data: Dataset, domain: Domain, k: int,
                        seed: int, gp_restarts: int = 5,
                        gp_max_iters: int = 150) -> Batch:
    """Greedy EI with a constant lie (the mean observed value) appended
    and the GP refitted after each pick.  The real dataset is untouched;
    a refit failure fails the whole epoch."""
    rng = np.random.default_rng(seed)
    lie = float(np.mean(data.oriented_values))
    tmp = Dataset("maximize")
    tmp.extend(data.points, data.oriented_values)

    cur = gp
    points = []
    for i in range(k):
        ctx = AcquisitionContext(cur, incumbent=float(np.max(tmp.oriented_values)))

        def surface(X):
            return ei_surface(ctx, X)

        if domain.kind == "discrete":
            cands = _unevaluated_candidates(domain, tmp)
            if cands.shape[0] < 1:
                raise PoolExhausted("no unevaluated candidates left")
            x_next = cands[int(np.argmax(surface(cands)))]
        else:
            x_next = _argmax_surface(surface, domain, rng)
        points.append(np.asarray(x_next, dtype=float))
        tmp.append(x_next, lie)
        if i < k - 1:
            try:
                cur = fit(tmp, domain, restarts=gp_restarts,
                          seed=int(rng.integers(_MAX_SEED)), max_iters=gp_max_iters)
            except GpFitError as exc:
                raise StrategyFailure(f"constant-liar refit failed: {exc}") from exc
    return Batch(
        np.array(points),
        "cl",
        provenance=["liar-step"] * k,
        snapped=[False] * k,
        flags=[],
    )


def _mean_gradient_lipschitz(gp: GpPosterior, domain: Domain,
                             rng: np.random.Generator, n_samples: int) -> float:
    """Max norm of the predictive-mean gradient over domain samples,
    by central finite differences."""
    pts = domain.sample_uniform(n_samples, rng)
    h = 1e-5 * domain.widths
    h = np.where(h > 0, h, 1e-5)
    grad = np.empty((pts.shape[0], domain.dim))
    for j in range(domain.dim):
        step = np.zeros(domain.dim)
        step[j] = h[j]
        mu_plus, _ = gp.predict_many(pts + step)
        mu_minus, _ = gp.predict_many(pts - step)
        grad[:, j] = (mu_plus - mu_minus) / (2 * h[j])
    return float(np.max(np.linalg.norm(grad, axis=1)))


def lp_batch(gp: GpPosterior, data: Dataset, domain: Domain, k: int,
             seed: int, n_lipschitz: int = 1000, n_grid: int = 2000) -> Batch:
    """Greedy EI with soft local penalizers around already-chosen points,
    with penalization radius set by a Lipschitz estimate of the
    predictive mean."""
    rng = np.random.default_rng(seed)
    lipschitz = _mean_gradient_lipschitz(gp, domain, rng, n_lipschitz)
    ctx = AcquisitionContext(gp, incumbent=float(np.max(data.oriented_values)))

    if lipschitz < 1e-12:
        fallback = naive_qei_batch(gp, data, domain, k, int(rng.integers(_MAX_SEED)),
                                   n_grid=n_grid)
        return Batch(fallback.points, "lp", provenance=["top-q"] * k,
                     snapped=[False] * k, flags=["lp-flat-mean-fallback"])

    best_observed = float(np.max(data.oriented_values))
    chosen: list[tuple[np.ndarray, float, float]] = []

    def penalized(X):
        score = ei_surface(ctx, X)
        for xj, mu_j, var_j in chosen:
            r = np.linalg.norm(X - xj, axis=1)
            z = (lipschitz * r - (best_observed - mu_j)) / np.sqrt(2 * max(var_j, 1e-16))
            score = score * ndtr(z)
        return score

    points = []
    if domain.kind == "discrete":
        cands = _unevaluated_candidates(domain, data)
        if cands.shape[0] < k:
            raise PoolExhausted(f"{cands.shape[0]} unevaluated candidates left, need {k}")
        avail = np.ones(cands.shape[0], dtype=bool)
        for _ in range(k):
            score = penalized(cands)
            score[~avail] = -np.inf
            idx = int(np.argmax(score))
            avail[idx] = False
            x_next = cands[idx]
            mu_j, var_j = gp.predict(x_next)
            chosen.append((x_next.copy(), mu_j, var_j))
            points.append(x_next.copy())
    else:
        for _ in range(k):
            x_next = _argmax_surface(penalized, domain, rng)
            mu_j, var_j = gp.predict(x_next)
            chosen.append((x_next.copy(), mu_j, var_j))
            points.append(x_next)
    return Batch(
        np.array(points),
        "lp",
        provenance=["penalized-argmax"] * k,
        snapped=[False] * k,
        flags=[],
    )


STRATEGY_NAMES = ("kmbbo", "cs-kmbbo", "thompson", "cl", "qei", "lp")

# Per-process registry for user-supplied strategies; entries take
# (gp, data, domain, k, seed, params) and return a Batch.
EXTRA_STRATEGIES: dict = {}


def register_strategy(name: str, builder) -> None:
    EXTRA_STRATEGIES[name] = builder


def build_batch(name: str, gp: GpPosterior, data: Dataset, domain: Domain,
                k: int, seed: int, params: dict) -> Batch:
    """Dispatch a per-epoch strategy by CLI name (cs-kmbbo runs its own
    loop in the compression module and is not dispatched here)."""
    if name in EXTRA_STRATEGIES:
        return EXTRA_STRATEGIES[name](gp, data, domain, k, seed, params)
    if name == "kmbbo":
        return kmbbo_batch(gp, data, domain, k, int(params.get("n_slice", 200)), seed)
    if name == "thompson":
        return thompson_batch(gp, data, domain, k, seed, n_grid=int(params.get("n_grid", 2000)))
    if name == "qei":
        return naive_qei_batch(gp, data, domain, k, seed, n_grid=int(params.get("n_grid", 2000)))
    if name == "cl":
        return constant_liar_batch(
            gp, data, domain, k, seed,
            gp_restarts=int(params.get("gp_restarts", 5)),
            gp_max_iters=int(params.get("gp_max_iters", 150)),
        )
    if name == "lp":
        return lp_batch(gp, data, domain, k, seed, n_grid=int(params.get("n_grid", 2000)))
    raise ParameterError(f"unknown strategy {name!r}")
