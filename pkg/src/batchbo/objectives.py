"""Black-box objectives and the benchmark suite.

Benchmark formulas follow the standard forms from the virtual-library
test-function collection.  The constants are frozen here:

    Branin-Hoo   f(x) = a(x2 - b*x1^2 + c*x1 - r)^2 + s(1-t)cos(x1) + s
                 a=1, b=5.1/(4*pi^2), c=5/pi, r=6, s=10, t=1/(8*pi)
                 domain [-5,10]x[0,15]; minimum 5/(4*pi) = 0.39788735772973816
                 at (pi, 2.275), (-pi, 12.275), (9.42478, 2.475)

    Camelback-6  f(x) = (4 - 2.1*x1^2 + x1^4/3)x1^2 + x1*x2 + (-4 + 4*x2^2)x2^2
                 domain [-3,3]x[-2,2]; minimum -1.0316284534898774
                 at +-(0.08984201, -0.7126564)

    Hartmann-6   f(x) = -sum_i alpha_i exp(-sum_j A_ij (x_j - P_ij)^2)
                 four-term constants below; domain [0,1]^6;
                 minimum -3.3223680114155156 at
                 (0.20169, 0.150011, 0.476874, 0.275332, 0.311652, 0.6573)

All objectives are deterministic and noiseless.  Minimization objectives
keep their native sign; search code works on a maximization view obtained
through ``Dataset.oriented_values``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DomainViolation, ParameterError

BRANIN_MIN = 0.39788735772973816
CAMEL6_MIN = -1.0316284534898774
HARTMANN6_MIN = -3.3223680114155156

_HARTMANN6_ALPHA = np.array([1.0, 1.2, 3.0, 3.2])
_HARTMANN6_A = np.array(
    [
        [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
        [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
        [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
        [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
    ]
)
_HARTMANN6_P = 1e-4 * np.array(
    [
        [1312, 1696, 5569, 124, 8283, 5886],
        [2329, 4135, 8307, 3736, 1004, 9991],
        [2348, 1451, 3522, 2883, 3047, 6650],
        [4047, 8828, 8732, 5743, 1091, 381],
    ]
)


@dataclass(frozen=True, eq=False)
class Domain:
    """Search space: a continuous box or a finite candidate pool.

    ``bounds`` is a tuple of (lo, hi) pairs for continuous domains;
    ``candidates`` is an (n_cand, dim) float array for discrete ones.
    """

    kind: str
    dim: int
    bounds: Optional[tuple] = None
    candidates: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind == "continuous":
            if not self.bounds or len(self.bounds) != self.dim:
                raise ParameterError("continuous domain needs dim (lo, hi) pairs")
            for lo, hi in self.bounds:
                if not lo < hi:
                    raise ParameterError(f"bound ({lo}, {hi}) must satisfy lo < hi")
        elif self.kind == "discrete":
            cand = self.candidates
            if cand is None or cand.ndim != 2 or cand.shape[0] == 0:
                raise ParameterError("discrete domain needs a non-empty candidate matrix")
            if cand.shape[1] != self.dim:
                raise ParameterError("candidate rows must have length dim")
            if np.unique(cand, axis=0).shape[0] != cand.shape[0]:
                raise ParameterError("candidate pool contains duplicate rows")
        else:
            raise ParameterError(f"unknown domain kind {self.kind!r}")

    @classmethod
    def continuous(cls, bounds) -> "Domain":
        bounds = tuple((float(lo), float(hi)) for lo, hi in bounds)
        return cls(kind="continuous", dim=len(bounds), bounds=bounds)

    @classmethod
    def discrete(cls, candidates) -> "Domain":
        cand = np.asarray(candidates, dtype=float)
        return cls(kind="discrete", dim=cand.shape[1], candidates=cand)

    @property
    def lower(self) -> np.ndarray:
        if self.kind == "continuous":
            return np.array([lo for lo, _ in self.bounds])
        return self.candidates.min(axis=0)

    @property
    def upper(self) -> np.ndarray:
        if self.kind == "continuous":
            return np.array([hi for _, hi in self.bounds])
        return self.candidates.max(axis=0)

    @property
    def widths(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def n_candidates(self) -> int:
        if self.kind != "discrete":
            raise ParameterError("n_candidates is only defined for discrete domains")
        return self.candidates.shape[0]

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            return False
        if self.kind == "continuous":
            tol = 1e-12 * np.maximum(1.0, np.abs(self.widths))
            return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))
        return self.candidate_index(x) is not None

    def candidate_index(self, x) -> Optional[int]:
        """Exact-match row lookup; None when x is not a pool row."""
        if self.kind != "discrete":
            return None
        x = np.asarray(x, dtype=float)
        hits = np.nonzero((self.candidates == x).all(axis=1))[0]
        return int(hits[0]) if hits.size else None

    def sample_uniform(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """n uniform points: box-uniform (continuous) or pool rows with
        replacement (discrete)."""
        if self.kind == "continuous":
            u = rng.random((n, self.dim))
            return self.lower + u * self.widths
        idx = rng.integers(0, self.n_candidates, size=n)
        return self.candidates[idx].copy()

    def clip(self, x: np.ndarray) -> np.ndarray:
        if self.kind != "continuous":
            raise ParameterError("clip is only defined for continuous domains")
        return np.clip(x, self.lower, self.upper)


class Dataset:
    """Observed (x, y) pairs with direction-aware best-so-far tracking.

    Values keep the objective's native sign; ``oriented_values`` exposes
    the maximization view used by the surrogate and acquisition code.
    """

    def __init__(self, direction: str = "maximize"):
        if direction not in ("maximize", "minimize"):
            raise ParameterError(f"unknown direction {direction!r}")
        self.direction = direction
        self.points: list[np.ndarray] = []
        self.values: list[float] = []
        self.best_value: Optional[float] = None
        self.best_point: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.values)

    def append(self, x, y: float) -> None:
        x = np.asarray(x, dtype=float).copy()
        y = float(y)
        self.points.append(x)
        self.values.append(y)
        if self.best_value is None or self._better(y, self.best_value):
            self.best_value = y
            self.best_point = x

    def extend(self, xs, ys) -> None:
        for x, y in zip(xs, ys):
            self.append(x, y)

    def _better(self, a: float, b: float) -> bool:
        return a > b if self.direction == "maximize" else a < b

    def points_array(self) -> np.ndarray:
        return np.array(self.points, dtype=float)

    def values_array(self) -> np.ndarray:
        return np.array(self.values, dtype=float)

    @property
    def sign(self) -> float:
        return 1.0 if self.direction == "maximize" else -1.0

    @property
    def oriented_values(self) -> np.ndarray:
        return self.sign * self.values_array()

    @property
    def oriented_best(self) -> float:
        return self.sign * self.best_value

    def copy(self) -> "Dataset":
        out = Dataset(self.direction)
        out.points = [p.copy() for p in self.points]
        out.values = list(self.values)
        out.best_value = self.best_value
        out.best_point = None if self.best_point is None else self.best_point.copy()
        return out


@dataclass(frozen=True, eq=False)
class Objective:
    """A deterministic black-box target over a Domain."""

    name: str
    domain: Domain
    direction: str
    eval: Callable[[np.ndarray], float]
    known_optimum: Optional[float] = None

    def evaluate(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if not self.domain.contains(x):
            raise DomainViolation(f"{x} is outside the domain of {self.name}")
        return float(self.eval(x))

    def new_dataset(self) -> Dataset:
        return Dataset(self.direction)

    def regret(self, best_value: float) -> Optional[float]:
        if self.known_optimum is None:
            return None
        return abs(self.known_optimum - best_value)


def eval_branin(x) -> float:
    """Branin-Hoo value at a 2-vector inside [-5,10]x[0,15]."""
    x = np.asarray(x, dtype=float)
    a, b, c = 1.0, 5.1 / (4 * math.pi**2), 5 / math.pi
    r, s, t = 6.0, 10.0, 1 / (8 * math.pi)
    return float(a * (x[1] - b * x[0] ** 2 + c * x[0] - r) ** 2 + s * (1 - t) * math.cos(x[0]) + s)


def eval_camelback6(x) -> float:
    """Six-hump camel value at a 2-vector inside [-3,3]x[-2,2]."""
    x1, x2 = float(x[0]), float(x[1])
    return (4 - 2.1 * x1**2 + x1**4 / 3) * x1**2 + x1 * x2 + (-4 + 4 * x2**2) * x2**2


def eval_hartmann6(x) -> float:
    """Four-term Hartmann value at a 6-vector inside [0,1]^6."""
    x = np.asarray(x, dtype=float)
    inner = np.sum(_HARTMANN6_A * (x - _HARTMANN6_P) ** 2, axis=1)
    return float(-np.sum(_HARTMANN6_ALPHA * np.exp(-inner)))


def branin_objective() -> Objective:
    domain = Domain.continuous([(-5.0, 10.0), (0.0, 15.0)])
    return Objective("branin", domain, "minimize", eval_branin, known_optimum=BRANIN_MIN)


def camelback6_objective() -> Objective:
    domain = Domain.continuous([(-3.0, 3.0), (-2.0, 2.0)])
    return Objective("camel6", domain, "minimize", eval_camelback6, known_optimum=CAMEL6_MIN)


def hartmann6_objective() -> Objective:
    domain = Domain.continuous([(0.0, 1.0)] * 6)
    return Objective("hartmann6", domain, "minimize", eval_hartmann6, known_optimum=HARTMANN6_MIN)


class _LinearPoolEval:
    """Picklable evaluator for synthetic pools: f(x) = w_eff . x."""

    def __init__(self, w_eff: np.ndarray):
        self.w_eff = w_eff

    def __call__(self, x: np.ndarray) -> float:
        return float(np.asarray(x, dtype=float) @ self.w_eff)


def _distinct_codes(n: int, n_bits: int, rng: np.random.Generator) -> np.ndarray:
    """n distinct integers drawn uniformly from [0, 2^n_bits)."""
    space = 1 << n_bits
    if n > space:
        raise ParameterError(f"cannot draw {n} distinct {n_bits}-bit codes")
    if space <= max(4 * n, 1 << 16):
        return rng.permutation(space)[:n]
    seen: set[int] = set()
    out: list[int] = []
    while len(out) < n:
        for c in rng.integers(0, space, size=2 * (n - len(out))):
            c = int(c)
            if c not in seen:
                seen.add(c)
                out.append(c)
                if len(out) == n:
                    break
    return np.array(out, dtype=np.int64)


def make_sparse_pool(n_cand: int, d: int, s_sparse: int, seed: int) -> Objective:
    """Synthetic discrete candidate pool with a sparse linear value model.

    Candidate rows are binary d-vectors assembled from disjoint-support
    binary patterns, so the pool lies in a low-dimensional subspace and
    is genuinely compressible.  Values are f(x) = w . T(x) with T a fixed
    random binary transform and w a hidden s_sparse-sparse weight vector.
    The direction is maximize and known_optimum is the exhaustive pool
    maximum.
    """
    if n_cand < 1:
        raise ParameterError("n_cand must be >= 1")
    if not 1 <= s_sparse <= d:
        raise ParameterError("s_sparse must satisfy 1 <= s_sparse <= d")
    rng = np.random.default_rng(seed)

    n_latent = min(d, max(8, 2 * s_sparse, n_cand.bit_length() + 1))
    if n_cand > (1 << min(n_latent, 62)):
        raise ParameterError("pool too large for distinct binary rows at this dimension")

    # Disjoint coordinate blocks make the latent code -> row map injective.
    blocks = np.array_split(rng.permutation(d), n_latent)
    patterns = np.zeros((n_latent, d))
    for j, idx in enumerate(blocks):
        patterns[j, idx] = 1.0

    codes = _distinct_codes(n_cand, n_latent, rng)
    bits = (codes[:, None] >> np.arange(n_latent)[None, :]) & 1
    candidates = bits.astype(float) @ patterns

    transform = rng.integers(0, 2, size=(d, d)).astype(float)
    weights = np.zeros(d)
    support = rng.choice(d, size=s_sparse, replace=False)
    weights[support] = rng.normal(0.0, 1.0, size=s_sparse)
    w_eff = transform.T @ weights

    values = candidates @ w_eff
    domain = Domain.discrete(candidates)
    return Objective(
        "sparse-pool",
        domain,
        "maximize",
        _LinearPoolEval(w_eff),
        known_optimum=float(values.max()),
    )


# Per-process registry for user-supplied objective factories; entries
# are callables (**params) -> Objective.
EXTRA_OBJECTIVES: dict = {}


def register_objective(name: str, factory) -> None:
    EXTRA_OBJECTIVES[name] = factory


def get_objective(name: str, **params) -> Objective:
    """Resolve an objective by CLI name."""
    if name in EXTRA_OBJECTIVES:
        return EXTRA_OBJECTIVES[name](**params)
    if name == "branin":
        return branin_objective()
    if name == "camel6":
        return camelback6_objective()
    if name == "hartmann6":
        return hartmann6_objective()
    if name == "sparse-pool":
        return make_sparse_pool(
            n_cand=int(params.get("pool_size", 19000)),
            d=int(params.get("pool_dim", 167)),
            s_sparse=int(params.get("pool_sparsity", 10)),
            seed=int(params.get("seed", 0)),
        )
    raise ParameterError(f"unknown objective {name!r}")


OBJECTIVE_NAMES = ("branin", "camel6", "hartmann6", "sparse-pool")


def oracle_scan(objective: Objective, n: int = 100_000, seed: int = 0):
    """Brute-force random-search oracle.

    Returns (best_value, value_range) over n uniform domain samples
    (direction-aware best).  Used to verify known_optimum and to set the
    default first-encounter tolerance.
    """
    if objective.domain.kind == "discrete":
        values = np.array([objective.eval(row) for row in objective.domain.candidates])
    else:
        rng = np.random.default_rng(seed)
        pts = objective.domain.sample_uniform(n, rng)
        values = np.array([objective.eval(p) for p in pts])
    best = values.max() if objective.direction == "maximize" else values.min()
    return float(best), float(values.max() - values.min())
