"""Initial arrangements: random point fits and a genetic pre-optimizer."""

from __future__ import annotations

import enum
import hashlib
import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from clvq.arrangement import Arrangement
from clvq.estimation import EstimationParams, estimate_codebook, estimate_mse
from clvq.source import SampleStream, SourceModel, derive_seed

__all__ = [
    "CrossoverPolicy",
    "GeneticParams",
    "GeneticTrace",
    "random_init",
    "dissimilarity",
    "crossover",
    "mutate",
    "genetic_init",
    "mse_oracle",
]

log = logging.getLogger(__name__)

MAX_FIT_RETRIES = 1000
GENETIC_ESTIMATION = EstimationParams(min_points_per_region=50, max_total_points=100_000, mse_points=50_000)

# oracle(arrangement, seed) -> distortion (lower is better)
Oracle = Callable[[Arrangement, int], float]


class CrossoverPolicy(str, enum.Enum):
    RANDOM_PAIRING = "random_pairing"
    DISSIMILARITY_PAIRING = "dissimilarity_pairing"


@dataclass(frozen=True)
class GeneticParams:
    pool_size: int = 10
    generations: int = 30
    keep_fraction: float = 0.8
    crossover_policy: CrossoverPolicy = CrossoverPolicy.DISSIMILARITY_PAIRING
    mutation_sigma: float = 0.2
    mutation_mean: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "crossover_policy", CrossoverPolicy(self.crossover_policy))
        if not 0 < self.keep_fraction <= 1:
            raise ValueError("keep_fraction must be in (0, 1]")
        if self.pool_size < 2:
            raise ValueError("pool_size must be >= 2")
        if self.mutation_sigma <= 0:
            raise ValueError("mutation_sigma must be > 0")
        if self.generations < 1:
            raise ValueError("generations must be >= 1")

    @property
    def n_keep(self) -> int:
        return max(1, int(round(self.keep_fraction * self.pool_size)))

    def to_dict(self) -> dict:
        return {
            "pool_size": self.pool_size,
            "generations": self.generations,
            "keep_fraction": self.keep_fraction,
            "crossover_policy": self.crossover_policy.value,
            "mutation_sigma": self.mutation_sigma,
        }


@dataclass
class GeneticTrace:
    best: list = field(default_factory=list)
    mean: list = field(default_factory=list)
    pool_hashes: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.best)

    def to_csv(self) -> str:
        lines = ["generation,best_mse,mean_mse"]
        lines += [f"{g},{b!r},{m!r}" for g, (b, m) in enumerate(zip(self.best, self.mean))]
        return "\n".join(lines) + "\n"


def _fit_hyperplane(P: np.ndarray) -> np.ndarray | None:
    """Unit-normal coefficients ``[v, t]`` of the hyperplane through the rows of P."""
    d = P.shape[1]
    A = np.hstack([P, np.ones((len(P), 1))])
    _, s, vt = np.linalg.svd(A)
    if s[-1] <= 1e-9 * s[0]:
        return None  # affinely dependent points
    h = vt[-1]
    n = np.linalg.norm(h[:d])
    if n <= 1e-12:
        return None
    return h / n


def random_init(source: SourceModel, k: int, stream: SampleStream) -> Arrangement:
    """Each comparator is the hyperplane through ``d`` fresh source points."""
    if k < 1:
        raise ValueError("k must be >= 1")
    d = source.dimension
    rows = []
    for _ in range(k):
        for _ in range(MAX_FIT_RETRIES):
            h = _fit_hyperplane(stream.sample(d))
            if h is not None:
                rows.append(h)
                break
        else:
            raise RuntimeError("could not draw affinely independent points; degenerate source?")
    return Arrangement.from_coefficients(np.array(rows))


def dissimilarity(h1, h2, center=None) -> float:
    """Angle between normals times the distance between the points of each
    hyperplane nearest to ``center``. Hyperplanes are ``(v, t)`` pairs or
    coefficient rows ``[v..., t]``."""
    v1, t1 = _split(h1)
    v2, t2 = _split(h2)
    c = np.zeros(len(v1)) if center is None else np.asarray(center, dtype=float)
    cos = abs(v1 @ v2) / (np.linalg.norm(v1) * np.linalg.norm(v2))
    theta = float(np.arccos(np.clip(cos, 0.0, 1.0)))
    p1 = c - (v1 @ c + t1) / (v1 @ v1) * v1
    p2 = c - (v2 @ c + t2) / (v2 @ v2) * v2
    return theta * float(np.linalg.norm(p1 - p2))


def _split(h):
    if isinstance(h, tuple) and len(h) == 2:
        return np.asarray(h[0], dtype=float), float(h[1])
    h = np.asarray(h, dtype=float)
    return h[:-1], float(h[-1])


def _greedy_pairs(D: np.ndarray, tie: np.ndarray) -> list[tuple[int, int]]:
    """Greedy matching on ``D``; equal entries are ordered by ``tie``."""
    D = D.astype(float).copy()
    pairs = []
    for _ in range(len(D)):
        i, j = min(zip(*np.nonzero(D == D.min())), key=lambda ij: tie[ij])
        pairs.append((int(i), int(j)))
        D[i, :] = np.inf
        D[:, j] = np.inf
    return sorted(pairs)


def _row_distance(c1: np.ndarray, c2: np.ndarray) -> np.ndarray:
    """Distance between unit-normal coefficient rows, up to sign."""
    u1 = c1 / np.linalg.norm(c1[:, :-1], axis=1, keepdims=True)
    u2 = c2 / np.linalg.norm(c2[:, :-1], axis=1, keepdims=True)
    plus = np.linalg.norm(u1[:, None] - u2[None], axis=-1)
    minus = np.linalg.norm(u1[:, None] + u2[None], axis=-1)
    return np.minimum(plus, minus)


def crossover(
    a1: Arrangement,
    a2: Arrangement,
    policy: CrossoverPolicy | str,
    rng: np.random.Generator,
    center=None,
) -> Arrangement:
    """Pair the hyperplanes of two parents, keep one of each pair at random."""
    if (a1.d, a1.k) != (a2.d, a2.k):
        raise ValueError(f"parents differ in shape: {(a1.d, a1.k)} vs {(a2.d, a2.k)}")
    policy = CrossoverPolicy(policy)
    c1, c2 = a1.coefficients, a2.coefficients
    if policy is CrossoverPolicy.RANDOM_PAIRING:
        pairs = list(enumerate(rng.permutation(a1.k).tolist()))
    else:
        D = np.array([[dissimilarity(r1, r2, center) for r2 in c2] for r1 in c1])
        pairs = _greedy_pairs(D, _row_distance(c1, c2))
    pick = rng.random(len(pairs)) < 0.5
    child = np.array([c1[i] if p else c2[j] for (i, j), p in zip(pairs, pick)])
    return Arrangement.from_coefficients(child)


def mutate(arr: Arrangement, sigma: float, rng: np.random.Generator, mean: float = 1.0) -> Arrangement:
    """Multiply every coefficient by an independent Normal(mean, sigma^2) draw."""
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    coef = arr.coefficients
    while True:
        out = coef * rng.normal(mean, sigma, size=coef.shape)
        if np.all(np.linalg.norm(out[:, :-1], axis=1) > 0):
            return Arrangement.from_coefficients(out)


def mse_oracle(
    source: SourceModel,
    params: EstimationParams = GENETIC_ESTIMATION,
    per_dimension: bool = False,
) -> Oracle:
    """Distortion oracle: codebook from seed ``s``, MSE from seed ``s + 1``.

    With ``per_dimension`` the MSE is divided by ``d``.
    """
    scale = 1.0 / source.dimension if per_dimension else 1.0

    def oracle(arr: Arrangement, seed: int) -> float:
        cb = estimate_codebook(arr, source, params, SampleStream(source, seed))
        mse = estimate_mse(arr, cb, source, params.mse_points, SampleStream(source, seed + 1))
        return scale * mse

    return oracle


def _pool_hash(pool) -> str:
    h = hashlib.sha1()
    for a in pool:
        h.update(a.coefficients.tobytes())
    return h.hexdigest()[:16]


def genetic_init(
    source: SourceModel,
    k: int,
    params: GeneticParams,
    oracle: Oracle | None,
    stream: SampleStream,
) -> tuple[Arrangement, GeneticTrace]:
    """Evolve a pool of random arrangements; return the best ever seen.

    Each generation ranks the pool by distortion, keeps the best
    ``keep_fraction``, refills the rest with crossover children of parents
    drawn uniformly from the kept set, re-ranks, and mutates the worse half.
    The current best is never mutated. Oracle calls use seeds derived from
    ``stream.seed``; fitnesses of unchanged members are cached.
    """
    oracle = oracle or mse_oracle(source)
    rng = stream.rng
    eval_seed = derive_seed(stream.seed, 1_000_000)
    n_evals = 0

    def evaluate(a: Arrangement) -> float:
        nonlocal n_evals
        n_evals += 1
        return float(oracle(a, eval_seed + 2 * n_evals))

    pool = [random_init(source, k, stream) for _ in range(params.pool_size)]
    scores = [evaluate(a) for a in pool]
    best_arr, best = pool[int(np.argmin(scores))], min(scores)
    trace = GeneticTrace()
    M = params.pool_size
    for gen in range(params.generations):
        order = np.argsort(scores, kind="stable")
        kept = [pool[i] for i in order[: params.n_keep]]
        kept_scores = [scores[i] for i in order[: params.n_keep]]
        children, child_scores = [], []
        for _ in range(M - len(kept)):
            if len(kept) > 1:
                i, j = rng.choice(len(kept), size=2, replace=False)
            else:
                i = j = 0
            child = crossover(kept[i], kept[j], params.crossover_policy, rng, source.mean)
            children.append(child)
            child_scores.append(evaluate(child))
        pool = kept + children
        scores = kept_scores + child_scores
        order = np.argsort(scores, kind="stable")
        pool = [pool[i] for i in order]
        scores = [scores[i] for i in order]
        if scores[0] < best:
            best_arr, best = pool[0], scores[0]
        trace.best.append(best)
        trace.mean.append(float(np.mean(scores)))
        trace.pool_hashes.append(_pool_hash(pool))
        log.debug("generation %d: best %.4f mean %.4f", gen, best, trace.mean[-1])
        if gen == params.generations - 1:
            break
        for m in range(M // 2, M):
            if m == 0:
                continue
            pool[m] = mutate(pool[m], params.mutation_sigma, rng, params.mutation_mean)
            scores[m] = evaluate(pool[m])
    return best_arr, trace
