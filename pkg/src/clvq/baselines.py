"""Classic LBG (Lloyd / k-means) codebooks and the two comparison curves.

``lbg_comparator_matched`` picks the best LBG codebook whose Voronoi
partition needs at most ``k`` separating facets; ``lbg_region_matched``
uses as many points as a comparator design has regions.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from clvq.source import SampleStream, SourceModel, derive_seed

__all__ = [
    "PointCodebook",
    "LbgResult",
    "lbg_design",
    "lbg_best",
    "voronoi_facet_count",
    "lbg_comparator_matched",
    "lbg_region_matched",
]

log = logging.getLogger(__name__)

DEFAULT_RESTARTS = 10
DEFAULT_SAMPLE_N = 100_000
DEFAULT_HOLDOUT_N = 200_000
FACET_PROBE_N = 100_000
# seed stride between the M values tried by lbg_comparator_matched
_M_STRIDE = 1000


@dataclass(frozen=True, eq=False)
class PointCodebook:
    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float, ndmin=2)
        if len(pts) < 1:
            raise ValueError("a point codebook needs at least one point")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def M(self) -> int:
        return len(self.points)

    def assign(self, X: np.ndarray, second: bool = False):
        """Index of the nearest point (and the second nearest with ``second``)."""
        d2 = _sqdist(X, self.points)
        if not second:
            return np.argmin(d2, axis=1)
        if self.M < 2:
            raise ValueError("second-nearest assignment needs M >= 2")
        two = np.argpartition(d2, 1, axis=1)[:, :2]
        rows = np.arange(len(X))
        swap = d2[rows, two[:, 0]] > d2[rows, two[:, 1]]
        two[swap] = two[swap][:, ::-1]
        return two[:, 0], two[:, 1], d2

    def mse(self, X: np.ndarray) -> float:
        return float(_sqdist(X, self.points).min(axis=1).mean())


@dataclass
class LbgResult:
    codebook: PointCodebook
    mse: float
    train_mse: float
    iterations: int
    facet_count: int | None = None
    restart_seed: int | None = None
    history: list = field(default_factory=list)
    reseeds: int = 0
    restart_mses: list = field(default_factory=list)

    @property
    def M(self) -> int:
        return self.codebook.M

    def to_dict(self) -> dict:
        return {
            "M": self.M,
            "points": self.codebook.points.tolist(),
            "mse": self.mse,
            "facets": self.facet_count,
            "restart_seed": self.restart_seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LbgResult":
        cb = PointCodebook(np.array(data["points"], dtype=float))
        if cb.M != int(data["M"]):
            raise ValueError("M does not match the number of points")
        return cls(
            codebook=cb,
            mse=float(data["mse"]),
            train_mse=float("nan"),
            iterations=0,
            facet_count=data["facets"],
            restart_seed=data["restart_seed"],
        )


def _sqdist(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    d2 = (X**2).sum(1)[:, None] - 2.0 * X @ C.T + (C**2).sum(1)[None, :]
    return np.maximum(d2, 0.0)


def lbg_design(
    source: SourceModel,
    M: int,
    T_max: int,
    stream: SampleStream,
    sample_n: int = DEFAULT_SAMPLE_N,
    holdout_n: int = DEFAULT_HOLDOUT_N,
    rel_tol: float = 1e-7,
) -> LbgResult:
    """Sample-based LBG on a fixed training set of ``sample_n`` points.

    Stops when assignments no longer change, when the training MSE improves
    by less than ``rel_tol`` (relative), or after ``T_max`` iterations.
    Initial points are ``M`` source draws. A point whose cell empties is
    moved to the training sample with the largest current error. ``mse`` is
    measured on ``holdout_n`` fresh samples; ``train_mse`` and ``history``
    refer to the training set.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    if M > sample_n:
        raise ValueError(f"M={M} exceeds sample_n={sample_n}")
    X = stream.sample(sample_n)
    C = stream.sample(M)
    history: list[float] = []
    labels = None
    reseeds = 0
    it = 0
    for it in range(1, T_max + 1):
        d2 = _sqdist(X, C)
        new = np.argmin(d2, axis=1)
        history.append(float(d2[np.arange(len(X)), new].mean()))
        if labels is not None and np.array_equal(new, labels):
            break
        if len(history) > 1 and history[-2] - history[-1] <= rel_tol * history[-2]:
            # remaining moves are drift along a flat direction
            break
        labels = new
        counts = np.bincount(labels, minlength=M)
        sums = np.column_stack([np.bincount(labels, weights=X[:, m], minlength=M) for m in range(X.shape[1])])
        C = C.copy()
        live = counts > 0
        C[live] = sums[live] / counts[live, None]
        if not live.all():
            err = ((X - C[labels]) ** 2).sum(1)
            for m in np.flatnonzero(~live):
                far = int(np.argmax(err))
                C[m] = X[far]
                err[far] = 0.0
                reseeds += 1
                log.debug("LBG re-seeded empty cell %d at sample %d", m, far)
    final = float(_sqdist(X, C).min(axis=1).mean())
    if not history or final < history[-1]:
        history.append(final)
    cb = PointCodebook(C)
    holdout = cb.mse(stream.sample(holdout_n))
    return LbgResult(cb, holdout, final, it, history=history, reseeds=reseeds, restart_seed=stream.seed)


def lbg_best(
    source: SourceModel,
    M: int,
    T_max: int,
    stream: SampleStream,
    restarts: int = DEFAULT_RESTARTS,
    sample_n: int = DEFAULT_SAMPLE_N,
) -> tuple[LbgResult, list[LbgResult]]:
    """Best of ``restarts`` runs with seeds ``stream.seed + r``.

    The winner is picked by training MSE so that its held-out ``mse`` stays
    an unbiased estimate. Its ``restart_mses`` lists every run's held-out MSE.
    """
    runs = [
        lbg_design(source, M, T_max, stream.child(r), sample_n=sample_n)
        for r in range(restarts)
    ]
    best = min(runs, key=lambda r: r.train_mse)
    best.restart_mses = [r.mse for r in runs]
    return best, runs


def voronoi_facet_count(
    codebook: PointCodebook,
    source: SourceModel,
    stream: SampleStream,
    n: int = FACET_PROBE_N,
    pairs_per_side: int = 64,
) -> int:
    """Number of adjacent Voronoi cell pairs over the source support.

    Cells ``i`` and ``j`` count as adjacent when the midpoint of some sample
    pair, one from each cell and both close to their common bisector, has
    ``{i, j}`` as its two nearest points. Tiny shared facets can be missed.
    """
    if codebook.M < 2:
        return 0
    X = stream.sample(n)
    first, second, d2 = codebook.assign(X, second=True)
    rows = np.arange(len(X))
    margin = d2[rows, second] - d2[rows, first]
    facets = 0
    cand = {tuple(sorted(p)) for p in zip(first.tolist(), second.tolist())}
    for i, j in sorted(cand):
        side_i = np.flatnonzero((first == i) & (second == j))
        side_j = np.flatnonzero((first == j) & (second == i))
        if len(side_i) == 0 or len(side_j) == 0:
            continue
        side_i = side_i[np.argsort(margin[side_i])[:pairs_per_side]]
        side_j = side_j[np.argsort(margin[side_j])[:pairs_per_side]]
        mids = 0.5 * (X[side_i][:, None, :] + X[side_j][None, :, :]).reshape(-1, X.shape[1])
        f, s, _ = codebook.assign(mids, second=True)
        if np.any(((f == i) & (s == j)) | ((f == j) & (s == i))):
            facets += 1
    return facets


def lbg_comparator_matched(
    source: SourceModel,
    k: int,
    T_max: int,
    stream: SampleStream,
    restarts: int = DEFAULT_RESTARTS,
    sample_n: int = DEFAULT_SAMPLE_N,
) -> LbgResult:
    """Best LBG codebook needing at most ``k`` facets (comparators).

    ``M`` ranges over ``1..k+1`` since ``M`` cells need at least ``M-1``
    facets. Codebook ``M`` uses seeds ``stream.seed + 1000*M + r``.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    best = None
    for M in range(1, k + 2):
        sub = SampleStream(source, derive_seed(stream.seed, _M_STRIDE * M))
        res, _ = lbg_best(source, M, T_max, sub, restarts=restarts, sample_n=sample_n)
        res.facet_count = voronoi_facet_count(res.codebook, source, sub.child(restarts))
        log.info("LBG M=%d: mse=%.4f facets=%d", M, res.mse, res.facet_count)
        if res.facet_count <= k and (best is None or res.mse < best.mse):
            best = res
    return best


def lbg_region_matched(
    source: SourceModel,
    region_count: int,
    T_max: int,
    stream: SampleStream,
    restarts: int = DEFAULT_RESTARTS,
    sample_n: int = DEFAULT_SAMPLE_N,
) -> LbgResult:
    """LBG with as many points as a comparator design has regions."""
    if region_count < 1:
        raise ValueError("region_count must be >= 1")
    res, _ = lbg_best(source, region_count, T_max, stream, restarts=restarts, sample_n=sample_n)
    res.facet_count = voronoi_facet_count(res.codebook, source, stream.child(restarts))
    return res
