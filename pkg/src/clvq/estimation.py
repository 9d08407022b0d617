"""Monte Carlo estimates of region centroids, MSE and output entropy.

Centroid and MSE estimates always use separate sample streams. By
convention a design seeded with ``s`` draws codebook samples from seed
``s`` and MSE samples from seed ``s + 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from clvq.arrangement import (
    Arrangement,
    RegionLabel,
    code_to_label,
    label_codes,
    label_string,
)
from clvq.source import SampleStream, SourceModel

__all__ = [
    "EstimationParams",
    "Codebook",
    "estimate_codebook",
    "estimate_mse",
    "estimate_entropy",
    "draw_codebook_sample",
    "codebook_from_sample",
    "squared_errors",
    "plugin_entropy",
    "objective_on_samples",
]

_FIRST_BATCH = 20_000


@dataclass(frozen=True)
class EstimationParams:
    min_points_per_region: int = 200
    max_total_points: int = 500_000
    mse_points: int = 100_000

    def __post_init__(self):
        if self.min_points_per_region < 1:
            raise ValueError("min_points_per_region must be >= 1")
        if self.max_total_points < self.min_points_per_region:
            raise ValueError("max_total_points must be >= min_points_per_region")
        if self.mse_points < 1:
            raise ValueError("mse_points must be >= 1")

    @classmethod
    def reporting(cls) -> "EstimationParams":
        """Budgets used for final, reported estimates."""
        return cls(200, 1_000_000, 1_000_000)

    def to_dict(self) -> dict:
        return {
            "min_points_per_region": self.min_points_per_region,
            "max_total_points": self.max_total_points,
            "mse_points": self.mse_points,
        }


@dataclass(frozen=True, eq=False)
class Codebook:
    """Reconstruction points keyed by packed region codes.

    ``codes`` is sorted ascending; ``centroids[i]``, ``masses[i]`` and
    ``counts[i]`` belong to ``codes[i]``.
    """

    k: int
    codes: np.ndarray
    centroids: np.ndarray
    counts: np.ndarray
    masses: np.ndarray = field(default=None)

    def __post_init__(self):
        codes = np.asarray(self.codes, dtype=np.int64)
        order = np.argsort(codes, kind="stable")
        object.__setattr__(self, "codes", codes[order])
        object.__setattr__(self, "centroids", np.asarray(self.centroids, dtype=float)[order])
        counts = np.asarray(self.counts, dtype=np.int64)[order]
        object.__setattr__(self, "counts", counts)
        if self.masses is None:
            masses = counts / counts.sum() if counts.sum() else np.zeros(len(counts))
        else:
            masses = np.asarray(self.masses, dtype=float)[order]
        object.__setattr__(self, "masses", masses)

    def __len__(self) -> int:
        return len(self.codes)

    @property
    def d(self) -> int:
        return self.centroids.shape[1]

    @property
    def entries(self) -> dict:
        """``RegionLabel -> (centroid, mass, count)``."""
        return {
            code_to_label(c, self.k): (self.centroids[i], float(self.masses[i]), int(self.counts[i]))
            for i, c in enumerate(self.codes)
        }

    def reconstruct(self, codes: np.ndarray, X: np.ndarray) -> np.ndarray:
        """Reconstruction of each sample; unknown labels use the nearest centroid."""
        if len(self.codes) == 0:
            raise ValueError("empty codebook")
        idx = np.searchsorted(self.codes, codes)
        idx = np.minimum(idx, len(self.codes) - 1)
        missing = self.codes[idx] != codes
        if np.any(missing):
            Xm = X[missing]
            d2 = ((Xm[:, None, :] - self.centroids[None, :, :]) ** 2).sum(-1)
            idx = idx.copy()
            idx[missing] = np.argmin(d2, axis=1)
        return self.centroids[idx]

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "entries": [
                {
                    "label": label_string(code_to_label(c, self.k)) if self.k else "",
                    "centroid": self.centroids[i].tolist(),
                    "mass": float(self.masses[i]),
                    "count": int(self.counts[i]),
                }
                for i, c in enumerate(self.codes)
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Codebook":
        k = int(data["k"])
        entries = data["entries"]
        codes = [sum(1 << j for j, ch in enumerate(e["label"]) if ch == "+") for e in entries]
        d = len(entries[0]["centroid"]) if entries else 0
        return cls(
            k,
            np.array(codes, dtype=np.int64),
            np.array([e["centroid"] for e in entries], dtype=float).reshape(-1, d),
            np.array([e["count"] for e in entries], dtype=np.int64),
            np.array([e["mass"] for e in entries], dtype=float),
        )


def _codes(arr: Arrangement | None, X: np.ndarray) -> np.ndarray:
    # arr=None is the zero-comparator quantizer: a single region
    if arr is None:
        return np.zeros(len(X), dtype=np.int64)
    return label_codes(arr, X)


def _check(arr: Arrangement | None, source: SourceModel):
    if arr is not None and arr.d != source.dimension:
        raise ValueError(f"source dimension {source.dimension} != arrangement d={arr.d}")


def draw_codebook_sample(
    arr: Arrangement | None, params: EstimationParams, stream: SampleStream
) -> tuple[np.ndarray, np.ndarray]:
    """Sample until every observed region holds ``min_points_per_region``
    points or ``max_total_points`` is reached. Returns ``(X, codes)``."""
    chunks, code_chunks = [], []
    total = 0
    counts: dict = {}
    batch = min(params.max_total_points, max(_FIRST_BATCH, 10 * params.min_points_per_region))
    while True:
        X = stream.sample(batch)
        c = _codes(arr, X)
        chunks.append(X)
        code_chunks.append(c)
        total += batch
        u, n = np.unique(c, return_counts=True)
        for ui, ni in zip(u.tolist(), n.tolist()):
            counts[ui] = counts.get(ui, 0) + ni
        if min(counts.values()) >= params.min_points_per_region:
            break
        if total >= params.max_total_points:
            break
        batch = min(params.max_total_points - total, total)
    return np.concatenate(chunks), np.concatenate(code_chunks)


def codebook_from_sample(k: int, X: np.ndarray, codes: np.ndarray) -> Codebook:
    uniq, inv, counts = np.unique(codes, return_inverse=True, return_counts=True)
    inv = inv.reshape(-1)
    sums = np.column_stack(
        [np.bincount(inv, weights=X[:, m], minlength=len(uniq)) for m in range(X.shape[1])]
    )
    return Codebook(k, uniq, sums / counts[:, None], counts)


def estimate_codebook(
    arr: Arrangement | None,
    source: SourceModel,
    params: EstimationParams,
    stream: SampleStream,
) -> Codebook:
    """Per-region sample means; regions never sampled are absent."""
    _check(arr, source)
    X, codes = draw_codebook_sample(arr, params, stream)
    return codebook_from_sample(0 if arr is None else arr.k, X, codes)


def squared_errors(arr: Arrangement | None, codebook: Codebook, X: np.ndarray) -> np.ndarray:
    codes = _codes(arr, X)
    return ((X - codebook.reconstruct(codes, X)) ** 2).sum(axis=1)


def estimate_mse(
    arr: Arrangement | None,
    codebook: Codebook,
    source: SourceModel,
    n: int,
    stream: SampleStream,
    return_se: bool = False,
):
    """Mean squared reconstruction error over ``n`` fresh samples.

    With ``return_se`` also returns the Monte Carlo standard error.
    """
    _check(arr, source)
    if len(codebook) == 0:
        raise ValueError("empty codebook")
    err = squared_errors(arr, codebook, stream.sample(n))
    mse = float(err.mean())
    if return_se:
        return mse, float(err.std(ddof=1) / np.sqrt(n)) if n > 1 else float("inf")
    return mse


def plugin_entropy(counts: np.ndarray) -> float:
    p = np.asarray(counts, dtype=float)
    p = p[p > 0] / p.sum()
    return float(-(p * np.log2(p)).sum()) + 0.0


def estimate_entropy(
    arr: Arrangement | None, source: SourceModel, n: int, stream: SampleStream
) -> float:
    """Plug-in entropy (bits) of the comparator outputs."""
    if n < 1:
        raise ValueError("n must be >= 1")
    _check(arr, source)
    _, counts = np.unique(_codes(arr, stream.sample(n)), return_counts=True)
    return plugin_entropy(counts)


def objective_on_samples(
    arr: Arrangement,
    Xc: np.ndarray,
    Xm: np.ndarray,
    objective: str = "mse_min",
) -> float:
    """Objective to minimise, evaluated on fixed samples.

    ``mse_min``: MSE on ``Xm`` of the codebook fitted on ``Xc``.
    ``entropy_max``: negative output entropy on ``Xm``.
    """
    if objective == "entropy_max":
        _, counts = np.unique(label_codes(arr, Xm), return_counts=True)
        return -plugin_entropy(counts)
    cb = codebook_from_sample(arr.k, Xc, label_codes(arr, Xc))
    return float(squared_errors(arr, cb, Xm).mean())


def label_masses(codebook: Codebook) -> dict[RegionLabel, float]:
    return {code_to_label(c, codebook.k): float(m) for c, m in zip(codebook.codes, codebook.masses)}
