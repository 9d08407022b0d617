"""Comparator configurations, sign labels and region counting.

An arrangement holds ``k`` comparators in ``R^d``. Comparator ``j`` outputs
``sign(V[j] @ x + t[j])``; the vector of all ``k`` outputs is the region
label of ``x``. Internally labels are packed into integer codes with bit
``j`` set when comparator ``j`` outputs ``+1``.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from math import comb
from typing import Iterable

import numpy as np

from clvq.source import SampleStream, SourceModel

__all__ = [
    "Arrangement",
    "RegionLabel",
    "covector",
    "label",
    "label_codes",
    "code_to_label",
    "label_to_code",
    "label_string",
    "max_regions",
    "max_regions_central",
    "max_regions_parallel",
    "is_general_position",
    "enumerate_regions",
    "enumerate_regions_exact_2d",
]

RegionLabel = tuple  # tuple of +1/-1, length k


@dataclass(frozen=True, eq=False)
class Arrangement:
    """``k`` affine hyperplanes ``{x : V[j] @ x + t[j] = 0}`` in ``R^d``."""

    weights: np.ndarray
    offsets: np.ndarray

    def __post_init__(self):
        V = np.array(self.weights, dtype=float, ndmin=2)
        t = np.array(self.offsets, dtype=float).reshape(-1)
        if V.ndim != 2 or V.shape[0] < 1 or V.shape[1] < 1:
            raise ValueError(f"weights must be a non-empty k x d matrix, got shape {V.shape}")
        if t.shape[0] != V.shape[0]:
            raise ValueError(f"{V.shape[0]} weight rows but {t.shape[0]} offsets")
        if not (np.all(np.isfinite(V)) and np.all(np.isfinite(t))):
            raise ValueError("arrangement coefficients must be finite")
        if np.any(np.linalg.norm(V, axis=1) == 0):
            raise ValueError("every weight row must be nonzero")
        V.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "weights", V)
        object.__setattr__(self, "offsets", t)

    @property
    def k(self) -> int:
        return self.weights.shape[0]

    @property
    def d(self) -> int:
        return self.weights.shape[1]

    @property
    def coefficients(self) -> np.ndarray:
        """``k x (d+1)`` matrix ``[V | t]`` (a copy)."""
        return np.hstack([self.weights, self.offsets[:, None]])

    @classmethod
    def from_coefficients(cls, coef: np.ndarray) -> "Arrangement":
        coef = np.asarray(coef, dtype=float)
        return cls(coef[:, :-1], coef[:, -1])

    def normalized(self) -> "Arrangement":
        """Same hyperplanes with unit-norm weight rows."""
        n = np.linalg.norm(self.weights, axis=1)
        return Arrangement(self.weights / n[:, None], self.offsets / n)

    def permuted(self, perm: Iterable[int]) -> "Arrangement":
        perm = list(perm)
        return Arrangement(self.weights[perm], self.offsets[perm])

    def values(self, X: np.ndarray) -> np.ndarray:
        """Comparator pre-activations ``X @ V.T + t``, shape ``(n, k)``."""
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.d:
            raise ValueError(f"points have dimension {X.shape[-1]}, arrangement has d={self.d}")
        return X @ self.weights.T + self.offsets

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "k": self.k,
            "V": self.weights.tolist(),
            "t": self.offsets.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Arrangement":
        arr = cls(data["V"], data["t"])
        if arr.d != int(data["d"]) or arr.k != int(data["k"]):
            raise ValueError(
                f"declared (d={data['d']}, k={data['k']}) does not match V of shape {arr.weights.shape}"
            )
        return arr

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "Arrangement":
        return cls.from_dict(json.loads(text))

    def __eq__(self, other):
        if not isinstance(other, Arrangement):
            return NotImplemented
        return np.array_equal(self.weights, other.weights) and np.array_equal(self.offsets, other.offsets)

    def __hash__(self):
        return hash((self.weights.tobytes(), self.offsets.tobytes()))


# -- labels ------------------------------------------------------------------


def covector(arr: Arrangement, x, tol: float = 1e-9) -> tuple:
    """Sign vector over {-1, 0, +1}; 0 where ``|v.x + t| <= tol * |v|``."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if tol < 0:
        raise ValueError("tol must be non-negative")
    vals = arr.values(x[None, :])[0]
    norms = np.linalg.norm(arr.weights, axis=1)
    out = np.where(np.abs(vals) <= tol * norms, 0, np.sign(vals)).astype(int)
    return tuple(int(s) for s in out)


def label(arr: Arrangement, x) -> RegionLabel:
    """Strict sign vector of ``x``; exact zeros resolve to +1."""
    x = np.asarray(x, dtype=float).reshape(-1)
    vals = arr.values(x[None, :])[0]
    return tuple(1 if v >= 0 else -1 for v in vals)


def label_codes(arr: Arrangement, X: np.ndarray) -> np.ndarray:
    """Packed integer labels of the rows of ``X`` (bit j set iff output j is +1)."""
    bits = arr.values(X) >= 0
    weights = np.left_shift(np.int64(1), np.arange(arr.k, dtype=np.int64))
    return bits.astype(np.int64) @ weights


def code_to_label(code: int, k: int) -> RegionLabel:
    return tuple(1 if (int(code) >> j) & 1 else -1 for j in range(k))


def label_to_code(lab: Iterable[int]) -> int:
    return sum(1 << j for j, s in enumerate(lab) if s > 0)


def label_string(lab: Iterable[int]) -> str:
    return "".join("+" if s > 0 else "-" for s in lab)


def parse_label_string(text: str) -> RegionLabel:
    if set(text) - {"+", "-"}:
        raise ValueError(f"label string may only contain '+' and '-', got {text!r}")
    return tuple(1 if c == "+" else -1 for c in text)


# -- counting bounds ---------------------------------------------------------


def max_regions(m: int, n: int) -> int:
    """Largest number of regions cut from R^m by n affine hyperplanes."""
    if m < 1 or n < 0:
        raise ValueError("need m >= 1 and n >= 0")
    return sum(comb(n, i) for i in range(m + 1))


def max_regions_central(n: int, m: int) -> int:
    """Largest number of regions for n hyperplanes through the origin of R^m."""
    if m < 1 or n < 1:
        raise ValueError("need n >= 1 and m >= 1")
    return 2 * sum(comb(n - 1, i) for i in range(m))


def max_regions_parallel(m: int, l: int, dmult: int) -> int:
    """Bound for ``l`` directions in R^m, each repeated by ``dmult`` parallel copies."""
    if m < 1 or l < 1 or dmult < 1:
        raise ValueError("need m, l, dmult >= 1")
    return sum(comb(l, i) * dmult**i for i in range(m + 1))


# -- general position ----------------------------------------------------------


def _rank(M: np.ndarray, tol: float) -> int:
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > tol * s[0]))


def is_general_position(arr: Arrangement, tol: float = 1e-9) -> bool:
    """True iff ``p <= d`` hyperplanes always meet in a ``(d-p)``-flat and
    more than ``d`` hyperplanes never share a point.

    It suffices to check subsets of size ``min(k, d)`` for full rank and
    subsets of size ``d + 1`` for inconsistency.
    """
    arr = arr.normalized()
    V, t, k, d = arr.weights, arr.offsets, arr.k, arr.d
    p = min(k, d)
    for S in itertools.combinations(range(k), p):
        if _rank(V[list(S)], tol) < p:
            return False
    if k > d:
        aug = np.hstack([V, t[:, None]])
        for S in itertools.combinations(range(k), d + 1):
            # V_S has rank d, so the system is inconsistent iff [V_S | t_S] is nonsingular
            if _rank(aug[list(S)], tol) < d + 1:
                return False
    return True


# -- region enumeration --------------------------------------------------------


def enumerate_regions(
    arr: Arrangement, source: SourceModel, stream: SampleStream, budget: int
) -> dict:
    """Labels observed among ``budget`` source samples, with empirical masses."""
    if budget < 1:
        raise ValueError("budget must be >= 1")
    if source.dimension != arr.d:
        raise ValueError(f"source dimension {source.dimension} != arrangement d={arr.d}")
    codes = label_codes(arr, stream.sample(budget))
    uniq, counts = np.unique(codes, return_counts=True)
    return {code_to_label(c, arr.k): n / budget for c, n in zip(uniq, counts)}


@dataclass(frozen=True)
class _Cell:
    label: RegionLabel
    point: np.ndarray
    unbounded: bool


def _probe_cells_2d(arr: Arrangement) -> dict:
    """Exact cell discovery for line arrangements: label -> _Cell."""
    if arr.d != 2:
        raise ValueError(f"exact enumeration needs d = 2, got d = {arr.d}")
    arr = arr.normalized()
    V, t, k = arr.weights, arr.offsets, arr.k
    dirs = np.column_stack([-V[:, 1], V[:, 0]])
    feet = -t[:, None] * V  # nearest point of each line to the origin

    vertices = []
    for a, b in itertools.combinations(range(k), 2):
        M = V[[a, b]]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        vertices.append((a, b, np.linalg.solve(M, -t[[a, b]])))

    reach = max(
        [1.0]
        + [float(np.linalg.norm(p)) for *_, p in vertices]
        + [float(np.linalg.norm(f)) for f in feet]
    )
    eps = 1e-6 * reach
    far = 10.0 * reach + 10.0

    probes = []
    for a, b, p in vertices:
        for sa, sb in itertools.product((-1.0, 1.0), repeat=2):
            probes.append(p + eps * (sa * dirs[a] + sb * dirs[b]))
    for j in range(k):
        for s in (-1.0, 1.0):
            probes.append(feet[j] + s * eps * V[j])
            for sd in (-1.0, 1.0):
                probes.append(feet[j] + s * eps * V[j] + sd * far * dirs[j])
    angles = np.sort(np.mod(np.concatenate([np.arctan2(dirs[:, 1], dirs[:, 0]),
                                            np.arctan2(-dirs[:, 1], -dirs[:, 0])]), 2 * np.pi))
    mids = (angles + np.roll(angles, -1) + np.r_[np.zeros(len(angles) - 1), 2 * np.pi]) / 2
    for a in mids:
        probes.append(far * np.array([np.cos(a), np.sin(a)]))

    P = np.asarray(probes)
    vals = P @ V.T + t
    # discard probes that landed on a line (numerically ambiguous)
    ok = np.all(np.abs(vals) > 1e-3 * eps, axis=1)
    P, vals = P[ok], vals[ok]
    bound = reach * (1 + 1e-6)
    cells: dict = {}
    for p, v in zip(P, vals):
        lab = tuple(1 if x >= 0 else -1 for x in v)
        unb = bool(np.linalg.norm(p) > bound + eps)
        if lab in cells:
            if unb and not cells[lab].unbounded:
                cells[lab] = _Cell(lab, cells[lab].point, True)
        else:
            cells[lab] = _Cell(lab, p, unb)
    return cells


def enumerate_regions_exact_2d(arr: Arrangement) -> set:
    """Exact label set of the nonempty open cells of a line arrangement."""
    return set(_probe_cells_2d(arr))
