"""I.i.d. source models and seeded sample streams.

Random numbers come from numpy's PCG64 bit generator, seeded directly with
the stream seed. PCG64 output is specified bit-for-bit by numpy, so streams
are reproducible across platforms.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SourceKind",
    "SourceModel",
    "SampleStream",
    "sample",
    "gaussian_rd",
    "source_variance_total",
    "derive_seed",
]

RNG_NAME = "numpy.random.PCG64"


class SourceKind(str, enum.Enum):
    GAUSSIAN_IID = "gaussian_iid"
    UNIFORM_IID = "uniform_iid"


@dataclass(frozen=True)
class SourceModel:
    """An i.i.d. source on R^d.

    ``gaussian_iid`` draws each coordinate from N(0, 1). ``uniform_iid`` draws
    each coordinate from U[-1, 1] (the "unitary uniform" source; its
    one-comparator distortion is 5/12).
    """

    kind: SourceKind
    dimension: int

    def __post_init__(self):
        object.__setattr__(self, "kind", SourceKind(self.kind))
        if int(self.dimension) < 1:
            raise ValueError(f"dimension must be >= 1, got {self.dimension}")
        object.__setattr__(self, "dimension", int(self.dimension))

    @classmethod
    def gaussian(cls, d: int) -> "SourceModel":
        return cls(SourceKind.GAUSSIAN_IID, d)

    @classmethod
    def uniform(cls, d: int) -> "SourceModel":
        return cls(SourceKind.UNIFORM_IID, d)

    @property
    def mean(self) -> np.ndarray:
        return np.zeros(self.dimension)

    @property
    def coordinate_std(self) -> float:
        """Per-coordinate standard deviation."""
        if self.kind is SourceKind.GAUSSIAN_IID:
            return 1.0
        return float(np.sqrt(1.0 / 3.0))

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind is SourceKind.GAUSSIAN_IID:
            return rng.standard_normal((n, self.dimension))
        return rng.uniform(-1.0, 1.0, size=(n, self.dimension))

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "d": self.dimension}

    @classmethod
    def from_dict(cls, data: dict) -> "SourceModel":
        return cls(SourceKind(data["kind"]), int(data["d"]))


@dataclass
class SampleStream:
    """A single-owner, reproducible stream of source points.

    The same ``(source, seed)`` always yields the same sequence of points
    for the same sequence of ``sample`` calls. ``counter`` records how many
    points have been drawn so far.
    """

    source: SourceModel
    seed: int
    counter: int = 0
    _rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        self.seed = int(self.seed)
        self._rng = np.random.Generator(np.random.PCG64(self.seed))
        if self.counter:
            # replay to the requested position
            n, self.counter = self.counter, 0
            self.sample(n)

    def sample(self, n: int) -> np.ndarray:
        if n < 1:
            raise ValueError(f"n must be >= 1, got {n}")
        pts = self.source.draw(self._rng, n)
        self.counter += n
        return pts

    def child(self, index: int) -> "SampleStream":
        """Independent stream with seed ``derive_seed(self.seed, index)``."""
        return SampleStream(self.source, derive_seed(self.seed, index))

    @property
    def rng(self) -> np.random.Generator:
        """Generator for non-sample randomness owned by this stream."""
        return self._rng


def derive_seed(base_seed: int, index: int) -> int:
    """Seed of the ``index``-th stream derived from ``base_seed``: base + index."""
    return int(base_seed) + int(index)


def sample(stream: SampleStream, n: int) -> np.ndarray:
    """Draw ``n`` i.i.d. points, shape ``(n, d)``; advances the stream."""
    return stream.sample(n)


def gaussian_rd(rate: float) -> float:
    """Distortion-rate function of a unit-variance Gaussian, 2^(-2R)."""
    if rate < 0:
        raise ValueError(f"rate must be non-negative, got {rate}")
    return float(2.0 ** (-2.0 * rate))


def source_variance_total(source: SourceModel) -> float:
    """Sum of coordinate variances: the zero-comparator distortion."""
    if source.kind is SourceKind.GAUSSIAN_IID:
        return float(source.dimension)
    return source.dimension / 3.0
