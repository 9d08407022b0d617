"""Alternating design of comparator arrangements.

Each iteration either perturbs every hyperplane with Gaussian noise
(global move, probability ``exp(-s t)``) or line-searches the coefficients
of one randomly chosen hyperplane (local move). Centroids are refreshed
after every change, and the best configuration seen is returned.

Seed layout for a design seeded with ``s``:

====== =====================================================
s      codebook samples for the per-iteration refresh
s + 1  MSE / entropy samples for the per-iteration refresh
s + 2  move selection, perturbations, hyperplane choice
s + 3  codebook samples for local line searches
s + 4  objective samples for local line searches
s + 5  final codebook
s + 6  final MSE
s + 7  final entropy
====== =====================================================
"""

from __future__ import annotations

import csv
import enum
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from clvq.arrangement import Arrangement
from clvq.estimation import (
    Codebook,
    EstimationParams,
    draw_codebook_sample,
    estimate_codebook,
    estimate_entropy,
    estimate_mse,
    objective_on_samples,
)
from clvq.initsearch import GeneticParams, genetic_init, mse_oracle, random_init
from clvq.source import SampleStream, SourceModel, derive_seed

__all__ = [
    "Objective",
    "OptimizerParams",
    "Schedule",
    "DesignReport",
    "SampleObjective",
    "global_update",
    "local_update",
    "design",
    "design_multi",
    "best_report",
    "summarize",
]

log = logging.getLogger(__name__)

RESTART_STRIDE = 100


class Objective(str, enum.Enum):
    MSE_MIN = "mse_min"
    ENTROPY_MAX = "entropy_max"


@dataclass(frozen=True)
class OptimizerParams:
    """Settings of one design run.

    ``sigma0=None`` means half the source's coordinate standard deviation.
    ``search_halfwidth`` is the line-search half-width in units of the
    hyperplane's weight norm.
    """

    T_max: int = 100
    s: float = 0.05
    sigma0: float | None = None
    sigma_decay: float = 0.95
    grid_points: int = 40
    objective: Objective = Objective.MSE_MIN
    search_halfwidth: float = 0.5
    estimation: EstimationParams = field(default_factory=EstimationParams)

    def __post_init__(self):
        object.__setattr__(self, "objective", Objective(self.objective))
        if self.T_max < 1:
            raise ValueError("T_max must be >= 1")
        if self.s <= 0:
            raise ValueError("s must be > 0")
        if self.sigma0 is not None and self.sigma0 <= 0:
            raise ValueError("sigma0 must be > 0")
        if not 0 < self.sigma_decay < 1:
            raise ValueError("sigma_decay must be in (0, 1)")
        if self.grid_points < 5:
            raise ValueError("grid_points must be >= 5")
        if self.search_halfwidth <= 0:
            raise ValueError("search_halfwidth must be > 0")

    def schedule(self, source: SourceModel) -> "Schedule":
        sigma0 = self.sigma0 if self.sigma0 is not None else 0.5 * source.coordinate_std
        return Schedule(self.s, sigma0, self.sigma_decay)

    def to_dict(self) -> dict:
        return {
            "T_max": self.T_max,
            "s": self.s,
            "sigma0": self.sigma0,
            "sigma_decay": self.sigma_decay,
            "grid_points": self.grid_points,
            "objective": self.objective.value,
            "search_halfwidth": self.search_halfwidth,
            "estimation": self.estimation.to_dict(),
        }


@dataclass(frozen=True)
class Schedule:
    s: float
    sigma0: float
    sigma_decay: float

    def p_global(self, t: int) -> float:
        return math.exp(-self.s * t)

    def sigma(self, t: int) -> float:
        return self.sigma0 * self.sigma_decay**t


@dataclass
class DesignReport:
    arrangement: Arrangement
    codebook: Codebook
    final_mse: float
    final_entropy: float
    region_count: int
    trace: list
    seed: int
    restart_index: int = 0
    objective: Objective = Objective.MSE_MIN
    initial_objective: float | None = None
    best_objective: float | None = None
    source: SourceModel | None = None

    @property
    def score(self) -> float:
        """Final objective as a quantity to minimise."""
        if self.objective is Objective.ENTROPY_MAX:
            return -self.final_entropy
        return self.final_mse

    def best_trace(self) -> list[float]:
        """Best-so-far objective per iteration (raw objective units)."""
        vals = [r["objective"] for r in self.trace]
        if self.objective is Objective.ENTROPY_MAX:
            return list(np.maximum.accumulate([self.initial_objective] + vals)[1:])
        return list(np.minimum.accumulate([self.initial_objective] + vals)[1:])

    def trace_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iteration", "objective", "move_type"])
        for r in self.trace:
            w.writerow([r["iteration"], repr(r["objective"]), r["move"]])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "source": self.source.to_dict() if self.source else None,
            "objective": self.objective.value,
            "seed": self.seed,
            "restart_index": self.restart_index,
            "arrangement": self.arrangement.to_dict(),
            "codebook": self.codebook.to_dict(),
            "final_mse": self.final_mse,
            "final_entropy": self.final_entropy,
            "region_count": self.region_count,
            "initial_objective": self.initial_objective,
            "best_objective": self.best_objective,
            "trace": self.trace,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DesignReport":
        return cls(
            arrangement=Arrangement.from_dict(data["arrangement"]),
            codebook=Codebook.from_dict(data["codebook"]),
            final_mse=float(data["final_mse"]),
            final_entropy=float(data["final_entropy"]),
            region_count=int(data["region_count"]),
            trace=list(data["trace"]),
            seed=int(data["seed"]),
            restart_index=int(data["restart_index"]),
            objective=Objective(data["objective"]),
            initial_objective=data.get("initial_objective"),
            best_objective=data.get("best_objective"),
            source=SourceModel.from_dict(data["source"]) if data.get("source") else None,
        )


# -- moves -------------------------------------------------------------------


def global_update(arr: Arrangement, sigma_t: float, rng: np.random.Generator) -> Arrangement:
    """Add N(0, sigma_t^2) noise to every weight and offset."""
    if sigma_t <= 0:
        raise ValueError("sigma_t must be > 0")
    coef = arr.coefficients
    while True:
        out = coef + rng.normal(0.0, sigma_t, size=coef.shape)
        if np.all(np.linalg.norm(out[:, :-1], axis=1) > 0):
            return Arrangement.from_coefficients(out)


class SampleObjective:
    """Objective evaluated on frozen samples (common random numbers).

    ``Xc`` fits the codebook and ``Xm`` scores it, so every candidate of a
    line search sees identical noise. ``sweep`` scores a whole grid of
    values of one coefficient in a single pass over the samples.
    """

    def __init__(self, Xc: np.ndarray, Xm: np.ndarray, objective: Objective | str = Objective.MSE_MIN):
        self.Xc = Xc
        self.Xm = Xm
        self.objective = Objective(objective)
        self.n_exact = 0
        self.n_grid = 0
        self.approximate = np.zeros(0, dtype=bool)

    @classmethod
    def draw(
        cls,
        arr: Arrangement,
        params: EstimationParams,
        cb_stream: SampleStream,
        mse_stream: SampleStream,
        objective: Objective | str = Objective.MSE_MIN,
    ) -> "SampleObjective":
        Xc, _ = draw_codebook_sample(arr, params, cb_stream)
        return cls(Xc, mse_stream.sample(params.mse_points), objective)

    def __call__(self, arr: Arrangement) -> float:
        self.n_exact += 1
        return objective_on_samples(arr, self.Xc, self.Xm, self.objective.value)

    def _prepare(self, arr: Arrangement, j: int):
        prep = []
        for X in (self.Xc, self.Xm):
            vals = arr.values(X)
            bits = np.delete(vals >= 0, j, axis=1)
            if bits.shape[1]:
                other = bits.astype(np.int64) @ (np.int64(1) << np.arange(bits.shape[1], dtype=np.int64))
            else:
                other = np.zeros(len(X), dtype=np.int64)
            prep.append(other)
        uniq, inv = np.unique(np.concatenate(prep), return_inverse=True)
        inv = inv.reshape(-1)
        return inv[: len(self.Xc)], inv[len(self.Xc):], len(uniq)

    def sweep(self, arr: Arrangement, j: int, i: int, grid: np.ndarray, prepared=None) -> np.ndarray:
        """Objective for each value in ``grid`` (evenly spaced) of coefficient
        ``i`` of hyperplane ``j`` (``i == d`` is the offset).

        Labels missing from the codebook sample are scored against the
        centroid nearest to their mean, an approximation of the per-sample
        nearest-centroid rule used by ``__call__``.
        """
        grid = np.asarray(grid, dtype=float)
        G = len(grid)
        step = (grid[-1] - grid[0]) / (G - 1)
        if not np.allclose(np.diff(grid), step, rtol=1e-9, atol=0):
            raise ValueError("sweep needs an ascending, evenly spaced grid")
        self.n_grid += G
        oc_c, oc_m, n_other = prepared if prepared is not None else self._prepare(arr, j)
        coef = arr.coefficients
        base = coef[j, i]

        def stats(X, oc, extra_sq):
            # comparator value at coefficient value p is a0 + p * z
            z = X[:, i] if i < arr.d else np.ones(len(X))
            a0 = X @ arr.weights[j] + arr.offsets[j] - base * z
            pos, neg = z > 0, z < 0
            with np.errstate(divide="ignore", invalid="ignore"):
                thr = -a0 / z
            # bit j is on for g >= row (z > 0) or for g < row (z < 0)
            # uniform grid: first g with grid[g] >= thr (z > 0) or > thr (z < 0)
            u = np.clip((thr - grid[0]) / step, -1.0, G)
            row = np.where(pos, np.ceil(u), np.floor(u) + 1.0)
            row = np.where(z == 0, np.where(a0 >= 0, 0.0, G), row)
            row = np.clip(row, 0, G).astype(np.int64)
            idx = row * n_other + oc
            sgn = np.where(neg, -1.0, 1.0)
            split = oc + n_other * neg
            cols = [np.ones(len(X))] + [X[:, m] for m in range(X.shape[1])]
            if extra_sq:
                cols.append((X**2).sum(1))
            out = []
            for w in cols:
                acc = np.bincount(idx, weights=sgn * w, minlength=(G + 1) * n_other)
                acc = acc[: G * n_other].reshape(G, n_other)
                tot = np.bincount(split, weights=w, minlength=2 * n_other)
                acc[0] += tot[n_other:]
                on = np.cumsum(acc, axis=0)
                off = (tot[:n_other] + tot[n_other:])[None, :] - on
                out.append(np.concatenate([off, on], axis=1))
            return out

        self.approximate = np.zeros(G, dtype=bool)
        if self.objective is Objective.ENTROPY_MAX:
            nm = stats(self.Xm, oc_m, False)[0]
            p = np.clip(nm, 0, None) / len(self.Xm)
            with np.errstate(divide="ignore", invalid="ignore"):
                plogp = np.where(p > 0, p * np.log2(np.where(p > 0, p, 1)), 0.0)
            return plogp.sum(axis=1)

        sc = stats(self.Xc, oc_c, False)
        sm = stats(self.Xm, oc_m, True)
        nc = np.rint(sc[0])
        nm = np.rint(sm[0])
        Sc = np.stack(sc[1:], axis=-1)
        Sm = np.stack(sm[1:-1], axis=-1)
        Qm = sm[-1]
        with np.errstate(divide="ignore", invalid="ignore"):
            cent = np.where(nc[..., None] > 0, Sc / nc[..., None], 0.0)
        contrib = Qm - 2 * (cent * Sm).sum(-1) + nm * (cent**2).sum(-1)
        missing = (nc == 0) & (nm > 0)
        self.approximate = missing.any(axis=1)
        for g in np.flatnonzero(missing.any(axis=1)):
            have = nc[g] > 0
            if not have.any():
                return np.full(G, np.inf)
            for c in np.flatnonzero(missing[g]):
                mu = Sm[g, c] / nm[g, c]
                cands = cent[g, have]
                cstar = cands[np.argmin(((cands - mu) ** 2).sum(1))]
                contrib[g, c] = Qm[g, c] - 2 * cstar @ Sm[g, c] + nm[g, c] * cstar @ cstar
        return contrib.sum(axis=1) / len(self.Xm)


def _quadratic_vertex(x: np.ndarray, f: np.ndarray, g: int) -> float:
    """Minimiser of the parabola through the grid minimum and its neighbours."""
    lo = min(max(g - 1, 0), len(x) - 3)
    xs, fs = x[lo : lo + 3], f[lo : lo + 3]
    if not np.all(np.isfinite(fs)):
        return float(x[g])
    a, b, _ = np.polyfit(xs - x[g], fs, 2)
    if a <= 0:
        return float(x[g])
    return float(np.clip(x[g] - b / (2 * a), x[0], x[-1]))


def local_update(
    arr: Arrangement,
    index: int,
    objective: SampleObjective,
    params: OptimizerParams,
) -> tuple[Arrangement, dict]:
    """Coordinate-wise line search over the ``d + 1`` coefficients of one
    hyperplane, keeping a new value only if it does not worsen ``objective``."""
    if not 0 <= index < arr.k:
        raise IndexError(f"hyperplane index {index} out of range for k={arr.k}")
    G = params.grid_points
    current = objective(arr)
    start = current
    prepared = objective._prepare(arr, index)
    accepted = 0
    for i in range(arr.d + 1):
        coef = arr.coefficients
        p = coef[index, i]
        w = params.search_halfwidth * float(np.linalg.norm(coef[index, :-1]))
        grid = np.linspace(p - w, p + w, G)
        f = objective.sweep(arr, index, i, grid, prepared)
        g = int(np.argmin(f))
        best_arr, best_val = arr, current
        vertex = _quadratic_vertex(grid, f, g)
        for cand in (float(grid[g]), vertex):
            new = coef.copy()
            new[index, i] = cand
            if np.linalg.norm(new[index, :-1]) == 0:
                continue
            trial = Arrangement.from_coefficients(new)
            exact_on_grid = cand == grid[g] and not objective.approximate[g]
            val = float(f[g]) if exact_on_grid else objective(trial)
            if val < best_val:
                best_arr, best_val = trial, val
            if vertex == grid[g]:
                break
        if best_arr is not arr:
            arr, current = best_arr, best_val
            accepted += 1
    info = {"before": start, "after": current, "accepted": accepted, "grid_evaluations": G * (arr.d + 1)}
    return arr, info


# -- design loop ---------------------------------------------------------------


def _refresh(arr, source, params, cb_stream, obj_stream):
    cb = estimate_codebook(arr, source, params.estimation, cb_stream)
    if params.objective is Objective.ENTROPY_MAX:
        return cb, estimate_entropy(arr, source, params.estimation.mse_points, obj_stream)
    return cb, estimate_mse(arr, cb, source, params.estimation.mse_points, obj_stream)


def _better(objective: Objective, a: float, b: float) -> bool:
    return a > b if objective is Objective.ENTROPY_MAX else a < b


def design(
    source: SourceModel,
    k: int,
    params: OptimizerParams,
    init: Arrangement,
    stream: SampleStream,
    restart_index: int = 0,
    reporting: EstimationParams | None = None,
) -> DesignReport:
    """Optimise ``init`` for ``T_max`` iterations; report the best configuration."""
    if (init.d, init.k) != (source.dimension, k):
        raise ValueError(f"init has (d={init.d}, k={init.k}); expected (d={source.dimension}, k={k})")
    reporting = reporting or EstimationParams.reporting()
    seed = stream.seed
    sub = [SampleStream(source, derive_seed(seed, i)) for i in range(8)]
    rng = sub[2].rng
    sched = params.schedule(source)

    arr = init.normalized()
    _, value = _refresh(arr, source, params, sub[0], sub[1])
    initial = value
    best_arr, best_val = arr, value
    trace = []
    for t in range(1, params.T_max + 1):
        if rng.random() < sched.p_global(t):
            arr = global_update(arr, sched.sigma(t), rng).normalized()
            move = "global"
            changed = True
        else:
            j = int(rng.integers(arr.k))
            obj = SampleObjective.draw(arr, params.estimation, sub[3], sub[4], params.objective)
            new, info = local_update(arr, j, obj, params)
            changed = info["accepted"] > 0
            arr = new.normalized()
            move = "local"
        if changed:
            _, value = _refresh(arr, source, params, sub[0], sub[1])
        trace.append({"iteration": t, "objective": value, "move": move})
        if _better(params.objective, value, best_val):
            best_arr, best_val = arr, value
        log.debug("t=%d %s objective=%.5f best=%.5f", t, move, value, best_val)

    cb = estimate_codebook(best_arr, source, reporting, sub[5])
    mse = estimate_mse(best_arr, cb, source, reporting.mse_points, sub[6])
    ent = estimate_entropy(best_arr, source, reporting.mse_points, sub[7])
    return DesignReport(
        arrangement=best_arr,
        codebook=cb,
        final_mse=mse,
        final_entropy=ent,
        region_count=len(cb),
        trace=trace,
        seed=seed,
        restart_index=restart_index,
        objective=params.objective,
        initial_objective=initial,
        best_objective=best_val,
        source=source,
    )


def restart_seed(base_seed: int, r: int) -> int:
    return derive_seed(base_seed, RESTART_STRIDE * r)


def _run_restart(args) -> DesignReport:
    source, k, params, init_strategy, genetic, base_seed, r, reporting = args
    seed = restart_seed(base_seed, r)
    init_stream = SampleStream(source, derive_seed(seed, 10))
    if init_strategy == "genetic":
        init, _ = genetic_init(source, k, genetic or GeneticParams(), mse_oracle(source), init_stream)
    elif init_strategy == "random":
        init = random_init(source, k, init_stream)
    else:
        raise ValueError(f"unknown init strategy {init_strategy!r}")
    return design(source, k, params, init, SampleStream(source, seed), restart_index=r, reporting=reporting)


def design_multi(
    source: SourceModel,
    k: int,
    params: OptimizerParams,
    init_strategy: str = "random",
    restarts: int = 10,
    base_seed: int = 0,
    genetic: GeneticParams | None = None,
    jobs: int = 1,
    reporting: EstimationParams | None = None,
) -> list[DesignReport]:
    """Independent restarts; restart ``r`` is seeded with ``base_seed + 100 r``
    and initialised from seed ``base_seed + 100 r + 10``."""
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    tasks = [(source, k, params, init_strategy, genetic, base_seed, r, reporting) for r in range(restarts)]
    if jobs > 1 and restarts > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(_run_restart, tasks))
    return [_run_restart(t) for t in tasks]


def best_report(reports: list[DesignReport]) -> DesignReport:
    return min(reports, key=lambda r: r.score)


def summarize(reports: list[DesignReport]) -> dict:
    best = best_report(reports)
    return {
        "restarts": len(reports),
        "best_restart": best.restart_index,
        "best_mse": best.final_mse,
        "best_entropy": best.final_entropy,
        "best_region_count": best.region_count,
        "mean_mse": float(np.mean([r.final_mse for r in reports])),
        "mean_entropy": float(np.mean([r.final_entropy for r in reports])),
        "min_mse": float(min(r.final_mse for r in reports)),
    }
