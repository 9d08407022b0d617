"""Command-line experiment runner.

Subcommands: ``design``, ``compare``, ``genetic-trace``, ``export-plots``
and ``bounds``. Experiments are described by a JSON config (see
``CONFIG_SCHEMA``); the config is validated before any computation and
every output is a deterministic function of the config and seed.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import jsonschema
import numpy as np

from clvq.arrangement import label_codes, label_string, code_to_label
from clvq.arrangement import max_regions, max_regions_central, max_regions_parallel
from clvq.arrgraph import build_region_graph
from clvq.baselines import lbg_comparator_matched, lbg_region_matched
from clvq.estimation import EstimationParams
from clvq.initsearch import GeneticParams, genetic_init, mse_oracle
from clvq.optimizer import DesignReport, OptimizerParams, best_report, design_multi, summarize
from clvq.source import SampleStream, SourceModel, derive_seed

log = logging.getLogger("clvq")

_POS_INT = {"type": "integer", "minimum": 1}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["source", "k", "seed"],
    "additionalProperties": False,
    "properties": {
        "source": {
            "type": "object",
            "required": ["kind", "d"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["gaussian_iid", "uniform_iid"]},
                "d": _POS_INT,
            },
        },
        "k": {"oneOf": [_POS_INT, {"type": "array", "items": _POS_INT, "minItems": 1}]},
        "objective": {"enum": ["mse_min", "entropy_max"]},
        "init": {
            "type": "object",
            "required": ["strategy"],
            "additionalProperties": False,
            "properties": {
                "strategy": {"enum": ["random", "genetic"]},
                "genetic": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "pool_size": {"type": "integer", "minimum": 2},
                        "generations": _POS_INT,
                        "keep_fraction": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                        "crossover_policy": {"enum": ["random_pairing", "dissimilarity_pairing"]},
                        "mutation_sigma": {"type": "number", "exclusiveMinimum": 0},
                    },
                },
            },
        },
        "optimizer": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "T_max": _POS_INT,
                "s": {"type": "number", "exclusiveMinimum": 0},
                "sigma0": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "sigma_decay": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "grid_points": {"type": "integer", "minimum": 5},
                "search_halfwidth": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "estimation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "min_points_per_region": _POS_INT,
                "max_total_points": _POS_INT,
                "mse_points": _POS_INT,
            },
        },
        "reporting": {"$ref": "#/properties/estimation"},
        "lbg": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "T_max": _POS_INT,
                "restarts": _POS_INT,
                "sample_n": _POS_INT,
            },
        },
        "restarts": _POS_INT,
        "runs": _POS_INT,
        "seed": {"type": "integer"},
        "outputs": {"type": "string"},
    },
}


class ConfigError(ValueError):
    pass


def validate_config(cfg: dict) -> dict:
    """Raise ``ConfigError`` naming the offending field."""
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as e:
        where = ".".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at '{where}': {e.message}") from None
    est = cfg.get("estimation", {})
    if est.get("max_total_points", 500_000) < est.get("min_points_per_region", 200):
        raise ConfigError("invalid config at 'estimation.max_total_points': must be >= min_points_per_region")
    return cfg


def load_config(path: str | Path, seed: int | None = None, out: str | None = None) -> dict:
    try:
        cfg = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    if seed is not None:
        cfg["seed"] = seed
    if out is not None:
        cfg["outputs"] = out
    return validate_config(cfg)


def _source(cfg) -> SourceModel:
    return SourceModel.from_dict(cfg["source"])


def _ks(cfg) -> list[int]:
    return cfg["k"] if isinstance(cfg["k"], list) else [cfg["k"]]


def _optimizer_params(cfg) -> OptimizerParams:
    return OptimizerParams(
        objective=cfg.get("objective", "mse_min"),
        estimation=EstimationParams(**cfg.get("estimation", {})),
        **cfg.get("optimizer", {}),
    )


def _reporting(cfg) -> EstimationParams:
    return EstimationParams(**{**EstimationParams.reporting().to_dict(), **cfg.get("reporting", {})})


def _init(cfg) -> tuple[str, GeneticParams | None]:
    init = cfg.get("init", {"strategy": "random"})
    genetic = GeneticParams(**init["genetic"]) if "genetic" in init else None
    return init["strategy"], genetic


def _outdir(cfg) -> Path:
    out = Path(cfg.get("outputs", "clvq-out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _recorded(cfg) -> dict:
    # output location is not part of the experiment
    return {k: v for k, v in cfg.items() if k != "outputs"}


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def run_design(cfg: dict, jobs: int = 1) -> list[Path]:
    """Run ``design_multi`` for every k; write reports, summaries and traces."""
    source, params = _source(cfg), _optimizer_params(cfg)
    strategy, genetic = _init(cfg)
    out = _outdir(cfg)
    written = []
    for k in _ks(cfg):
        reports = design_multi(
            source, k, params, strategy, cfg.get("restarts", 1), cfg["seed"],
            genetic=genetic, jobs=jobs, reporting=_reporting(cfg),
        )
        doc = {
            "config": _recorded(cfg),
            "k": k,
            "summary": summarize(reports),
            "reports": [r.to_dict() for r in reports],
        }
        path = out / f"design_k{k}.json"
        path.write_text(_dump(doc))
        written.append(path)
        for r in reports:
            tpath = out / f"trace_k{k}_r{r.restart_index}.csv"
            tpath.write_text(r.trace_csv())
            written.append(tpath)
        log.info("k=%d best MSE %.4f", k, doc["summary"]["best_mse"])
    return written


SWEEP_FIELDS = [
    "d", "k_or_regions", "method", "distortion_best", "distortion_mean",
    "region_count", "restarts", "seed",
]


def _append_rows(path: Path, rows: list[dict]):
    existing = set()
    if path.exists():
        with path.open() as f:
            for r in csv.DictReader(f):
                existing.add((r["d"], r["k_or_regions"], r["method"], r["seed"]))
    new = path.exists()
    with path.open("a", newline="") as f:
        w = csv.DictWriter(f, SWEEP_FIELDS, lineterminator="\n")
        if not new:
            w.writeheader()
        for r in rows:
            key = (str(r["d"]), str(r["k_or_regions"]), r["method"], str(r["seed"]))
            if key not in existing:
                w.writerow(r)
                existing.add(key)


def comparison_rows(cfg: dict, jobs: int = 1) -> tuple[list[dict], list]:
    """Sweep rows for the proposed design and both LBG baselines, per k."""
    source, params = _source(cfg), _optimizer_params(cfg)
    strategy, genetic = _init(cfg)
    lbg = {"T_max": 100, "restarts": 10, "sample_n": 100_000, **cfg.get("lbg", {})}
    seed, d = cfg["seed"], source.dimension
    rows, designs = [], []
    for k in _ks(cfg):
        reports = design_multi(
            source, k, params, strategy, cfg.get("restarts", 1), seed,
            genetic=genetic, jobs=jobs, reporting=_reporting(cfg),
        )
        designs.append((k, reports))
        best = best_report(reports)
        rows.append(_row(d, k, "proposed", [r.final_mse for r in reports], best.region_count, seed))
        lbg_stream = SampleStream(source, derive_seed(seed, 50_000 + k))
        cm = lbg_comparator_matched(source, k, lbg["T_max"], lbg_stream,
                                    restarts=lbg["restarts"], sample_n=lbg["sample_n"])
        rows.append(_row(d, k, "lbg_comparator_matched", cm.restart_mses, cm.M, seed))
        rm_stream = SampleStream(source, derive_seed(seed, 60_000 + k))
        rm = lbg_region_matched(source, best.region_count, lbg["T_max"], rm_stream,
                                restarts=lbg["restarts"], sample_n=lbg["sample_n"])
        rows.append(_row(d, k, "lbg_region_matched", rm.restart_mses, rm.M, seed))
    return rows, designs


def _row(d, k, method, mses, regions, seed) -> dict:
    return {
        "d": d,
        "k_or_regions": k,
        "method": method,
        "distortion_best": repr(float(min(mses))),
        "distortion_mean": repr(float(np.mean(mses))),
        "region_count": regions,
        "restarts": len(mses),
        "seed": seed,
    }


def run_comparison(cfg: dict, jobs: int = 1) -> list[Path]:
    if not isinstance(cfg["k"], list):
        raise ConfigError("invalid config at 'k': compare needs a list of comparator counts")
    out = _outdir(cfg)
    rows, designs = comparison_rows(cfg, jobs)
    path = out / "sweep.csv"
    _append_rows(path, rows)
    written = [path]
    for k, reports in designs:
        p = out / f"compare_design_k{k}_seed{cfg['seed']}.json"
        p.write_text(_dump({"config": _recorded(cfg), "k": k, "summary": summarize(reports),
                            "reports": [r.to_dict() for r in reports]}))
        written.append(p)
    return written


def run_genetic_trace(cfg: dict) -> list[Path]:
    """Per-run and run-averaged genetic traces (distortion per dimension)."""
    strategy, genetic = _init(cfg)
    if strategy != "genetic":
        raise ConfigError("invalid config at 'init.strategy': genetic-trace needs 'genetic'")
    genetic = genetic or GeneticParams()
    source = _source(cfg)
    k = _ks(cfg)[0]
    out = _outdir(cfg)
    oracle = mse_oracle(source, per_dimension=True)
    traces, written = [], []
    for run in range(cfg.get("runs", 2)):
        stream = SampleStream(source, derive_seed(cfg["seed"], 100 * run))
        _, trace = genetic_init(source, k, genetic, oracle, stream)
        traces.append(trace)
        p = out / f"genetic_trace_run{run}.csv"
        p.write_text(trace.to_csv())
        written.append(p)
    best = np.mean([t.best for t in traces], axis=0)
    mean = np.mean([t.mean for t in traces], axis=0)
    lines = ["generation,best_mse,mean_mse"] + [f"{g},{b!r},{m!r}" for g, (b, m) in enumerate(zip(best.tolist(), mean.tolist()))]
    p = out / "genetic_trace_avg.csv"
    p.write_text("\n".join(lines) + "\n")
    written.append(p)
    return written


def _load_report(path: Path) -> DesignReport:
    doc = json.loads(Path(path).read_text())
    if "reports" in doc:
        reports = [DesignReport.from_dict(r) for r in doc["reports"]]
        return best_report(reports)
    return DesignReport.from_dict(doc)


def export_plot_data(
    report: DesignReport | str | Path,
    out: str | Path,
    n_points: int = 5000,
    coords: tuple[int, int] = (0, 1),
    seed: int | None = None,
    boundaries: bool = True,
) -> list[Path]:
    """Labeled sample points, line parameters and (d = 2) the region graph."""
    if not isinstance(report, DesignReport):
        report = _load_report(Path(report))
    arr = report.arrangement
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    if report.source is None:
        raise ValueError("report does not record its source model")
    if max(coords) >= arr.d or min(coords) < 0 or coords[0] == coords[1]:
        raise ValueError(f"bad coordinate pair {coords} for d={arr.d}")
    if boundaries and arr.d != 2:
        raise ValueError(f"boundary export needs d = 2, got d = {arr.d}")
    seed = derive_seed(report.seed, 8) if seed is None else seed
    X = SampleStream(report.source, seed).sample(n_points)
    codes = label_codes(arr, X)
    written = []
    p = out / "points.csv"
    with p.open("w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["x", "y", "label"])
        for x, c in zip(X, codes):
            w.writerow([repr(float(x[coords[0]])), repr(float(x[coords[1]])), label_string(code_to_label(c, arr.k))])
    written.append(p)
    if boundaries:
        p = out / "boundaries.csv"
        with p.open("w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["hyperplane", "v1", "v2", "t"])
            for j in range(arr.k):
                w.writerow([j, repr(float(arr.weights[j, 0])), repr(float(arr.weights[j, 1])), repr(float(arr.offsets[j]))])
        written.append(p)
        g = build_region_graph(arr)
        p = out / "region_graph.json"
        p.write_text(g.to_json() + "\n")
        written.append(p)
        p = out / "region_graph.dot"
        p.write_text(g.to_dot())
        written.append(p)
    return written


def bounds_table(max_d: int = 4, max_k: int = 8) -> str:
    lines = ["# max regions, n affine hyperplanes in R^m", "m\\n " + " ".join(f"{n:>5}" for n in range(1, max_k + 1))]
    for m in range(1, max_d + 1):
        lines.append(f"{m:>4} " + " ".join(f"{max_regions(m, n):>5}" for n in range(1, max_k + 1)))
    lines += ["", "# max regions, n central hyperplanes in R^m", "m\\n " + " ".join(f"{n:>5}" for n in range(1, max_k + 1))]
    for m in range(1, max_d + 1):
        lines.append(f"{m:>4} " + " ".join(f"{max_regions_central(n, m):>5}" for n in range(1, max_k + 1)))
    lines += ["", "# max regions, l directions x 2 parallel copies in R^m", "m\\l " + " ".join(f"{n:>5}" for n in range(1, max_k + 1))]
    for m in range(1, max_d + 1):
        lines.append(f"{m:>4} " + " ".join(f"{max_regions_parallel(m, n, 2):>5}" for n in range(1, max_k + 1)))
    return "\n".join(lines) + "\n"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clvq", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("design", "design comparator arrangements"),
        ("compare", "sweep k against the LBG baselines"),
        ("genetic-trace", "record genetic pre-optimizer traces"),
    ]:
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="experiment config JSON")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="override the output directory")
        p.add_argument("--jobs", type=int, default=1, help="parallel restarts")
    p = sub.add_parser("export-plots", help="export plot data from a report")
    p.add_argument("--report", required=True, help="design report JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--points", type=int, default=5000)
    p.add_argument("--coords", default="0,1", help="coordinate pair for the points file")
    p.add_argument("--seed", type=int)
    p.add_argument("--no-boundaries", action="store_true", help="points only (any d)")
    p = sub.add_parser("bounds", help="print region-count tables")
    p.add_argument("--max-d", type=int, default=4)
    p.add_argument("--max-k", type=int, default=8)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        if args.command == "bounds":
            sys.stdout.write(bounds_table(args.max_d, args.max_k))
            return 0
        if args.command == "export-plots":
            coords = tuple(int(c) for c in args.coords.split(","))
            paths = export_plot_data(args.report, args.out, args.points, coords, args.seed,
                                     boundaries=not args.no_boundaries)
        else:
            cfg = load_config(args.config, args.seed, args.out)
            if args.command == "design":
                paths = run_design(cfg, args.jobs)
            elif args.command == "compare":
                paths = run_comparison(cfg, args.jobs)
            else:
                paths = run_genetic_trace(cfg)
    except (ConfigError, ValueError, FileNotFoundError) as e:
        print(f"clvq {args.command}: error: {e}", file=sys.stderr)
        return 2
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
