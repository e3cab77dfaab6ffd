"""Command-line interface and config-driven experiment runner.

Subcommands: gen-data, build-graph, lund, land, bench, scan-t, purity.
Exit codes: 0 success, 2 config error, 3 data error, 4 numerical failure.

Config files are flat `key = value` text; any CLI flag overrides the
matching config key.  All randomness descends from a single root seed,
split deterministically per (method, trial).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
import warnings

import numpy as np

from . import __version__
from .baselines import cbal, cut_sequence, land_random, linkage
from .datagen import gen_bottleneck, gen_gaussians, gen_geometric, gen_hierarchical
from .dataset import (
    DataError,
    PointCloud,
    load_csv,
    load_hsi_cube,
    load_hsi_header,
    load_labels,
    save_csv,
    save_labels,
)
from .geometry import save_mode_scores_csv
from .graph import NumericalError
from .land import BudgetExceededError, GroundTruthOracle, InteractiveOracle, land
from .lund import estimate_num_clusters, lund, lund_k, separation_diagnostics
from .metrics import align_labels, average_accuracy, cohens_kappa, overall_accuracy, purity
from .pipeline import DiffusionModel, build_model, log_t_grid


class ConfigError(Exception):
    """Bad configuration keys or values."""


GENERATORS = ("gaussians", "hierarchical", "geometric", "bottleneck")
METHODS = ("land", "land-random", "cbal", "lund")

CONFIG_KEYS = {
    "dataset": str,          # generator name or points CSV path
    "truth": str,            # labels path (file datasets)
    "data_seed": int,
    "sizes": str,            # comma-separated component sizes
    "per_cluster": int,
    "stddev": float,
    "means": str,            # semicolon-separated vectors for gaussians
    "k": int,
    "sigma": float,
    "sigma0": float,
    "num_eigs": int,
    "t": str,                # diffusion time or "auto"
    "budgets": str,          # comma-separated budgets
    "methods": str,          # comma-separated subset of METHODS
    "trials": int,           # number of trial seeds for randomized methods
    "root_seed": int,
    "cbal_theta": float,
    "cbal_sample_size": int,
    "out": str,
    "cache": str,
}

DEFAULT_CONFIG = {
    "dataset": "gaussians",
    "data_seed": 0,
    "t": "auto",
    "budgets": "10",
    "methods": "land",
    "trials": 1,
    "root_seed": 0,
    "cbal_theta": 0.9,
    "cbal_sample_size": 3,
}

AUTO_T_GRID = (0.0, 6.0, 0.5)  # log10 bounds and step for the automatic t scan


def parse_config(path) -> dict:
    if not os.path.exists(path):
        raise ConfigError(f"no such config file: {path}")
    cfg: dict = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}: line {lineno} is not `key = value`")
            key, value = (part.strip() for part in line.split("=", 1))
            cfg[key] = value
    return coerce_config(cfg)


def coerce_config(raw: dict) -> dict:
    cfg = dict(DEFAULT_CONFIG)
    for key, value in raw.items():
        if value is None:
            continue
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        caster = CONFIG_KEYS[key]
        try:
            cfg[key] = caster(value)
        except (TypeError, ValueError):
            raise ConfigError(f"config key {key!r} has bad value {value!r}") from None
    return cfg


def _parse_int_list(text: str, what: str) -> list[int]:
    try:
        return [int(part) for part in str(text).split(",") if part.strip() != ""]
    except ValueError:
        raise ConfigError(f"bad {what} list: {text!r}") from None


def _sha256_of(arr: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(arr).tobytes()).hexdigest()


def resolve_dataset(cfg: dict) -> tuple[PointCloud, np.ndarray, str]:
    """Generator datasets come with truth; file datasets need a truth path."""
    name = cfg["dataset"]
    seed = cfg.get("data_seed", 0)
    if name == "gaussians":
        if "means" in cfg:
            means = [
                [float(v) for v in vec.split(",")]
                for vec in str(cfg["means"]).split(";")
            ]
        else:
            means = [[0.0, 0.0], [5.0, 0.0], [2.5, 4.33]]
        sizes = _parse_int_list(cfg.get("sizes", ",".join("500" for _ in means)), "sizes")
        cloud, truth = gen_gaussians(means, cfg.get("stddev", 0.5), sizes, seed)
    elif name == "hierarchical":
        cloud, truth, _ = gen_hierarchical(
            seed, cfg.get("per_cluster", 500), cfg.get("stddev", 0.2)
        )
    elif name == "geometric":
        sizes = _parse_int_list(cfg.get("sizes", "500,500,500"), "sizes")
        cloud, truth = gen_geometric(seed, sizes)
    elif name == "bottleneck":
        sizes = _parse_int_list(cfg.get("sizes", "700,700,60"), "sizes")
        cloud, truth = gen_bottleneck(seed, sizes)
    else:
        cloud = load_csv(name)
        if "truth" not in cfg:
            raise ConfigError("file datasets need a `truth` labels path")
        truth = load_labels(cfg["truth"])
        if truth.shape[0] != cloud.n:
            raise DataError(
                f"truth has {truth.shape[0]} labels for {cloud.n} points"
            )
        name = os.path.basename(str(name))
    return cloud, truth, name


def build_model_from_config(cfg: dict, cloud: PointCloud) -> DiffusionModel:
    return build_model(
        cloud,
        k=cfg.get("k"),
        sigma=cfg.get("sigma"),
        sigma0=cfg.get("sigma0"),
        num_eigs=cfg.get("num_eigs"),
        cache_dir=cfg.get("cache"),
    )


def choose_time(model: DiffusionModel, cfg: dict, num_classes: int) -> float:
    """Resolve the diffusion time: explicit value, or the K-matching scan.

    "auto" scans a log10 grid and picks the median time whose estimated
    cluster count equals num_classes (no labels are consulted).
    """
    raw = cfg.get("t", "auto")
    if str(raw).lower() != "auto":
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"bad diffusion time {raw!r}") from None
    grid = log_t_grid(*AUTO_T_GRID)
    matches = []
    for t in grid:
        try:
            _, scores = model.scores_at(t)
            if estimate_num_clusters(scores) == num_classes:
                matches.append(t)
        except ValueError:
            continue
    if matches:
        return float(matches[len(matches) // 2])
    return float(grid[len(grid) // 2])


def _trial_seed(root_seed: int, method: str, trial: int) -> int:
    ss = np.random.SeedSequence([int(root_seed), METHODS.index(method), int(trial)])
    return int(ss.generate_state(1)[0])


def run_experiment(cfg: dict, out_dir) -> tuple[str, str]:
    """Run the configured methods over the budget grid; emit CSV + manifest.

    Returns (results_csv_path, manifest_path).  Rows are sorted before
    writing and contain no timestamps, so reruns are byte-identical.
    """
    methods = [m.strip() for m in str(cfg["methods"]).split(",") if m.strip()]
    for m in methods:
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r}; known: {METHODS}")
    budgets = _parse_int_list(cfg["budgets"], "budgets")
    trials = int(cfg["trials"])
    if trials < 1:
        raise ConfigError("trials must be at least 1")

    cloud, truth, dataset_name = resolve_dataset(cfg)
    model = build_model_from_config(cfg, cloud)
    num_classes = int(np.unique(truth[truth > 0]).size)
    t = choose_time(model, cfg, num_classes)
    emb, scores = model.scores_at(t)

    dend = None
    if "cbal" in methods:
        dend = linkage(cloud, "average")

    rows: list[tuple] = []

    def add_row(method: str, budget_or_level, trial: int, pred: np.ndarray) -> None:
        rows.append(
            (
                dataset_name,
                method,
                int(budget_or_level),
                int(trial),
                overall_accuracy(pred, truth),
                average_accuracy(pred, truth),
                cohens_kappa(pred, truth),
            )
        )

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for method in methods:
            if method == "lund":
                result = lund(scores, model.density, emb)
                add_row("lund", result.num_clusters, 0, align_labels(result.labels, truth))
                continue
            for budget in budgets:
                if method == "land":
                    oracle = GroundTruthOracle(truth, budget)
                    result = land(scores, model.density, emb, budget, oracle)
                    add_row("land", budget, 0, result.labels)
                elif method == "land-random":
                    for trial in range(trials):
                        oracle = GroundTruthOracle(truth, budget)
                        result = land_random(
                            model.density,
                            emb,
                            budget,
                            oracle,
                            seed=_trial_seed(cfg["root_seed"], method, trial),
                            nearest_higher=scores.nearest_higher,
                        )
                        add_row("land-random", budget, trial, result.labels)
                elif method == "cbal":
                    for trial in range(trials):
                        oracle = GroundTruthOracle(truth, budget)
                        result = cbal(
                            dend,
                            budget,
                            oracle,
                            purity_threshold=cfg["cbal_theta"],
                            sample_size=cfg["cbal_sample_size"],
                            seed=_trial_seed(cfg["root_seed"], method, trial),
                        )
                        add_row("cbal", budget, trial, result.labels)

    rows.sort()
    os.makedirs(out_dir, exist_ok=True)
    results_path = os.path.join(out_dir, "results.csv")
    with open(results_path, "w", encoding="utf-8") as fh:
        fh.write("dataset,method,budget_or_level,seed,oa,aa,kappa\n")
        for row in rows:
            fh.write(
                f"{row[0]},{row[1]},{row[2]},{row[3]},{row[4]!r},{row[5]!r},{row[6]!r}\n"
            )

    manifest = {
        "version": __version__,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "config": {k: cfg[k] for k in sorted(cfg)},
        "resolved": {
            "n": cloud.n,
            "dim": cloud.dim,
            "k": model.neighbors.k,
            "sigma": model.sigma,
            "num_eigs": model.spectrum.num_eigs,
            "t": t,
            "num_classes": num_classes,
            "points_sha256": _sha256_of(cloud.points),
            "truth_sha256": _sha256_of(truth),
        },
    }
    manifest_path = os.path.join(out_dir, "manifest.json")
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return results_path, manifest_path


def scan_t(cfg: dict, cloud: PointCloud, truth: np.ndarray | None,
           grid_log10: tuple[float, float, float], out_path) -> str:
    """Per-t cluster-count estimates (plus separation stats when truth given)."""
    model = build_model_from_config(cfg, cloud)
    grid = log_t_grid(*grid_log10)
    with open(out_path, "w", encoding="utf-8") as fh:
        top_cols = ",".join(f"score_{i}" for i in range(1, 11))
        fh.write(f"t_log10,k_hat,d_in,d_btw,{top_cols}\n")
        for t in grid:
            log10_t = float(np.log10(t))
            try:
                emb, scores = model.scores_at(t)
                k_hat = str(estimate_num_clusters(scores))
            except ValueError as exc:
                warnings.warn(f"scan skipped t=10^{log10_t:g}: {exc}", stacklevel=2)
                fh.write(f"{log10_t!r},,,," + "," * 9 + "\n")
                continue
            d_in = d_btw = ""
            if truth is not None:
                diag = separation_diagnostics(emb, model.density, truth)
                d_in, d_btw = repr(diag.d_in), repr(diag.d_btw)
            top = scores.score[scores.order[:10]]
            top_txt = ",".join(repr(float(v)) for v in top)
            if top.shape[0] < 10:
                top_txt += "," * (10 - top.shape[0])
            fh.write(f"{log10_t!r},{k_hat},{d_in},{d_btw},{top_txt}\n")
    return str(out_path)


# ---------------------------------------------------------------------------
# subcommand handlers
# ---------------------------------------------------------------------------

def _cfg_from_args(args) -> dict:
    """Config file (or defaults) with any provided CLI flags layered on top."""
    cfg = parse_config(args.config) if getattr(args, "config", None) else dict(DEFAULT_CONFIG)
    for key, caster in CONFIG_KEYS.items():
        value = getattr(args, key, None)
        if value is None:
            continue
        try:
            cfg[key] = caster(value)
        except (TypeError, ValueError):
            raise ConfigError(f"flag --{key.replace('_', '-')} has bad value {value!r}") from None
    return cfg


def _add_graph_flags(sub) -> None:
    sub.add_argument("--k", type=int, help="graph neighbors (default max(20, log2 n))")
    sub.add_argument("--sigma", type=float, help="kernel bandwidth (default mean k-th NN distance)")
    sub.add_argument("--sigma0", type=float, help="density bandwidth (default sigma)")
    sub.add_argument("--num-eigs", type=int, help="retained eigenpairs (default 25)")
    sub.add_argument("--cache", help="directory for neighbor/spectrum caching")


def _load_cloud(args) -> PointCloud:
    if getattr(args, "hsi_header", None):
        return load_hsi_cube(args.data, load_hsi_header(args.hsi_header),
                             standardize=getattr(args, "standardize", False))
    return load_csv(args.data)


def cmd_gen_data(args) -> int:
    cfg = _cfg_from_args(args)
    if cfg["dataset"] not in GENERATORS:
        raise ConfigError(f"gen-data needs a generator dataset, got {cfg['dataset']!r}")
    os.makedirs(args.out, exist_ok=True)
    if cfg["dataset"] == "hierarchical":
        cloud, truth4, truth2 = gen_hierarchical(
            cfg["data_seed"], cfg.get("per_cluster", 500), cfg.get("stddev", 0.2)
        )
        save_labels(os.path.join(args.out, "truth_coarse.txt"), truth2)
        truth = truth4
    else:
        cloud, truth, _ = resolve_dataset(cfg)
    save_csv(os.path.join(args.out, "points.csv"), cloud)
    save_labels(os.path.join(args.out, "truth.txt"), truth)
    manifest = {
        "dataset": cfg["dataset"],
        "params": {
            k: cfg[k]
            for k in ("data_seed", "sizes", "per_cluster", "stddev", "means")
            if k in cfg
        },
        "n": cloud.n,
        "dim": cloud.dim,
        "points_sha256": _sha256_of(cloud.points),
    }
    with open(os.path.join(args.out, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {cloud.n} points to {args.out}")
    return 0


def cmd_build_graph(args) -> int:
    cfg = _cfg_from_args(args)
    cloud = _load_cloud(args)
    model = build_model_from_config(cfg, cloud)
    lam = model.spectrum.eigenvalues
    print(f"n={model.n} dim={cloud.dim} k={model.neighbors.k} sigma={model.sigma:.6g}")
    print(f"eigenvalues ({model.spectrum.num_eigs}): "
          + " ".join(f"{v:.6f}" for v in lam[: min(10, lam.size)]))
    return 0


def _prepare_scores(args, cfg):
    cloud = _load_cloud(args)
    truth = load_labels(args.truth) if getattr(args, "truth", None) else None
    model = build_model_from_config(cfg, cloud)
    if str(cfg.get("t", "auto")).lower() == "auto":
        if truth is None:
            raise ConfigError("--t auto needs --truth to count classes")
        t = choose_time(model, cfg, int(np.unique(truth[truth > 0]).size))
    else:
        t = float(cfg["t"])
    emb, scores = model.scores_at(t)
    return cloud, truth, model, t, emb, scores


def cmd_lund(args) -> int:
    cfg = _cfg_from_args(args)
    cloud, truth, model, t, emb, scores = _prepare_scores(args, cfg)
    result = (
        lund_k(scores, model.density, emb, args.num_clusters)
        if args.num_clusters
        else lund(scores, model.density, emb)
    )
    save_labels(args.out, result.labels)
    if args.scores_out:
        save_mode_scores_csv(args.scores_out, scores, model.density)
    print(f"t={t:.6g} clusters={result.num_clusters} wrote {args.out}")
    if truth is not None:
        aligned = align_labels(result.labels, truth)
        print(f"OA={overall_accuracy(aligned, truth):.4f} "
              f"AA={average_accuracy(aligned, truth):.4f} "
              f"kappa={cohens_kappa(aligned, truth):.4f}")
    return 0


def cmd_land(args) -> int:
    cfg = _cfg_from_args(args)
    cloud, truth, model, t, emb, scores = _prepare_scores(args, cfg)
    if args.interactive:
        oracle = InteractiveOracle(args.budget, points=cloud.points)
    else:
        if truth is None:
            raise ConfigError("batch mode needs --truth (or use --interactive)")
        oracle = GroundTruthOracle(truth, args.budget)
    result = land(scores, model.density, emb, args.budget, oracle)
    save_labels(args.out, result.labels)
    print(f"t={t:.6g} queried={result.queries_used} wrote {args.out}")
    if truth is not None:
        print(f"OA={overall_accuracy(result.labels, truth):.4f} "
              f"AA={average_accuracy(result.labels, truth):.4f} "
              f"kappa={cohens_kappa(result.labels, truth):.4f}")
        missing = np.setdiff1d(np.unique(truth[truth > 0]), result.observed_classes())
        if missing.size:
            print(f"classes never observed by the oracle: {missing.tolist()}")
    return 0


def cmd_bench(args) -> int:
    cfg = _cfg_from_args(args)
    out_dir = args.out or cfg.get("out") or "bench_out"
    results, manifest = run_experiment(cfg, out_dir)
    print(f"wrote {results} and {manifest}")
    return 0


def _parse_grid(text: str) -> tuple[float, float, float]:
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"grid must be start:stop:step in log10, got {text!r}")
    try:
        return float(parts[0]), float(parts[1]), float(parts[2])
    except ValueError:
        raise ConfigError(f"bad grid {text!r}") from None


def cmd_scan_t(args) -> int:
    cfg = _cfg_from_args(args)
    if args.data:
        cloud = load_csv(args.data)
        truth = load_labels(args.truth) if args.truth else None
        if truth is not None and truth.shape[0] != cloud.n:
            raise DataError(f"truth has {truth.shape[0]} labels for {cloud.n} points")
    else:
        cloud, truth, _ = resolve_dataset(cfg)
    path = scan_t(cfg, cloud, truth, _parse_grid(args.t_grid), args.out)
    print(f"wrote {path}")
    return 0


def cmd_purity(args) -> int:
    cfg = _cfg_from_args(args)
    cloud, truth, model, t, emb, scores = _prepare_scores(args, cfg)
    if truth is None:
        raise ConfigError("purity needs --truth")
    levels = list(range(1, args.levels + 1))
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("level,purity,method\n")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            for ell in levels:
                value = purity(lund_k(scores, model.density, emb, ell).labels, truth)
                fh.write(f"{ell},{value!r},lund\n")
        for method in ("single", "average"):
            dend = linkage(cloud, method)
            for ell, labels in zip(levels, cut_sequence(dend, levels)):
                fh.write(f"{ell},{purity(labels, truth)!r},{method}\n")
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diffal",
        description="Diffusion-geometry active learning and clustering",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write a synthetic dataset")
    p.add_argument("--dataset", choices=GENERATORS, required=True)
    p.add_argument("--data-seed", type=int, dest="data_seed")
    p.add_argument("--seed", type=int, dest="data_seed")
    p.add_argument("--sizes")
    p.add_argument("--per-cluster", type=int, dest="per_cluster")
    p.add_argument("--stddev", type=float)
    p.add_argument("--means")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("build-graph", help="build and summarize the diffusion graph")
    p.add_argument("--data", required=True)
    p.add_argument("--hsi-header", help="treat --data as a raw cube with this header")
    p.add_argument("--standardize", action="store_true")
    _add_graph_flags(p)
    p.set_defaults(func=cmd_build_graph)

    p = sub.add_parser("lund", help="unsupervised labeling")
    p.add_argument("--data", required=True)
    p.add_argument("--hsi-header")
    p.add_argument("--standardize", action="store_true")
    p.add_argument("--truth")
    p.add_argument("--t")
    p.add_argument("--num-clusters", type=int)
    p.add_argument("--scores-out")
    p.add_argument("--out", required=True)
    _add_graph_flags(p)
    p.set_defaults(func=cmd_lund)

    p = sub.add_parser("land", help="active labeling with an oracle")
    p.add_argument("--data", required=True)
    p.add_argument("--hsi-header")
    p.add_argument("--standardize", action="store_true")
    p.add_argument("--truth")
    p.add_argument("--interactive", action="store_true")
    p.add_argument("--budget", type=int, required=True)
    p.add_argument("--t")
    p.add_argument("--out", required=True)
    _add_graph_flags(p)
    p.set_defaults(func=cmd_land)

    p = sub.add_parser("bench", help="config-driven experiment over budgets/methods")
    p.add_argument("--config")
    p.add_argument("--dataset")
    p.add_argument("--truth")
    p.add_argument("--budgets")
    p.add_argument("--methods")
    p.add_argument("--method", dest="methods")
    p.add_argument("--trials", type=int)
    p.add_argument("--root-seed", type=int, dest="root_seed")
    p.add_argument("--seed", type=int, dest="root_seed")
    p.add_argument("--data-seed", type=int, dest="data_seed")
    p.add_argument("--t")
    p.add_argument("--out")
    _add_graph_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("scan-t", help="cluster-count estimates over a log10 time grid")
    p.add_argument("--config")
    p.add_argument("--data")
    p.add_argument("--dataset")
    p.add_argument("--truth")
    p.add_argument("--data-seed", type=int, dest="data_seed")
    p.add_argument("--t-grid", default="0:8:0.5")
    p.add_argument("--out", required=True)
    _add_graph_flags(p)
    p.set_defaults(func=cmd_scan_t)

    p = sub.add_parser("purity", help="purity curves for lund and linkage cuts")
    p.add_argument("--data", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--t")
    p.add_argument("--levels", type=int, default=40)
    p.add_argument("--out", required=True)
    _add_graph_flags(p)
    p.set_defaults(func=cmd_purity)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, BudgetExceededError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
