"""Command line interface.

Subcommands: ingest, fit, evaluate, sweep, synth. Options can come from a
YAML config file (--config) and individual flags; flags win. Exit codes:
0 success, 1 usage or configuration error, 2 data error, 3 infeasible model.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, fields

import yaml

from .assignment import build_table
from .bundle import Bundle, load_bundle, save_bundle
from .clustering import ClusterStrategy, Level, fit_clusters
from .errors import ConfigError, DataError, FpClusterError, ModelError
from .evaluation import (
    SweepGrid,
    SweepSettings,
    evaluate_many,
    summarize,
    sweep,
    write_cdf_svg,
    write_per_sample_csv,
    write_report_json,
    write_summary_csv,
)
from .ingest import SCHEMA_PRESETS, RadioMap, load_csv, resolve_schema, save_csv
from .localisation import KnnConfig, Pipeline, Variant
from .synth import SynthSpec, synth_radio_map
from .transform import (
    DEFAULT_EXPONENT,
    DEFAULT_FLOOR_HEIGHT,
    FeatureSpace,
    PowedConfig,
    Representation,
)


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on usage errors; this package reserves 2 for
    # data errors, so usage problems are funnelled into ConfigError instead.
    def error(self, message):
        raise ConfigError(message)


@dataclass
class RunConfig:
    """Merged configuration of one command: defaults, then config file, then flags."""

    train: str | None = None
    test: str | None = None
    dataset: str | None = None
    schema: str = "synthetic"
    bundle: str | None = None
    level: str = Level.BUILDING.value
    space: str = FeatureSpace.RSSI.value
    k_clusters: int = 2
    n_aps: int = 3
    knn_k: str = "5"
    variant: str = Variant.WKNN.value
    representation: str = Representation.POWED.value
    exponent: float = DEFAULT_EXPONENT
    floor_height: float = DEFAULT_FLOOR_HEIGHT
    seed: int = 0
    jobs: int = 0  # 0 = logical cores
    out: str | None = None
    routing: str = "truth"
    baseline: bool = False
    plot: bool = False
    grid: dict | None = None

    def knn_k_list(self) -> list[int]:
        try:
            ks = [int(v) for v in str(self.knn_k).split(",") if str(v).strip()]
        except ValueError:
            raise ConfigError(f"--knn-k expects an integer or comma list, got {self.knn_k!r}") from None
        if not ks:
            raise ConfigError("--knn-k names no neighbour count")
        return ks

    def effective_jobs(self) -> int:
        return self.jobs if self.jobs > 0 else (os.cpu_count() or 1)


def _merge_config(args: argparse.Namespace) -> RunConfig:
    merged: dict = {}
    config_path = getattr(args, "config", None)
    if config_path:
        try:
            with open(config_path, "r", encoding="utf-8") as fh:
                loaded = yaml.safe_load(fh) or {}
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {config_path}") from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"config file {config_path}: {exc}") from None
        if not isinstance(loaded, dict):
            raise ConfigError(f"config file {config_path} must hold a mapping")
        known = {f.name for f in fields(RunConfig)}
        unknown = set(loaded) - known
        if unknown:
            raise ConfigError(f"config file {config_path} has unknown keys: {sorted(unknown)}")
        merged.update(loaded)
    for f in fields(RunConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            merged[f.name] = value
    try:
        return RunConfig(**merged)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def _require_file(path: str | None, what: str) -> str:
    if not path:
        raise ConfigError(f"no {what} given (flag or config key)")
    if not os.path.exists(path):
        raise DataError(f"{what} not found: {path}")
    return path


def _resolve_dataset(cfg: RunConfig, need_test: bool) -> tuple[str, str | None]:
    """Train/test CSV paths from --train/--test, or from a --dataset directory."""
    train, test = cfg.train, cfg.test
    if cfg.dataset:
        if os.path.isdir(cfg.dataset):
            candidates = [("train.csv", "test.csv"), ("trainingData.csv", "validationData.csv")]
            for tr, te in candidates:
                tr_p = os.path.join(cfg.dataset, tr)
                te_p = os.path.join(cfg.dataset, te)
                if os.path.exists(tr_p):
                    train = train or tr_p
                    test = test or (te_p if os.path.exists(te_p) else None)
                    break
            else:
                raise DataError(f"no train CSV found under dataset directory {cfg.dataset}")
        else:
            train = train or cfg.dataset
    train = _require_file(train, "training CSV")
    if test is not None:
        test = _require_file(test, "test CSV")
    elif need_test:
        raise ConfigError("no test CSV given (flag --test, config key, or dataset directory)")
    return train, test


def _load_maps(cfg: RunConfig, need_test: bool) -> tuple[RadioMap, RadioMap | None]:
    schema = resolve_schema(cfg.schema)
    train_path, test_path = _resolve_dataset(cfg, need_test)
    train = load_csv(train_path, schema, partition="train")
    test = load_csv(test_path, schema, partition="test") if test_path else None
    return train, test


def _pcfg_for(train: RadioMap, cfg: RunConfig) -> PowedConfig:
    return PowedConfig(exponent=cfg.exponent, min=train.global_min)


def cmd_ingest(cfg: RunConfig) -> int:
    schema = resolve_schema(cfg.schema)
    train, test = _load_maps(cfg, need_test=False)
    print(f"APs: {train.ap_count}, train: {len(train)}" + (f", test: {len(test)}" if test else ""))
    print(f"buildings: {list(train.buildings())}, floors: {list(train.floors())}")
    print(f"global_min: {train.global_min} dBm (training minimum detected reading - 1)")
    if cfg.out:
        os.makedirs(cfg.out, exist_ok=True)
        save_csv(train, os.path.join(cfg.out, "train.csv"), schema)
        if test is not None:
            save_csv(test, os.path.join(cfg.out, "test.csv"), schema)
        print(f"canonical re-export written under {cfg.out}")
    return 0


def cmd_fit(cfg: RunConfig) -> int:
    train, _ = _load_maps(cfg, need_test=False)
    pcfg = _pcfg_for(train, cfg)
    strategy = ClusterStrategy(
        level=Level(cfg.level), space=FeatureSpace(cfg.space), k=cfg.k_clusters, seed=cfg.seed
    )
    model = fit_clusters(train, strategy, pcfg, floor_height=cfg.floor_height)
    table = build_table(model, train, cfg.n_aps)
    out = cfg.out or "model.json"
    save_bundle(
        Bundle(model=model, table=table, pcfg=pcfg, floor_height=cfg.floor_height, sentinel=train.sentinel),
        out,
    )
    print(
        f"fitted {model.cluster_count} clusters over {len(model.scopes)} scope(s) "
        f"in {model.creation_ms:.1f} ms; table rows: {len(table.rows)} (n={table.n}), "
        f"built in {table.build_ms:.1f} ms"
    )
    print(f"bundle written to {out}")
    return 0


def _knn_cfgs_from(cfg: RunConfig) -> list[KnnConfig]:
    return [
        KnnConfig(k=k, variant=Variant(cfg.variant), representation=Representation(cfg.representation))
        for k in cfg.knn_k_list()
    ]


def cmd_evaluate(cfg: RunConfig) -> int:
    train, test = _load_maps(cfg, need_test=True)
    if cfg.baseline:
        pcfg = _pcfg_for(train, cfg)
        model, table = None, None
        floor_height = cfg.floor_height
    else:
        bundle_path = _require_file(cfg.bundle, "model bundle")
        bundle = load_bundle(bundle_path)
        pcfg, model, table = bundle.pcfg, bundle.model, bundle.table
        floor_height = bundle.floor_height
    cfgs = _knn_cfgs_from(cfg)
    pipeline = Pipeline(
        train, pcfg, cfgs[0], model, table, floor_height=floor_height, routing=cfg.routing
    )
    reports = evaluate_many(test, pipeline, cfgs)
    out_dir = cfg.out
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    for knn_cfg, report in zip(cfgs, reports):
        tag = f"{knn_cfg.variant.value}_k{knn_cfg.k}"
        print(
            f"[{tag}] mean_e2d={report.mean_e2d:.3f} p50={report.p50_e2d:.3f} "
            f"p95={report.p95_e2d:.3f} fdr={report.fdr:.4f} "
            f"(evaluated {report.evaluated_count}, undetectable {report.undetectable_count}, "
            f"fallbacks {report.zero_score_fallbacks})"
        )
        if out_dir:
            write_report_json(report, os.path.join(out_dir, f"report_{tag}.json"))
            write_per_sample_csv(report, os.path.join(out_dir, f"samples_{tag}.csv"))
            if cfg.plot:
                write_cdf_svg(report, os.path.join(out_dir, f"cdf_{tag}.svg"))
    if out_dir:
        print(f"reports written under {out_dir}")
    return 0


def _grid_from(cfg: RunConfig) -> SweepGrid:
    raw = cfg.grid or {}
    unknown = set(raw) - {
        "levels", "spaces", "n_values", "k_clusters", "knn_ks", "variants", "include_baseline",
    }
    if unknown:
        raise ConfigError(f"grid has unknown keys: {sorted(unknown)}")
    try:
        return SweepGrid(
            levels=tuple(Level(v) for v in raw.get("levels", [cfg.level])),
            spaces=tuple(FeatureSpace(v) for v in raw.get("spaces", ["xyz", "rssi"])),
            n_values=tuple(int(v) for v in raw.get("n_values", [1, 2, 3, 4, 5])),
            k_clusters=tuple(int(v) for v in raw.get("k_clusters", [cfg.k_clusters])),
            knn_ks=tuple(int(v) for v in raw.get("knn_ks", [1, 3, 5, 7, 9, 11, 13])),
            variants=tuple(Variant(v) for v in raw.get("variants", ["knn", "wknn", "wknn-t"])),
            include_baseline=bool(raw.get("include_baseline", True)),
        )
    except ValueError as exc:
        raise ConfigError(f"bad grid value: {exc}") from None


def cmd_sweep(cfg: RunConfig) -> int:
    train, test = _load_maps(cfg, need_test=True)
    grid = _grid_from(cfg)
    settings = SweepSettings(
        exponent=cfg.exponent,
        floor_height=cfg.floor_height,
        seed=cfg.seed,
        representation=Representation(cfg.representation),
        routing=cfg.routing,
    )
    result = sweep(train, test, grid, settings, jobs=cfg.effective_jobs())
    rows = summarize(result)
    out_dir = cfg.out or "sweep-out"
    os.makedirs(out_dir, exist_ok=True)
    write_summary_csv(rows, os.path.join(out_dir, "summary.csv"))
    reports_dir = os.path.join(out_dir, "reports")
    os.makedirs(reports_dir, exist_ok=True)
    for i, report in enumerate(result.reports):
        c = report.config
        tag = (
            f"{i:04d}_{'baseline' if c['baseline'] else c['level']}"
            f"_{c.get('space') or 'none'}_K{c.get('k_clusters') or 0}"
            f"_N{c.get('n_aps') or 0}_{c['variant']}_k{c['knn_k']}"
        )
        write_report_json(report, os.path.join(reports_dir, f"{tag}.json"), include_samples=False)
    if result.skipped:
        with open(os.path.join(out_dir, "skipped.csv"), "w", encoding="utf-8") as fh:
            fh.write("level,space,k_clusters,reason\n")
            for s in result.skipped:
                fh.write(f"{s['level']},{s['space']},{s['k_clusters']},\"{s['reason']}\"\n")
    print(f"{len(result.reports)} reports, {len(result.skipped)} skipped combination(s)")
    for row in rows:
        print(
            f"{row['variant']:7s} level={row['level']} {row['group']:8s} "
            f"N={row['n_aps']} K={row['k_clusters']} k={row['knn_k']} "
            f"mean_e2d={row['mean_e2d']:.3f} fdr={row['fdr']:.4f}"
        )
    print(f"summary written to {os.path.join(out_dir, 'summary.csv')}")
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    spec = SynthSpec(
        buildings=args.buildings,
        floors=args.floors,
        floor_height=args.floor_height,
        aps_per_floor=args.aps_per_floor,
        train_per_floor=args.train_per_floor,
        test_per_floor=args.test_per_floor,
        p0=args.p0,
        gamma=args.gamma,
        sigma=args.sigma,
        floor_atten=args.floor_atten,
        threshold=args.threshold,
    )
    train, test = synth_radio_map(spec, seed=args.seed)
    out = args.out or "synth-out"
    os.makedirs(out, exist_ok=True)
    schema = SCHEMA_PRESETS["synthetic"]
    save_csv(train, os.path.join(out, "train.csv"), schema)
    save_csv(test, os.path.join(out, "test.csv"), schema)
    with open(os.path.join(out, "schema.yaml"), "w", encoding="utf-8") as fh:
        yaml.safe_dump(
            {
                "name": schema.name,
                "ap_prefix": schema.ap_prefix,
                "x_col": schema.x_col,
                "y_col": schema.y_col,
                "floor_col": schema.floor_col,
                "building_col": schema.building_col,
                "id_col": schema.id_col,
                "sentinel": schema.sentinel,
            },
            fh,
        )
    print(
        f"synthetic map: {train.ap_count} APs, {len(train)} train / {len(test)} test fingerprints, "
        f"{spec.buildings} building(s) x {spec.floors} floor(s); written under {out}"
    )
    return 0


def _add_common(p: argparse.ArgumentParser, *names: str) -> None:
    opts = {
        "config": lambda: p.add_argument("--config", help="YAML config file; flags override its keys"),
        "dataset": lambda: p.add_argument("--dataset", help="dataset CSV or directory with train/test CSVs"),
        "train": lambda: p.add_argument("--train", help="training CSV path"),
        "test": lambda: p.add_argument("--test", help="test CSV path"),
        "schema": lambda: p.add_argument(
            "--schema", help=f"schema preset ({', '.join(SCHEMA_PRESETS)}) or schema YAML path"
        ),
        "level": lambda: p.add_argument("--level", choices=[l.value for l in Level]),
        "space": lambda: p.add_argument("--space", choices=[s.value for s in FeatureSpace]),
        "k_clusters": lambda: p.add_argument("--k-clusters", dest="k_clusters", type=int,
                                             help="clusters per scope (K)"),
        "n_aps": lambda: p.add_argument("--n-aps", dest="n_aps", type=int,
                                        help="strongest APs per combination (N)"),
        "knn_k": lambda: p.add_argument("--knn-k", dest="knn_k",
                                        help="neighbour count k, or a comma list (1,3,5)"),
        "variant": lambda: p.add_argument("--variant", choices=[v.value for v in Variant]),
        "representation": lambda: p.add_argument(
            "--representation", choices=[r.value for r in Representation]
        ),
        "exponent": lambda: p.add_argument("--exponent", type=float, help="powed exponent"),
        "floor_height": lambda: p.add_argument("--floor-height", dest="floor_height", type=float),
        "seed": lambda: p.add_argument("--seed", type=int),
        "jobs": lambda: p.add_argument("--jobs", type=int, help="parallel sweep workers (default: cores)"),
        "out": lambda: p.add_argument("--out", help="output path (bundle file or report directory)"),
        "routing": lambda: p.add_argument("--routing", choices=["truth", "strongest-ap"],
                                          help="multi-building query routing"),
        "bundle": lambda: p.add_argument("--bundle", help="fitted model bundle JSON"),
    }
    for name in names:
        opts[name]()


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fpcluster", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="load a dataset, print its shape, optionally re-export")
    _add_common(p, "config", "dataset", "train", "test", "schema", "out")

    p = sub.add_parser("fit", help="cluster a training map and build its AP table")
    _add_common(p, "config", "dataset", "train", "schema", "level", "space", "k_clusters",
                "n_aps", "exponent", "floor_height", "seed", "out")

    p = sub.add_parser("evaluate", help="evaluate a fitted bundle (or the baseline) on a test CSV")
    _add_common(p, "config", "dataset", "train", "test", "schema", "bundle", "knn_k", "variant",
                "representation", "exponent", "floor_height", "routing", "out")
    p.add_argument("--baseline", action="store_true", default=None,
                   help="no clustering: search the whole building")
    p.add_argument("--plot", action="store_true", default=None, help="also write an SVG error CDF")

    p = sub.add_parser("sweep", help="evaluate a hyperparameter grid")
    _add_common(p, "config", "dataset", "train", "test", "schema", "level", "k_clusters",
                "representation", "exponent", "floor_height", "seed", "jobs", "routing", "out")

    p = sub.add_parser("synth", help="generate a synthetic radio map pair")
    p.add_argument("--buildings", type=int, default=1)
    p.add_argument("--floors", type=int, default=3)
    p.add_argument("--aps-per-floor", dest="aps_per_floor", type=int, default=6)
    p.add_argument("--train-per-floor", dest="train_per_floor", type=int, default=50)
    p.add_argument("--test-per-floor", dest="test_per_floor", type=int, default=15)
    p.add_argument("--sigma", type=float, default=3.0, help="shadowing noise, dB")
    p.add_argument("--gamma", type=float, default=2.2, help="path-loss exponent")
    p.add_argument("--p0", type=float, default=-35.0, help="dBm at the reference distance")
    p.add_argument("--floor-atten", dest="floor_atten", type=float, default=12.0)
    p.add_argument("--threshold", type=float, default=-95.0, help="detection threshold, dBm")
    p.add_argument("--floor-height", dest="floor_height", type=float, default=DEFAULT_FLOOR_HEIGHT)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output directory")

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "synth":
            return cmd_synth(args)
        cfg = _merge_config(args)
        if args.command == "ingest":
            return cmd_ingest(cfg)
        if args.command == "fit":
            return cmd_fit(cfg)
        if args.command == "evaluate":
            return cmd_evaluate(cfg)
        if args.command == "sweep":
            return cmd_sweep(cfg)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename}", file=sys.stderr)
        return 2
    except FpClusterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
