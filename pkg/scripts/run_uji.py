"""UJIIndoorLoc benchmark: baseline KNN family vs clustered pipelines.

Expects trainingData.csv / validationData.csv under --data (default
data/ujiindoorloc/, or $FPCLUSTER_DATA/ujiindoorloc). Reproduces the
headline comparison: per-building KNN baseline against Building-level
RSSI-space clustering with a compact AP-combination table.

    python3 scripts/run_uji.py --data data/ujiindoorloc --out uji-out --jobs 4
"""

import argparse
import os
import sys
import time

from fpcluster import (
    FeatureSpace,
    KnnConfig,
    Level,
    Pipeline,
    PowedConfig,
    SweepGrid,
    SweepSettings,
    Variant,
    evaluate_many,
    load_csv,
    resolve_schema,
    sweep,
    summarize,
    write_summary_csv,
)


def locate(data_arg: str | None) -> str:
    candidates = []
    if data_arg:
        candidates.append(data_arg)
    env = os.environ.get("FPCLUSTER_DATA")
    if env:
        candidates += [os.path.join(env, "ujiindoorloc"), env]
    candidates.append("data/ujiindoorloc")
    for c in candidates:
        if os.path.exists(os.path.join(c, "trainingData.csv")):
            return c
    sys.exit("trainingData.csv not found; pass --data or set FPCLUSTER_DATA")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--data", help="directory with trainingData.csv / validationData.csv")
    ap.add_argument("--out", default="uji-out")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    data = locate(args.data)
    schema = resolve_schema("ujiindoorloc")
    t0 = time.perf_counter()
    train = load_csv(os.path.join(data, "trainingData.csv"), schema, partition="train")
    test = load_csv(os.path.join(data, "validationData.csv"), schema, partition="test")
    print(f"loaded {len(train)} train / {len(test)} test fingerprints, "
          f"{train.ap_count} APs in {time.perf_counter() - t0:.1f} s")

    # headline: baseline best k per variant
    pcfg = PowedConfig(exponent=2.71828, min=train.global_min)
    for variant in Variant:
        cfgs = [KnnConfig(k=k, variant=variant) for k in range(1, 14)]
        reports = evaluate_many(test, Pipeline(train, pcfg, cfgs[0]), cfgs)
        best = min(reports, key=lambda r: r.mean_e2d)
        print(f"baseline {variant.value:7s}: best k={best.config['knn_k']:2d} "
              f"mean_e2d={best.mean_e2d:.2f} m p95={best.p95_e2d:.2f} m fdr={best.fdr * 100:.2f}%")

    grid = SweepGrid(
        levels=(Level.BUILDING,),
        spaces=(FeatureSpace.XYZ, FeatureSpace.RSSI),
        n_values=(1, 2, 3, 4, 5),
        k_clusters=(2, 4, 8),
        knn_ks=(1, 3, 5, 7, 9, 11, 13),
        variants=(Variant.KNN, Variant.WKNN, Variant.WKNN_T),
        include_baseline=False,  # computed above
    )
    t0 = time.perf_counter()
    result = sweep(train, test, grid, SweepSettings(seed=args.seed), jobs=args.jobs)
    print(f"sweep: {len(result.reports)} reports in {time.perf_counter() - t0:.0f} s")

    rows = summarize(result)
    os.makedirs(args.out, exist_ok=True)
    write_summary_csv(rows, os.path.join(args.out, "summary.csv"))
    for row in rows:
        print(f"  {row['variant']:7s} {row['group']:5s} N={row['n_aps']} "
              f"K={row['k_clusters']} k={row['knn_k']} "
              f"mean_e2d={row['mean_e2d']:.2f} m fdr={row['fdr'] * 100:.2f}%")
    print(f"summary written to {os.path.join(args.out, 'summary.csv')}")


if __name__ == "__main__":
    main()
