"""Per-sample inference time against node count N and training-set size I.

    python3 scripts/benchmark_inference.py [--nodes 5 15 25 50 75] [--sizes 10 100 1000]
"""
import argparse

from ncdd.pipeline import PipelineConfig, run_benchmark


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--nodes", type=int, nargs="+", default=[5, 15, 25, 50, 75])
    ap.add_argument("--sizes", type=int, nargs="+", default=[10, 100, 1000])
    ap.add_argument("--domain", default="time", choices=["time", "frequency"])
    ap.add_argument("--repeats", type=int, default=15)
    args = ap.parse_args()

    cfg = PipelineConfig(domain=args.domain, benchmark_nodes=tuple(args.nodes),
                         benchmark_train_sizes=tuple(args.sizes), benchmark_repeats=args.repeats,
                         bins=10)
    rows = run_benchmark(cfg)
    print(f"{'N':>4} " + " ".join(f"I={s:<8}" for s in args.sizes) + " (microseconds per sample)")
    for n in args.nodes:
        cells = [r["mean_infer_seconds"] for r in rows if r["n_nodes"] == n]
        print(f"{n:>4} " + " ".join(f"{1e6 * c:<10.1f}" for c in cells))


if __name__ == "__main__":
    main()
