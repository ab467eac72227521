"""Command-line entry point: ``ncdd <subcommand> [options]``.

Exit codes: 0 ok, 1 usage/config error, 2 data error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import pickle
import sys
from pathlib import Path


from . import dataio
from .core import ConfigError, NCDDError, NumericalError, SingularCovariance
from .pipeline import (
    PipelineConfig,
    load_config,
    run_benchmark,
    run_classify,
    run_infer,
    run_topology,
    run_train,
    split_dataset,
    synthetic_dataset,
)

log = logging.getLogger("ncdd")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _similarity_path(directory: Path, index: int) -> Path:
    return directory / f"S_{index:06d}.csv"


def _model_header(cfg: PipelineConfig, rate: float) -> dict:
    return {"aggregator": cfg.aggregator, "activation": cfg.activation, "domain": cfg.domain,
            "inner_windows": cfg.inner_windows, "bins": cfg.bins, "sampling_rate_hz": rate}


def cmd_synth(cfg, args):
    samples = synthetic_dataset(cfg)
    path = dataio.write_dataset(samples, args.out, cfg.sampling_rate_hz)
    print(path)


def cmd_topology(cfg, args):
    _, samples = dataio.read_dataset(args.manifest)
    train, _ = split_dataset(samples, cfg)
    topo = run_topology(train, cfg)
    dataio.write_adjacency(topo, args.out / "adjacency.csv")
    print(args.out / "adjacency.csv")


def cmd_train(cfg, args):
    manifest, samples = dataio.read_dataset(args.manifest)
    topo = dataio.read_adjacency(args.adjacency)
    train, _ = split_dataset(samples, cfg)
    result = run_train(train, topo, cfg, manifest.sampling_rate_hz)
    dataio.write_parameters(result.params, args.out / "params.bin",
                            extra=_model_header(cfg, manifest.sampling_rate_hz))
    dataio.write_loss_trace(result.loss_trace, args.out / "loss_trace.csv")
    print(args.out / "params.bin")


def cmd_infer(cfg, args):
    manifest, samples = dataio.read_dataset(args.manifest)
    topo = dataio.read_adjacency(args.adjacency)
    params, extra = dataio.read_parameters(args.params)
    expected = _model_header(cfg, manifest.sampling_rate_hz)
    clash = sorted(k for k in expected if k in extra and extra[k] != expected[k])
    if clash:
        raise ConfigError(f"parameter file was trained with different settings: {', '.join(clash)}")
    out = args.out / "similarities"
    out.mkdir(parents=True, exist_ok=True)
    for s, S in zip(samples, run_infer(samples, topo, params, cfg, manifest.sampling_rate_hz)):
        dataio.write_similarity(S, _similarity_path(out, s.sample_index))
    print(out)


def _classify(cfg, samples, sims, out: Path) -> dict:
    train, test = split_dataset(samples, cfg)
    metrics, forest, scores = run_classify(
        [sims[s.sample_index] for s in train], [s.label for s in train],
        [sims[s.sample_index] for s in test], [s.label for s in test], cfg,
    )
    with open(out / "forest.pkl", "wb") as fh:
        pickle.dump(forest, fh)
    lines = ["sample_index,label,score"] + [
        f"{s.sample_index},{s.label},{sc!r}" for s, sc in zip(test, scores.tolist())
    ]
    (out / "scores.csv").write_text("\n".join(lines) + "\n")
    return metrics


def cmd_classify(cfg, args):
    _, samples = dataio.read_dataset(args.manifest)
    sims = {}
    for s in samples:
        p = _similarity_path(args.similarities, s.sample_index)
        if not p.exists():
            raise NCDDError(f"missing similarity file {p}")
        sims[s.sample_index] = dataio.read_similarity(p)
    metrics = _classify(cfg, samples, sims, args.out)
    dataio.write_json(metrics, args.out / "metrics.json")
    print(f"AUC {metrics['auc']:.4f}")


def cmd_evaluate(cfg, args):
    manifest, samples = dataio.read_dataset(args.manifest)
    rate = manifest.sampling_rate_hz
    train, test = split_dataset(samples, cfg)
    topo = run_topology(train, cfg)
    result = run_train(train, topo, cfg, rate)
    dataio.write_adjacency(topo, args.out / "adjacency.csv")
    dataio.write_parameters(result.params, args.out / "params.bin", extra=_model_header(cfg, rate))
    dataio.write_loss_trace(result.loss_trace, args.out / "loss_trace.csv")
    used = train + test
    sims = dict(zip((s.sample_index for s in used), run_infer(used, topo, result.params, cfg, rate)))
    metrics = _classify(cfg, used, sims, args.out)
    metrics["loss_trace"] = list(result.loss_trace)
    dataio.write_json(metrics, args.out / "metrics.json")
    print(f"AUC {metrics['auc']:.4f}")


def cmd_benchmark(cfg, args):
    rows = run_benchmark(cfg)
    lines = ["n_nodes,train_size,mean_infer_seconds"] + [
        f"{r['n_nodes']},{r['train_size']},{r['mean_infer_seconds']!r}" for r in rows
    ]
    (args.out / "benchmark.csv").write_text("\n".join(lines) + "\n")
    dataio.write_json({"rows": rows, "config": cfg.to_dict()}, args.out / "benchmark.json")
    for r in rows:
        print(f"N={r['n_nodes']:>4} I={r['train_size']:>5} {1e3 * r['mean_infer_seconds']:.3f} ms/sample")


COMMANDS = {
    "synth": (cmd_synth, "generate a synthetic two-state dataset", ()),
    "topology": (cmd_topology, "infer the adjacency from training samples", ("manifest",)),
    "train": (cmd_train, "learn shared parameters by SGD", ("manifest", "adjacency")),
    "infer": (cmd_infer, "write one similarity matrix per sample", ("manifest", "adjacency", "params")),
    "classify": (cmd_classify, "random forest + AUC on similarity files", ("manifest", "similarities")),
    "evaluate": (cmd_evaluate, "run topology, train, infer and classify in one go", ("manifest",)),
    "benchmark": (cmd_benchmark, "time per-sample inference over node counts", ()),
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ncdd", description="Node-centric data-driven graph learning.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_, help_text, inputs) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=Path, help="JSON file naming every required hyperparameter")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override one config value (repeatable)")
        p.add_argument("--seed", type=int, help="shorthand for --set seed=N")
        p.add_argument("--out", type=Path, required=True, help="output directory")
        for inp in inputs:
            p.add_argument(f"--{inp}", type=Path, required=True)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    func = COMMANDS[args.command][0]
    try:
        overrides = list(args.set) + ([f"seed={args.seed}"] if args.seed is not None else [])
        cfg = load_config(args.config, overrides)
        args.out.mkdir(parents=True, exist_ok=True)
        func(cfg, args)
    except ConfigError as exc:
        print(f"ncdd {args.command}: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, SingularCovariance, FloatingPointError) as exc:
        print(f"ncdd {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (NCDDError, OSError) as exc:
        print(f"ncdd {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
