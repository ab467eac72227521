"""End-to-end orchestration: split -> topology -> train -> infer -> classify."""
from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .core import ConfigError, GraphSignalSample, SimilarityMatrix, Topology, make_rng
from .evaluation import (
    ForestConfig,
    auc,
    chronological_split,
    forest_train,
    subsample_majority,
    vectorize_upper,
)
from .features import FeatureConfig
from .synthdata import SynthConfig, generate
from .topology import TopologyConfig, infer_topology
from .training import TrainConfig, TrainResult, TrainableParameters, infer_similarity, sgd_train

log = logging.getLogger(__name__)

# hyperparameters a config file must name explicitly
REQUIRED_KEYS = (
    "domain", "K", "aggregator", "epochs", "learning_rate", "batch_size", "eta_ratio",
    "theta_mode", "psi_mode", "inner_windows", "bins", "n_trees", "seed",
)


@dataclass(frozen=True)
class PipelineConfig:
    domain: str = "time"
    K: int = 1
    aggregator: str = "mean"
    epochs: int = 2
    learning_rate: float = 0.1
    batch_size: int = 200
    eta_ratio: float = 0.5
    theta_mode: str = "scalar"
    psi_mode: str = "full"
    inner_windows: int = 3
    bins: int = 79
    n_trees: int = 1000
    seed: int = 0
    activation: str = "relu"
    majority_ratio: float = 10.0
    topology_epsilon: float = 1e-8
    cn_epsilon: float = 1e-12
    max_depth: Optional[int] = None
    features_per_split: Optional[int] = None
    min_leaf: int = 1
    # synthetic data
    n_nodes: int = 12
    t_len: int = 640
    n_samples_per_state: int = 200
    sampling_rate_hz: float = 256.0
    rho0: float = 0.5
    sigma: float = 1.0
    kappa: float = 5.0
    f1_hz: float = 10.0
    # benchmark
    benchmark_nodes: tuple = (5, 15, 25, 50, 75)
    benchmark_train_sizes: tuple = (10, 1000)
    benchmark_t_len: int = 50
    benchmark_test_samples: int = 100
    benchmark_repeats: int = 15

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}

    # derived configs
    def feature_config(self, rate_hz: Optional[float] = None) -> FeatureConfig:
        return FeatureConfig(self.domain, self.inner_windows, self.bins,
                             rate_hz if rate_hz is not None else self.sampling_rate_hz)

    def train_config(self, rate_hz: Optional[float] = None) -> TrainConfig:
        return TrainConfig(
            features=self.feature_config(rate_hz), K=self.K, aggregator=self.aggregator,
            activation=self.activation, psi_mode=self.psi_mode, theta_mode=self.theta_mode,
            epochs=self.epochs, learning_rate=self.learning_rate, batch_size=self.batch_size,
            seed=self.seed, cn_epsilon=self.cn_epsilon,
        )

    def topology_config(self) -> TopologyConfig:
        return TopologyConfig(self.eta_ratio, self.topology_epsilon)

    def forest_config(self) -> ForestConfig:
        return ForestConfig(self.n_trees, self.max_depth, self.features_per_split,
                            self.min_leaf, self.seed)

    def synth_config(self) -> SynthConfig:
        return SynthConfig(self.n_nodes, self.t_len, self.n_samples_per_state, self.seed,
                           self.sampling_rate_hz, self.rho0, self.sigma, self.kappa, self.f1_hz)


_FIELD_TYPES = {f.name: f.type for f in fields(PipelineConfig)}


def _coerce(key: str, value):
    default = getattr(PipelineConfig(), key)
    if isinstance(default, tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{key} must be a list")
        return tuple(value)
    if value is None:
        return None
    if isinstance(default, bool):
        return bool(value)
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(f"{key} must be an integer, got {value}")
        return int(value)
    if isinstance(default, float):
        return float(value)
    return value


def config_from_dict(doc: dict, require_all: bool = True) -> PipelineConfig:
    unknown = sorted(set(doc) - set(_FIELD_TYPES))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    if require_all:
        missing = [k for k in REQUIRED_KEYS if k not in doc]
        if missing:
            raise ConfigError(f"config is missing required keys: {', '.join(missing)}")
    try:
        return PipelineConfig(**{k: _coerce(k, v) for k, v in doc.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def parse_override(text: str) -> tuple[str, object]:
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not key=value")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def load_config(path=None, overrides: Sequence[str] = ()) -> PipelineConfig:
    """Read a JSON config (all REQUIRED_KEYS must be present) and apply key=value overrides."""
    doc = {}
    if path is not None:
        try:
            doc = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file {path} not found") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}: {exc.msg}") from None
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        config_from_dict(doc, require_all=True)
    for text in overrides:
        k, v = parse_override(text)
        doc[k] = v
    return config_from_dict(doc, require_all=False)


# pipeline stages -------------------------------------------------------


def split_dataset(samples: Sequence[GraphSignalSample], cfg: PipelineConfig):
    """Majority subsampling, then the per-class chronological half split."""
    kept = subsample_majority(samples, cfg.majority_ratio, cfg.seed)
    return chronological_split(kept)


def run_topology(train: Sequence[GraphSignalSample], cfg: PipelineConfig) -> Topology:
    return infer_topology(train, cfg.topology_config())


def run_train(train, topology: Topology, cfg: PipelineConfig, rate_hz: float) -> TrainResult:
    return sgd_train(train, topology, cfg.train_config(rate_hz))


def run_infer(samples, topology: Topology, params: TrainableParameters, cfg: PipelineConfig,
              rate_hz: float) -> list[SimilarityMatrix]:
    tc = cfg.train_config(rate_hz)
    return [infer_similarity(s, topology, params, tc) for s in samples]


def _counts(labels) -> dict:
    labels = list(labels)
    return {"0": labels.count(0), "1": labels.count(1)}


def run_classify(train_S, train_labels, test_S, test_labels, cfg: PipelineConfig):
    """Fit the forest on training similarities and score the test set.

    Returns (metrics dict, forest, test scores).
    """
    Xtr = np.stack([vectorize_upper(s) for s in train_S])
    Xte = np.stack([vectorize_upper(s) for s in test_S])
    forest = forest_train((Xtr, np.asarray(train_labels)), cfg.forest_config())
    scores = forest.scores(Xte)
    metrics = {
        "auc": auc(scores, test_labels),
        "n_train": len(train_labels),
        "n_test": len(test_labels),
        "per_class": {"train": _counts(train_labels), "test": _counts(test_labels)},
        "config": cfg.to_dict(),
    }
    return metrics, forest, scores


@dataclass
class EvaluationResult:
    metrics: dict
    topology: Topology
    train_result: TrainResult
    train: list
    test: list
    scores: np.ndarray
    similarities: dict = field(default_factory=dict)


def run_evaluate(samples: Sequence[GraphSignalSample], cfg: PipelineConfig, rate_hz: float,
                 shuffle_labels: bool = False) -> EvaluationResult:
    """Full pipeline. ``shuffle_labels`` permutes labels first (chance-level control)."""
    samples = list(samples)
    if shuffle_labels:
        perm = make_rng(cfg.seed + 1).permutation(len(samples))
        labels = [samples[i].label for i in perm]
        samples = [replace(s, label=lab) for s, lab in zip(samples, labels)]
    train, test = split_dataset(samples, cfg)
    t0 = time.perf_counter()
    topology = run_topology(train, cfg)
    result = run_train(train, topology, cfg, rate_hz)
    log.info("trained in %.1fs, loss trace %s", time.perf_counter() - t0, result.loss_trace)
    s_train = run_infer(train, topology, result.params, cfg, rate_hz)
    s_test = run_infer(test, topology, result.params, cfg, rate_hz)
    metrics, _, scores = run_classify(
        s_train, [s.label for s in train], s_test, [s.label for s in test], cfg
    )
    metrics["loss_trace"] = list(result.loss_trace)
    sims = {s.sample_index: m for s, m in zip(train + test, s_train + s_test)}
    return EvaluationResult(metrics, topology, result, train, test, scores, sims)


def synthetic_dataset(cfg: PipelineConfig) -> list[GraphSignalSample]:
    return generate(cfg.synth_config())


# benchmark -------------------------------------------------------------


def random_topology(n: int, rng: np.random.Generator, p: float = 0.5) -> Topology:
    a = np.triu(rng.random((n, n)) < p, k=1)
    return Topology((a | a.T).astype(np.int8))


def time_inference(samples, topology, params, tc) -> float:
    """Mean wall time per sample over one pass."""
    t0 = time.perf_counter()
    for s in samples:
        infer_similarity(s, topology, params, tc)
    return (time.perf_counter() - t0) / len(samples)


def run_benchmark(cfg: PipelineConfig) -> list[dict]:
    """Per-sample inference time over node counts and training-set sizes.

    Signals are i.i.d. uniform(0, 1); the topology is a seeded random graph so
    that N may exceed the signal length. All (N, I) cells are trained first and
    then timed in interleaved rounds after a warm-up pass, keeping each cell's
    best round, so slow drifts of the machine hit every cell alike.
    """
    t = cfg.benchmark_t_len
    fc = cfg.feature_config()
    if fc.domain == "frequency":
        fc = replace(fc, bins=min(fc.bins, fc.window_length(t) // 2 + 1))
    cells = []
    for n in cfg.benchmark_nodes:
        rng = make_rng(cfg.seed + n)
        topology = random_topology(n, rng)
        test = [GraphSignalSample(rng.random((n, t)), i) for i in range(cfg.benchmark_test_samples)]
        for size in cfg.benchmark_train_sizes:
            train = [GraphSignalSample(rng.random((n, t)), i) for i in range(size)]
            tc = replace(cfg.train_config(), features=fc, epochs=1, batch_size=min(cfg.batch_size, size))
            cells.append((n, size, topology, test, tc, sgd_train(train, topology, tc).params))
    for _, _, topology, test, tc, params in cells:
        time_inference(test[:10], topology, params, tc)
    best = [float("inf")] * len(cells)
    for _ in range(cfg.benchmark_repeats):
        for j, (_, _, topology, test, tc, params) in enumerate(cells):
            best[j] = min(best[j], time_inference(test, topology, params, tc))
    rows = []
    for (n, size, *_), sec in zip(cells, best):
        rows.append({"n_nodes": n, "train_size": size, "mean_infer_seconds": sec})
        log.info("N=%d I=%d: %.3g s per sample", n, size, sec)
    return rows
