"""Seeded two-state multichannel generator.

State 0: independent AR(1) noise on every node. State 1: the same noise plus a
shared oscillation (random phase per sample) on a subset of coupled nodes.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.signal import lfilter

from .core import ConfigError, GraphSignalSample, derive_seeds, make_rng


@dataclass(frozen=True)
class SynthConfig:
    n_nodes: int = 12
    t_len: int = 640
    n_samples_per_state: int = 200
    seed: int = 0
    sampling_rate_hz: float = 256.0
    rho0: float = 0.5
    sigma: float = 1.0
    kappa: float = 5.0
    f1_hz: float = 10.0
    coupled_nodes: Optional[tuple] = None  # default: first half of the nodes

    def __post_init__(self):
        if not 0.0 <= self.rho0 < 1.0:
            raise ConfigError("rho0 must lie in [0, 1)")
        if self.kappa < 0 or self.sigma <= 0:
            raise ConfigError("kappa must be nonnegative and sigma positive")
        if not 0 < self.f1_hz < self.sampling_rate_hz / 2:
            raise ConfigError("f1_hz must lie below the Nyquist frequency")
        if self.n_nodes < 1 or self.t_len < 2 or self.n_samples_per_state < 1:
            raise ConfigError("n_nodes, t_len and n_samples_per_state must be positive")

    @property
    def coupled(self) -> np.ndarray:
        if self.coupled_nodes is None:
            return np.arange(max(2, self.n_nodes // 2))
        return np.asarray(self.coupled_nodes, dtype=np.int64)


def ar1(rng: np.random.Generator, n: int, t: int, rho: float, sigma: float) -> np.ndarray:
    """Stationary AR(1) rows: x[t] = rho x[t-1] + sigma e[t]."""
    e = rng.normal(0.0, sigma, size=(n, t))
    e[:, 0] /= np.sqrt(1.0 - rho * rho)
    return lfilter([1.0], [1.0, -rho], e, axis=1)


def _one(config: SynthConfig, label: int, seed: int) -> np.ndarray:
    rng = make_rng(seed)
    x = ar1(rng, config.n_nodes, config.t_len, config.rho0, config.sigma)
    phase = rng.uniform(0.0, 2 * np.pi)
    if label == 1 and config.kappa > 0:
        t = np.arange(config.t_len) / config.sampling_rate_hz
        x[config.coupled] += config.kappa * np.sin(2 * np.pi * config.f1_hz * t + phase)
    return x


def generate(config: SynthConfig) -> list[GraphSignalSample]:
    """Labelled samples in chronological order; states are interleaved at random."""
    total = 2 * config.n_samples_per_state
    rng = make_rng(config.seed)
    labels = np.array([0] * config.n_samples_per_state + [1] * config.n_samples_per_state)
    labels = labels[rng.permutation(total)]
    seeds = derive_seeds(config.seed, total)
    return [
        GraphSignalSample(_one(config, int(lab), sd), sample_index=i, timestamp=float(i), label=int(lab))
        for i, (lab, sd) in enumerate(zip(labels, seeds))
    ]
