"""Data-driven graph topology from the averaged inverse sample covariance."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    ConfigError,
    GraphSignalSample,
    PreconditionViolated,
    SingularCovariance,
    Topology,
    validate_samples,
)


@dataclass(frozen=True)
class TopologyConfig:
    """``eta_ratio`` is the target fraction of zero off-diagonal entries.

    ``regularization_epsilon`` is relative: the ridge added to each covariance
    is ``regularization_epsilon * trace(P) / N``.
    """

    eta_ratio: float = 0.5
    regularization_epsilon: float = 1e-8

    def __post_init__(self):
        if not 0.0 <= self.eta_ratio <= 1.0:
            raise ConfigError(f"eta_ratio must lie in [0, 1], got {self.eta_ratio}")
        if self.regularization_epsilon < 0:
            raise ConfigError("regularization_epsilon must be nonnegative")


def sample_covariance(sample: GraphSignalSample) -> np.ndarray:
    x = sample.values
    if x.shape[1] < 2:
        raise PreconditionViolated("covariance needs at least two time steps")
    xc = x - x.mean(axis=1, keepdims=True)
    p = xc @ xc.T / (x.shape[1] - 1)
    return 0.5 * (p + p.T)


def average_precision_matrix(
    samples: Sequence[GraphSignalSample], config: TopologyConfig = TopologyConfig()
) -> np.ndarray:
    n, t = validate_samples(samples)
    if t <= n:
        raise PreconditionViolated(
            f"signal dimension {t} must exceed the number of nodes {n} to invert covariances"
        )
    acc = np.zeros((n, n))
    eye = np.eye(n)
    # fixed summation order: sample order as given
    for s in samples:
        p = sample_covariance(s)
        ridge = config.regularization_epsilon * np.trace(p) / n
        try:
            inv = np.linalg.inv(p + ridge * eye)
        except np.linalg.LinAlgError as exc:
            raise SingularCovariance(f"covariance of sample {s.sample_index} is singular") from exc
        if not np.all(np.isfinite(inv)):
            raise SingularCovariance(f"covariance of sample {s.sample_index} is singular")
        acc += inv
    return acc / len(samples)


def threshold_for_ratio(values: np.ndarray, eta_ratio: float) -> float:
    """Smallest threshold leaving at least ``eta_ratio`` of ``values`` strictly below it.

    Ties with the threshold are kept, so the realised sparsity can be lower when
    values repeat.
    """
    v = np.sort(np.asarray(values, dtype=np.float64).ravel())
    k = math.ceil(eta_ratio * v.size - 1e-9)
    if k <= 0:
        return -math.inf
    if k >= v.size:
        return math.inf
    return float(v[k])


def build_adjacency(avg_precision: np.ndarray, eta_ratio: float) -> Topology:
    m = np.asarray(avg_precision, dtype=np.float64)
    m = 0.5 * (m + m.T)
    n = m.shape[0]
    iu = np.triu_indices(n, k=1)
    eta = threshold_for_ratio(m[iu], eta_ratio)
    a = (m >= eta).astype(np.int8)
    np.fill_diagonal(a, 1)
    return Topology(a)


def infer_topology(
    samples: Sequence[GraphSignalSample], config: TopologyConfig = TopologyConfig()
) -> Topology:
    return build_adjacency(average_precision_matrix(samples, config), config.eta_ratio)
