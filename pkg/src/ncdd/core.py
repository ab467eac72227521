"""Domain types shared across the package, error classes and seeded randomness."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np


class NCDDError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(NCDDError):
    pass


class DimensionMismatch(NCDDError):
    pass


class NonFiniteValue(NCDDError):
    pass


class PreconditionViolated(NCDDError):
    pass


class SingularCovariance(NCDDError):
    pass


class ModeUnavailable(ConfigError):
    pass


class AsymmetryError(NCDDError):
    pass


class SingleClassError(NCDDError):
    pass


class ParseError(NCDDError):
    pass


class VersionMismatch(NCDDError):
    pass


class NumericalError(NCDDError):
    pass


# similarity code historically raised this name
DimensionError = DimensionMismatch


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def make_rng(seed: int) -> np.random.Generator:
    """Return the package-standard generator for a 64-bit seed."""
    return np.random.Generator(np.random.PCG64(int(seed) & 0xFFFFFFFFFFFFFFFF))


def derive_seeds(seed: int, n: int) -> list[int]:
    """Independent child seeds, stable across runs, e.g. one per tree or per sample."""
    children = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF).spawn(n)
    return [int(c.generate_state(2, dtype=np.uint64)[0]) for c in children]


@dataclass(frozen=True)
class Topology:
    """Binary symmetric adjacency with self-loops on every node."""

    adjacency: np.ndarray
    neighbour_lists: tuple = field(init=False, repr=False)

    def __post_init__(self):
        a = np.asarray(self.adjacency)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise DimensionMismatch(f"adjacency must be square and non-empty, got {a.shape}")
        if not np.all((a == 0) | (a == 1)):
            raise ValueError("adjacency must be binary")
        if not np.array_equal(a, a.T):
            raise AsymmetryError("adjacency must be symmetric")
        a = a.astype(np.int8)
        np.fill_diagonal(a, 1)
        object.__setattr__(self, "adjacency", _frozen(a))
        nbrs = tuple(_frozen(np.flatnonzero(row)) for row in a)
        object.__setattr__(self, "neighbour_lists", nbrs)

    @property
    def n_nodes(self) -> int:
        return self.adjacency.shape[0]

    @property
    def degrees(self) -> np.ndarray:
        """|N_u| for every node, self included."""
        return self.adjacency.sum(axis=1).astype(np.float64)

    @classmethod
    def from_edges(cls, n_nodes: int, edges: Iterable[tuple[int, int]]) -> "Topology":
        a = np.zeros((n_nodes, n_nodes), dtype=np.int8)
        for u, v in edges:
            a[u, v] = a[v, u] = 1
        return cls(a)

    @classmethod
    def complete(cls, n_nodes: int) -> "Topology":
        return cls(np.ones((n_nodes, n_nodes), dtype=np.int8))

    @classmethod
    def self_loops(cls, n_nodes: int) -> "Topology":
        return cls(np.eye(n_nodes, dtype=np.int8))


@dataclass(frozen=True)
class GraphSignalSample:
    """One N x T window of a multichannel signal."""

    values: np.ndarray
    sample_index: int = 0
    timestamp: Optional[float] = None
    label: Optional[int] = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise DimensionMismatch(f"sample values must be 2-D, got shape {v.shape}")
        object.__setattr__(self, "values", _frozen(v))

    @property
    def n_nodes(self) -> int:
        return self.values.shape[0]

    @property
    def t_len(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class EmbeddingSet:
    """Initial and final hidden node features; ``combined`` gives Z = [h0 | hK].

    Time-domain features are stored as float64, which is the zero-imaginary case.
    """

    initial: np.ndarray
    hidden: np.ndarray

    def __post_init__(self):
        if self.initial.shape != self.hidden.shape:
            raise DimensionMismatch(
                f"initial {self.initial.shape} and hidden {self.hidden.shape} differ"
            )
        object.__setattr__(self, "initial", _frozen(self.initial))
        object.__setattr__(self, "hidden", _frozen(self.hidden))

    @property
    def d0(self) -> int:
        return self.initial.shape[1]

    @property
    def combined(self) -> np.ndarray:
        return np.concatenate([self.initial, self.hidden], axis=1)


@dataclass(frozen=True)
class SimilarityMatrix:
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise DimensionMismatch(f"similarity must be square, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise NonFiniteValue("similarity matrix has non-finite entries")
        object.__setattr__(self, "values", _frozen(v))

    @property
    def n_nodes(self) -> int:
        return self.values.shape[0]


def validate_sample(sample: GraphSignalSample, expected_n: int, expected_t: int) -> None:
    """Raise unless ``sample`` is ``expected_n`` x ``expected_t`` and finite."""
    shape = sample.values.shape
    if shape != (expected_n, expected_t):
        raise DimensionMismatch(
            f"sample {sample.sample_index}: expected ({expected_n}, {expected_t}), got {shape}"
        )
    if not np.all(np.isfinite(sample.values)):
        raise NonFiniteValue(f"sample {sample.sample_index} contains non-finite values")


def validate_samples(samples: Sequence[GraphSignalSample]) -> tuple[int, int]:
    if not samples:
        raise PreconditionViolated("no samples given")
    n, t = samples[0].values.shape
    for s in samples:
        validate_sample(s, n, t)
    return n, t
