"""Neighbourhood aggregation (GraphSAGE mean / max) over K rounds.

Complex features are processed as separate real and imaginary parts: the
affine map is real, the bias only touches the real part, and activations act
on each part independently. Real (time-domain) inputs carry a single part.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .core import ConfigError, DimensionMismatch, EmbeddingSet, Topology

AggregatorKind = Literal["mean", "max"]
Activation = Literal["relu", "softmax", "identity"]

AGGREGATORS = ("mean", "max")
ACTIVATIONS = ("relu", "softmax", "identity")


@dataclass(frozen=True)
class AggregatorParams:
    U: tuple
    b: tuple
    aggregator_kind: AggregatorKind = "mean"
    activation: Activation = "relu"

    def __post_init__(self):
        if len(self.U) != len(self.b) or len(self.U) < 1:
            raise ConfigError("need K >= 1 matching (U_k, b_k) pairs")
        if self.aggregator_kind not in AGGREGATORS:
            raise ConfigError(f"unknown aggregator {self.aggregator_kind!r}")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")
        d0 = self.U[0].shape[0]
        for u, b in zip(self.U, self.b):
            if u.shape != (d0, d0) or b.shape != (d0,):
                raise DimensionMismatch("aggregator parameter shapes disagree")

    @property
    def K(self) -> int:
        return len(self.U)

    @property
    def d0(self) -> int:
        return self.U[0].shape[0]


def init_aggregator_params(
    d0: int,
    K: int,
    rng: np.random.Generator,
    aggregator_kind: AggregatorKind = "mean",
    activation: Activation = "relu",
    noise: float = 0.01,
) -> AggregatorParams:
    """Near pass-through start: U_k = I + uniform(-noise, noise), b_k = 0."""
    U = tuple(np.eye(d0) + rng.uniform(-noise, noise, size=(d0, d0)) for _ in range(K))
    b = tuple(np.zeros(d0) for _ in range(K))
    return AggregatorParams(U, b, aggregator_kind, activation)


def to_parts(h: np.ndarray) -> list[np.ndarray]:
    if np.iscomplexobj(h):
        return [np.ascontiguousarray(h.real), np.ascontiguousarray(h.imag)]
    return [np.asarray(h, dtype=np.float64)]


def from_parts(parts: Sequence[np.ndarray]) -> np.ndarray:
    if len(parts) == 1:
        return parts[0]
    return parts[0] + 1j * parts[1]


def activate(pre: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(pre, 0.0)
    if kind == "softmax":
        e = np.exp(pre - pre.max(axis=-1, keepdims=True))
        return e / e.sum(axis=-1, keepdims=True)
    if kind == "identity":
        return pre
    raise ConfigError(f"unknown activation {kind!r}")


def activate_backward(g_out: np.ndarray, pre: np.ndarray, out: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        # subgradient 0 at exactly 0
        return g_out * (pre > 0)
    if kind == "softmax":
        return out * (g_out - (g_out * out).sum(axis=-1, keepdims=True))
    return g_out


def _affine(parts, U, b):
    return [h @ U.T + b if i == 0 else h @ U.T for i, h in enumerate(parts)]


def _mean_operator(topology: Topology) -> np.ndarray:
    return topology.adjacency / topology.degrees[:, None]


def mean_forward(parts, topology, U, b, activation):
    P = _mean_operator(topology)
    m = [P @ h for h in parts]
    pre = _affine(m, U, b)
    out = [activate(p, activation) for p in pre]
    return out, ("mean", P, m, pre, out)


def max_forward(parts, topology, U, b, activation):
    pre = _affine(parts, U, b)
    act = [activate(p, activation) for p in pre]
    mask = topology.adjacency.astype(bool)[:, :, None]
    out, idx = [], []
    for a in act:
        stacked = np.where(mask, a[None, :, :], -np.inf)
        # first maximiser wins ties
        j = stacked.argmax(axis=1)
        idx.append(j)
        out.append(np.take_along_axis(a, j, axis=0))
    return out, ("max", parts, pre, act, idx)


def layer_backward(g_out, cache, U, activation):
    """Return (gradient wrt layer input parts, dU, db) for one aggregation round."""
    kind = cache[0]
    gU = np.zeros_like(U)
    gb = np.zeros(U.shape[0])
    g_in = []
    if kind == "mean":
        _, P, m, pre, out = cache
        for i, (g, p, o, mi) in enumerate(zip(g_out, pre, out, m)):
            gp = activate_backward(g, p, o, activation)
            gU += gp.T @ mi
            if i == 0:
                gb += gp.sum(axis=0)
            g_in.append(P.T @ (gp @ U))
    else:
        _, parts, pre, act, idx = cache
        cols = np.arange(U.shape[0])[None, :]
        for i, (g, p, a, j, h) in enumerate(zip(g_out, pre, act, idx, parts)):
            g_act = np.zeros_like(a)
            np.add.at(g_act, (j, np.broadcast_to(cols, j.shape)), g)
            gp = activate_backward(g_act, p, a, activation)
            gU += gp.T @ h
            if i == 0:
                gb += gp.sum(axis=0)
            g_in.append(gp @ U)
    return g_in, gU, gb


def forward_parts(parts, topology, Us, bs, aggregator_kind, activation):
    """Run K rounds on part lists; returns final hidden parts and per-round caches."""
    step = mean_forward if aggregator_kind == "mean" else max_forward
    caches = []
    h = parts
    for U, b in zip(Us, bs):
        h, cache = step(h, topology, U, b, activation)
        caches.append(cache)
    return h, caches


def backward_parts(g_hidden, caches, Us, activation):
    """Gradients of every (U_k, b_k) given the gradient on the final hidden parts."""
    gUs, gbs = [None] * len(Us), [None] * len(Us)
    g = g_hidden
    for k in range(len(Us) - 1, -1, -1):
        g, gUs[k], gbs[k] = layer_backward(g, caches[k], Us[k], activation)
    return gUs, gbs


def aggregate_mean(hidden_prev, topology: Topology, U, b, activation: Activation = "relu"):
    out, _ = mean_forward(to_parts(hidden_prev), topology, U, b, activation)
    return from_parts(out)


def aggregate_max(hidden_prev, topology: Topology, U, b, activation: Activation = "relu"):
    out, _ = max_forward(to_parts(hidden_prev), topology, U, b, activation)
    return from_parts(out)


def run_aggregation(initial: np.ndarray, topology: Topology, params: AggregatorParams) -> EmbeddingSet:
    if initial.shape[1] != params.d0:
        raise DimensionMismatch(f"features have length {initial.shape[1]}, parameters expect {params.d0}")
    if initial.shape[0] != topology.n_nodes:
        raise DimensionMismatch("feature rows do not match the topology")
    h, _ = forward_parts(
        to_parts(initial), topology, params.U, params.b, params.aggregator_kind, params.activation
    )
    return EmbeddingSet(initial=np.array(initial), hidden=from_parts(h))
