"""Shared-parameter learning: parameter modes, the NCDD objective, its analytic
gradient, minibatch SGD and closed-form inference."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .core import (
    ConfigError,
    DimensionMismatch,
    GraphSignalSample,
    ModeUnavailable,
    NumericalError,
    PreconditionViolated,
    SimilarityMatrix,
    Topology,
    make_rng,
    validate_samples,
)
from .embedding import (
    ACTIVATIONS,
    AGGREGATORS,
    AggregatorParams,
    backward_parts,
    forward_parts,
    from_parts,
    to_parts,
)
from .features import FeatureConfig, devectorize_fd, initial_features
from .similarity import (
    DEFAULT_CN_EPSILON,
    SimilarityParams,
    freq_backward,
    freq_forward,
    time_backward,
    time_forward,
    welch_cross_spectrum,
)

log = logging.getLogger(__name__)

MODES = ("full", "diagonal_repeated", "scalar")

# (name, low Hz, high Hz); bins are assigned with half-open [low, high)
BANDS = (
    ("delta", 0.1, 4.0),
    ("theta", 4.0, 8.0),
    ("alpha", 8.0, 13.0),
    ("beta", 13.0, 30.0),
    ("gamma", 30.0, 50.0),
    ("high_gamma", 70.0, 100.0),
)
N_BANDS = len(BANDS)


def normalize_mode(mode: str) -> str:
    m = mode.replace("-", "_").lower()
    if m not in MODES:
        raise ConfigError(f"unknown parameter mode {mode!r}; expected one of {MODES}")
    return m


def band_index(bin_frequencies: Sequence[float], bands=BANDS) -> np.ndarray:
    """Band number of every bin.

    Bins outside all bands go to the band with the nearest edge, ties to the
    lower band.
    """
    f = np.asarray(bin_frequencies, dtype=np.float64)
    if np.any(np.diff(f) < 0):
        raise ConfigError("bin frequencies must be sorted")
    out = np.empty(f.size, dtype=np.int64)
    for i, x in enumerate(f):
        inside = [l for l, (_, lo, hi) in enumerate(bands) if lo <= x < hi]
        if inside:
            out[i] = inside[0]
        else:
            out[i] = int(np.argmin([min(abs(x - lo), abs(x - hi)) for _, lo, hi in bands]))
    return out


def band_partition(bin_frequencies: Sequence[float], bands=BANDS) -> list[np.ndarray]:
    idx = band_index(bin_frequencies, bands)
    return [np.flatnonzero(idx == l) for l in range(len(bands))]


def band_index_from_sizes(sizes: Sequence[int]) -> np.ndarray:
    return np.repeat(np.arange(len(sizes)), sizes)


@dataclass(frozen=True)
class Expanded:
    U: list
    b: list
    theta: Optional[np.ndarray] = None
    theta_a: Optional[np.ndarray] = None
    theta_b: Optional[np.ndarray] = None


@dataclass(frozen=True)
class ParameterLayout:
    """Shapes and modes fixing the linear map from free variables to (U_k, b_k, theta).

    Free-vector order: for k = 1..K the U_k variables then the b_k variables,
    then theta (time) or theta_a followed by theta_b (frequency). ``theta_scale``
    multiplies every expanded theta entry.
    """

    domain: str
    d0: int
    K: int
    psi_mode: str = "full"
    theta_mode: str = "full"
    t_tilde: int = 1
    bins: int = 0
    band_of_bin: Optional[tuple] = None
    theta_scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "psi_mode", normalize_mode(self.psi_mode))
        object.__setattr__(self, "theta_mode", normalize_mode(self.theta_mode))
        if self.K < 1:
            raise ConfigError("K must be at least 1")
        if self.domain == "time":
            if "diagonal_repeated" in (self.psi_mode, self.theta_mode):
                raise ModeUnavailable("diagonal_repeated mode exists only in the frequency domain")
        elif self.domain == "frequency":
            if self.d0 != self.t_tilde * self.bins:
                raise DimensionMismatch(f"D0={self.d0} != T~ * W = {self.t_tilde * self.bins}")
            if "diagonal_repeated" in (self.psi_mode, self.theta_mode):
                if self.band_of_bin is None or len(self.band_of_bin) != self.bins:
                    raise ConfigError("diagonal_repeated needs a band index for every bin")
        else:
            raise ConfigError(f"unknown domain {self.domain!r}")

    # sizes -------------------------------------------------------------
    def _psi_sizes(self) -> tuple[int, int]:
        return {
            "full": (self.d0 * self.d0, self.d0),
            "scalar": (1, 1),
            "diagonal_repeated": (N_BANDS, N_BANDS),
        }[self.psi_mode]

    def _theta_size(self) -> int:
        per = {
            "full": 2 * self.d0 if self.domain == "time" else self.bins,
            "scalar": 1,
            "diagonal_repeated": N_BANDS,
        }[self.theta_mode]
        return per if self.domain == "time" else 2 * per

    @property
    def n_psi(self) -> int:
        return self.K * sum(self._psi_sizes())

    @property
    def n_free(self) -> int:
        return self.n_psi + self._theta_size()

    # expansion ---------------------------------------------------------
    def _band_vec(self, base: np.ndarray) -> np.ndarray:
        """Length-W band pattern, each bin value repeated over its T~ windows."""
        return np.repeat(base[np.asarray(self.band_of_bin)], self.t_tilde)

    def _band_vec_adjoint(self, g: np.ndarray) -> np.ndarray:
        gw = g.reshape(self.bins, self.t_tilde).sum(axis=1)
        return np.bincount(np.asarray(self.band_of_bin), weights=gw, minlength=N_BANDS)

    def _theta_vec(self, base, length):
        if self.theta_mode == "full":
            return base.copy()
        if self.theta_mode == "scalar":
            return np.full(length, base[0])
        return base[np.asarray(self.band_of_bin)]

    def _theta_adjoint(self, g):
        if self.theta_mode == "full":
            return g
        if self.theta_mode == "scalar":
            return np.array([g.sum()])
        return np.bincount(np.asarray(self.band_of_bin), weights=g, minlength=N_BANDS)

    def expand(self, free: np.ndarray) -> Expanded:
        free = np.asarray(free, dtype=np.float64)
        if free.shape != (self.n_free,):
            raise DimensionMismatch(f"expected {self.n_free} free variables, got {free.shape}")
        nu, nb = self._psi_sizes()
        d0 = self.d0
        U, b = [], []
        pos = 0
        for _ in range(self.K):
            u_free, b_free = free[pos : pos + nu], free[pos + nu : pos + nu + nb]
            pos += nu + nb
            if self.psi_mode == "full":
                U.append(u_free.reshape(d0, d0).copy())
                b.append(b_free.copy())
            elif self.psi_mode == "scalar":
                U.append(np.full((d0, d0), u_free[0]))
                b.append(np.full(d0, b_free[0]))
            else:
                U.append(np.diag(self._band_vec(u_free)))
                b.append(self._band_vec(b_free))
        rest = free[pos:] * self.theta_scale
        if self.domain == "time":
            return Expanded(U, b, theta=self._theta_vec(rest, 2 * d0))
        half = rest.size // 2
        return Expanded(
            U,
            b,
            theta_a=self._theta_vec(rest[:half], self.bins),
            theta_b=self._theta_vec(rest[half:], self.bins),
        )

    def adjoint(self, gU, gb, g_theta=None, g_theta_a=None, g_theta_b=None) -> np.ndarray:
        """Map gradients on expanded parameters back to the free variables."""
        chunks = []
        for gu, gbk in zip(gU, gb):
            if self.psi_mode == "full":
                chunks += [gu.ravel(), gbk]
            elif self.psi_mode == "scalar":
                chunks += [np.array([gu.sum()]), np.array([gbk.sum()])]
            else:
                chunks += [self._band_vec_adjoint(np.diag(gu)), self._band_vec_adjoint(gbk)]
        if self.domain == "time":
            chunks.append(self.theta_scale * self._theta_adjoint(g_theta))
        else:
            chunks.append(self.theta_scale * self._theta_adjoint(g_theta_a))
            chunks.append(self.theta_scale * self._theta_adjoint(g_theta_b))
        return np.concatenate(chunks)

    def init_free(self, rng: np.random.Generator, noise: float = 0.01) -> np.ndarray:
        """Near pass-through start: identity-like U, zero bias, unit theta (before scaling)."""
        nu, nb = self._psi_sizes()
        chunks = []
        for _ in range(self.K):
            if self.psi_mode == "full":
                u = np.eye(self.d0) + rng.uniform(-noise, noise, size=(self.d0, self.d0))
                chunks += [u.ravel(), np.zeros(nb)]
            elif self.psi_mode == "scalar":
                chunks += [np.array([1.0 / self.d0]), np.zeros(1)]
            else:
                chunks += [1.0 + rng.uniform(-noise, noise, size=N_BANDS), np.zeros(N_BANDS)]
        chunks.append(np.ones(self._theta_size()))
        return np.concatenate(chunks)


def expand_parameters(free: np.ndarray, layout: ParameterLayout) -> Expanded:
    return layout.expand(free)


@dataclass(frozen=True)
class TrainConfig:
    features: FeatureConfig = field(default_factory=FeatureConfig)
    K: int = 1
    aggregator: str = "mean"
    activation: str = "relu"
    psi_mode: str = "full"
    theta_mode: str = "scalar"
    epochs: int = 1
    learning_rate: float = 0.1
    batch_size: int = 200
    seed: int = 0
    cn_epsilon: float = DEFAULT_CN_EPSILON

    def __post_init__(self):
        if self.aggregator not in AGGREGATORS:
            raise ConfigError(f"unknown aggregator {self.aggregator!r}")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")
        if self.epochs < 1 or self.batch_size < 1 or self.K < 1:
            raise ConfigError("epochs, batch_size and K must be positive")
        if self.learning_rate < 0:
            raise ConfigError("learning_rate must be nonnegative")
        normalize_mode(self.psi_mode)
        normalize_mode(self.theta_mode)

    @property
    def domain(self) -> str:
        return self.features.domain


def make_layout(config: TrainConfig, t_len: int, theta_scale: float = 1.0) -> ParameterLayout:
    fc = config.features
    fc.check(t_len)
    band = None
    if fc.domain == "frequency":
        band = tuple(int(i) for i in band_index(fc.bin_frequencies(t_len)))
    return ParameterLayout(
        domain=fc.domain,
        d0=fc.d0(t_len),
        K=config.K,
        psi_mode=config.psi_mode,
        theta_mode=config.theta_mode,
        t_tilde=fc.inner_windows if fc.domain == "frequency" else 1,
        bins=fc.bins if fc.domain == "frequency" else 0,
        band_of_bin=band,
        theta_scale=theta_scale,
    )


@dataclass(frozen=True)
class TrainableParameters:
    layout: ParameterLayout
    values: np.ndarray
    seed: int = 0

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.shape != (self.layout.n_free,):
            raise DimensionMismatch(f"expected {self.layout.n_free} values, got {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def expanded(self) -> Expanded:
        return self.layout.expand(self.values)

    def aggregator_params(self, aggregator: str, activation: str) -> AggregatorParams:
        e = self.expanded()
        return AggregatorParams(tuple(e.U), tuple(e.b), aggregator, activation)

    def similarity_params(self) -> SimilarityParams:
        e = self.expanded()
        if self.layout.domain == "time":
            return SimilarityParams("time", theta=e.theta)
        return SimilarityParams("frequency", theta_a=e.theta_a, theta_b=e.theta_b)


# objective -------------------------------------------------------------


def loss_from_similarity(S: np.ndarray, topology: Topology) -> tuple[float, np.ndarray]:
    """Objective for one similarity matrix and its gradient wrt S.

    Columns index the conditioning node v; the softmax runs over rows u.
    """
    A = topology.adjacency.astype(np.float64)
    n = A.sum(axis=0)
    m = S.max(axis=0)
    lse = m + np.log(np.exp(S - m).sum(axis=0))
    loss = -float(((A * S).sum(axis=0) - n * lse).sum())
    p = np.exp(S - lse)
    return loss, p * n - A


def _forward(h0, topology, e: Expanded, layout: ParameterLayout, config: TrainConfig):
    hk, caches = forward_parts(to_parts(h0), topology, e.U, e.b, config.aggregator, config.activation)
    if layout.domain == "time":
        Z = np.concatenate([h0, hk[0]], axis=1)
        S, sc = time_forward(Z, e.theta, config.cn_epsilon)
    else:
        S, sc = freq_forward(h0, from_parts(hk), e.theta_a, e.theta_b, layout.t_tilde)
    return S, (caches, sc)


def _backward(g_S, cache, e: Expanded, layout: ParameterLayout, config: TrainConfig) -> np.ndarray:
    caches, sc = cache
    if layout.domain == "time":
        gZ, g_theta = time_backward(g_S, sc)
        g_hk = [gZ[:, layout.d0 :]]
        gU, gb = backward_parts(g_hk, caches, e.U, config.activation)
        return layout.adjoint(gU, gb, g_theta=g_theta)
    g_h, g_ta, g_tb = freq_backward(g_S, sc)
    gU, gb = backward_parts([g_h.real, g_h.imag], caches, e.U, config.activation)
    return layout.adjoint(gU, gb, g_theta_a=g_ta, g_theta_b=g_tb)


def _check_features(h0, topology, layout):
    if h0.shape != (topology.n_nodes, layout.d0):
        raise DimensionMismatch(
            f"features {h0.shape} do not match topology N={topology.n_nodes} and D0={layout.d0}"
        )


def _sample_loss_grad(h0, topology, params: TrainableParameters, config, e=None, want_grad=True):
    layout = params.layout
    _check_features(h0, topology, layout)
    e = e if e is not None else params.expanded()
    S, cache = _forward(h0, topology, e, layout, config)
    loss, g_S = loss_from_similarity(S, topology)
    if not want_grad:
        return loss, None
    return loss, _backward(g_S, cache, e, layout, config)


def ncdd_loss(samples: Sequence[GraphSignalSample], topology: Topology,
              params: TrainableParameters, config: TrainConfig) -> float:
    e = params.expanded()
    total = 0.0
    for s in samples:
        h0 = initial_features(s, config.features)
        total += _sample_loss_grad(h0, topology, params, config, e, want_grad=False)[0]
    return total


def loss_and_gradient(samples: Sequence[GraphSignalSample], topology: Topology,
                      params: TrainableParameters, config: TrainConfig) -> tuple[float, np.ndarray]:
    e = params.expanded()
    total, grad = 0.0, np.zeros(params.layout.n_free)
    for s in samples:
        h0 = initial_features(s, config.features)
        loss, g = _sample_loss_grad(h0, topology, params, config, e)
        total += loss
        grad += g
    return total, grad


def loss_gradient(samples, topology, params, config) -> np.ndarray:
    return loss_and_gradient(samples, topology, params, config)[1]


# training --------------------------------------------------------------


def calibrate_theta_scale(features: Sequence[np.ndarray], config: TrainConfig, d0: int) -> float:
    """Scale that puts the initial self-similarity near 1.

    Time domain: 1/(D-1), which makes S_uu = 1 for unit theta. Frequency
    domain: 1/(W * mean self cross-spectrum of the initial features).
    """
    if config.domain == "time":
        return 1.0 / (2 * d0 - 1)
    fc = config.features
    means = []
    for h0 in features:
        z = devectorize_fd(h0, fc.inner_windows, fc.bins)
        omega = welch_cross_spectrum(z)
        means.append(np.mean(np.einsum("uuw->uw", omega)))
    m = float(np.mean(means))
    if not np.isfinite(m) or m <= 0:
        return 1.0
    return 1.0 / (fc.bins * m)


@dataclass(frozen=True)
class TrainResult:
    params: TrainableParameters
    loss_trace: list


def sgd_train(samples: Sequence[GraphSignalSample], topology: Topology, config: TrainConfig,
              init: Optional[TrainableParameters] = None) -> TrainResult:
    """Minibatch SGD on the batch-mean gradient; returns the per-epoch mean sample loss."""
    if not samples:
        raise PreconditionViolated("training needs at least one sample")
    n_nodes, t_len = validate_samples(samples)
    if n_nodes != topology.n_nodes:
        raise DimensionMismatch(f"samples have {n_nodes} nodes, topology has {topology.n_nodes}")
    feats = [initial_features(s, config.features) for s in samples]
    rng = make_rng(config.seed)
    if init is None:
        layout = make_layout(config, t_len, calibrate_theta_scale(feats, config, config.features.d0(t_len)))
        free = layout.init_free(rng)
    else:
        layout, free = init.layout, np.array(init.values)
    batch = min(config.batch_size, len(samples))
    if batch < config.batch_size:
        log.warning("batch_size %d exceeds %d training samples; using %d",
                    config.batch_size, len(samples), batch)
    trace = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(samples))
        losses = np.empty(len(samples))
        for start in range(0, len(samples), batch):
            idx = order[start : start + batch]
            params = TrainableParameters(layout, free, config.seed)
            e = params.expanded()
            grad = np.zeros(layout.n_free)
            for i in idx:
                loss, g = _sample_loss_grad(feats[i], topology, params, config, e)
                losses[i] = loss
                grad += g
            if not (np.all(np.isfinite(grad)) and np.isfinite(losses[idx]).all()):
                raise NumericalError(f"non-finite loss or gradient in epoch {epoch}")
            free = free - config.learning_rate * grad / len(idx)
        trace.append(float(losses.mean()))
        log.info("epoch %d mean loss %.6g", epoch, trace[-1])
    return TrainResult(TrainableParameters(layout, free, config.seed), trace)


def infer_similarity(sample: GraphSignalSample, topology: Topology,
                     trained: TrainableParameters, config: TrainConfig) -> SimilarityMatrix:
    h0 = initial_features(sample, config.features)
    _check_features(h0, topology, trained.layout)
    S, _ = _forward(h0, topology, trained.expanded(), trained.layout, config)
    return SimilarityMatrix(S)


def with_values(params: TrainableParameters, values: np.ndarray) -> TrainableParameters:
    return replace(params, values=values)
