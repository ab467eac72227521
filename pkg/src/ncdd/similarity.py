"""Embedding-to-similarity maps: weighted correlation (time) and weighted
Welch cross-spectrum (frequency)."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np

from .core import ConfigError, DimensionMismatch, EmbeddingSet, SimilarityMatrix
from .features import devectorize_fd, vectorize_fd

DEFAULT_CN_EPSILON = 1e-12


@dataclass(frozen=True)
class SimilarityParams:
    mode: Literal["time", "frequency"]
    theta: Optional[np.ndarray] = None
    theta_a: Optional[np.ndarray] = None
    theta_b: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.mode == "time":
            if self.theta is None:
                raise ConfigError("time-domain similarity needs theta")
        elif self.mode == "frequency":
            if self.theta_a is None or self.theta_b is None:
                raise ConfigError("frequency-domain similarity needs theta_a and theta_b")
            if len(self.theta_a) != len(self.theta_b):
                raise DimensionMismatch("theta_a and theta_b lengths differ")
        else:
            raise ConfigError(f"unknown mode {self.mode!r}")


def center_normalize(v: np.ndarray, epsilon: float = DEFAULT_CN_EPSILON) -> np.ndarray:
    """Centre ``v`` and divide by its sample standard deviation (divisor D-1).

    Works row-wise on 2-D input. Rows whose standard deviation is below
    ``epsilon`` map to zero.
    """
    c, _ = _cn_forward(np.asarray(v, dtype=np.float64), epsilon)
    return c


def _cn_forward(z, epsilon):
    if z.shape[-1] < 2:
        raise DimensionMismatch("centering-normalizing needs at least two components")
    y = z - z.mean(axis=-1, keepdims=True)
    s = np.sqrt((y * y).sum(axis=-1, keepdims=True) / (z.shape[-1] - 1))
    ok = s >= epsilon
    c = np.where(ok, y / np.where(ok, s, 1.0), 0.0)
    return c, (s, ok)


def _cn_backward(g_c, c, s, ok):
    D = c.shape[-1]
    gc_centered = g_c - g_c.mean(axis=-1, keepdims=True)
    proj = (c * g_c).sum(axis=-1, keepdims=True) / (D - 1)
    g = (gc_centered - c * proj) / np.where(ok, s, 1.0)
    return np.where(ok, g, 0.0)


def _require_real(z):
    if np.iscomplexobj(z):
        if np.any(z.imag != 0):
            raise ConfigError("time-domain similarity is defined for real embeddings only")
        z = z.real
    return np.asarray(z, dtype=np.float64)


def time_forward(Z: np.ndarray, theta: np.ndarray, epsilon: float):
    Z = _require_real(Z)
    if theta.shape != (Z.shape[1],):
        raise DimensionMismatch(f"theta has shape {theta.shape}, embeddings have D={Z.shape[1]}")
    C, (s, ok) = _cn_forward(Z, epsilon)
    Ct = C * theta
    S = Ct @ C.T
    S = 0.5 * (S + S.T)
    return S, (C, s, ok, theta)


def time_backward(g_S, cache):
    """Gradients wrt (Z, theta)."""
    C, s, ok, theta = cache
    gsym = g_S + g_S.T
    g_theta = (C * (g_S @ C)).sum(axis=0)
    g_C = (gsym @ C) * theta
    return _cn_backward(g_C, C, s, ok), g_theta


def similarity_time(embeddings: EmbeddingSet, theta: np.ndarray, epsilon: float = DEFAULT_CN_EPSILON) -> SimilarityMatrix:
    S, _ = time_forward(embeddings.combined, np.asarray(theta, dtype=np.float64), epsilon)
    return SimilarityMatrix(S)


def _cross(part: np.ndarray) -> np.ndarray:
    return np.einsum("utw,vtw->uvw", part, part.conj())


def welch_cross_spectrum(part: np.ndarray) -> np.ndarray:
    """N x T~ x W complex -> N x N x W magnitudes of the window-summed cross products."""
    omega = np.abs(_cross(np.asarray(part)))
    return 0.5 * (omega + omega.transpose(1, 0, 2))


def freq_forward(h0: np.ndarray, hK: np.ndarray, theta_a, theta_b, t_tilde: int):
    W = len(theta_a)
    if h0.shape[1] != t_tilde * W:
        raise DimensionMismatch(f"D0={h0.shape[1]} but T~ * W = {t_tilde * W}")
    za = devectorize_fd(h0, t_tilde, W)
    zb = devectorize_fd(hK, t_tilde, W)
    ca, cb = _cross(za), _cross(zb)
    oa, ob = np.abs(ca), np.abs(cb)
    S = oa @ theta_a + ob @ theta_b
    S = 0.5 * (S + S.T)
    return S, (zb, cb, oa, ob, theta_b, t_tilde)


def freq_backward(g_S, cache):
    """Gradients wrt (hidden features as complex, theta_a, theta_b)."""
    zb, cb, oa, ob, theta_b, t_tilde = cache
    g_theta_a = np.einsum("uv,uvw->w", g_S, oa)
    g_theta_b = np.einsum("uv,uvw->w", g_S, ob)
    g_omega = g_S[:, :, None] * theta_b[None, None, :]
    # d|c| = Re(conj(c)/|c| dc); subgradient 0 where c == 0
    safe = np.where(ob > 0, ob, 1.0)
    G = np.where(ob > 0, g_omega * cb / safe, 0.0)
    Gt = G + G.conj().transpose(1, 0, 2)
    g_zb = np.einsum("uvw,vtw->utw", Gt, zb)
    return vectorize_fd(g_zb), g_theta_a, g_theta_b


def similarity_frequency(
    embeddings: EmbeddingSet, theta_a: np.ndarray, theta_b: np.ndarray, t_tilde: int
) -> SimilarityMatrix:
    S, _ = freq_forward(
        np.asarray(embeddings.initial),
        np.asarray(embeddings.hidden),
        np.asarray(theta_a, dtype=np.float64),
        np.asarray(theta_b, dtype=np.float64),
        t_tilde,
    )
    return SimilarityMatrix(S)


def similarity(embeddings: EmbeddingSet, params: SimilarityParams, t_tilde: int = 1,
               epsilon: float = DEFAULT_CN_EPSILON) -> SimilarityMatrix:
    if params.mode == "time":
        return similarity_time(embeddings, params.theta, epsilon)
    return similarity_frequency(embeddings, params.theta_a, params.theta_b, t_tilde)
