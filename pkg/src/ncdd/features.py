"""Initial node features: raw signal (time domain) or windowed DFT (frequency domain)."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .core import ConfigError, DimensionMismatch, GraphSignalSample

Domain = Literal["time", "frequency"]


@dataclass(frozen=True)
class FeatureConfig:
    domain: Domain = "time"
    inner_windows: int = 3
    bins: int = 79
    sampling_rate_hz: float = 256.0

    def __post_init__(self):
        if self.domain not in ("time", "frequency"):
            raise ConfigError(f"unknown domain {self.domain!r}")
        if self.inner_windows < 1 or self.bins < 1:
            raise ConfigError("inner_windows and bins must be positive")
        if self.sampling_rate_hz <= 0:
            raise ConfigError("sampling_rate_hz must be positive")

    def window_length(self, t_len: int) -> int:
        return t_len // self.inner_windows

    def check(self, t_len: int) -> None:
        """Raise ConfigError unless the configuration is realisable for length ``t_len``."""
        if self.domain == "time":
            return
        if t_len < self.inner_windows:
            raise ConfigError(f"T={t_len} is shorter than {self.inner_windows} inner windows")
        L = self.window_length(t_len)
        if self.bins > L // 2 + 1:
            raise ConfigError(f"W={self.bins} exceeds floor(L/2)+1={L // 2 + 1} for L={L}")

    def d0(self, t_len: int) -> int:
        if self.domain == "time":
            return t_len
        return self.inner_windows * self.bins

    def bin_frequencies(self, t_len: int) -> np.ndarray:
        """Centre frequency in Hz of each kept DFT bin."""
        L = self.window_length(t_len)
        return np.arange(self.bins) * self.sampling_rate_hz / L


def initial_features_time(sample: GraphSignalSample) -> np.ndarray:
    return np.array(sample.values, dtype=np.float64)


def partition_windows(sample: GraphSignalSample | np.ndarray, t_tilde: int) -> np.ndarray:
    """Split each row into ``t_tilde`` disjoint windows of length floor(T / t_tilde)."""
    x = sample.values if isinstance(sample, GraphSignalSample) else np.asarray(sample, float)
    n, t = x.shape
    if t < t_tilde:
        raise ConfigError(f"T={t} is shorter than {t_tilde} inner windows")
    L = t // t_tilde
    return x[:, : t_tilde * L].reshape(n, t_tilde, L)


def dft_windows(windows: np.ndarray, w: int) -> np.ndarray:
    """Unnormalised DFT of each window, keeping the first ``w`` bins."""
    L = windows.shape[-1]
    if w > L // 2 + 1:
        raise ConfigError(f"W={w} exceeds floor(L/2)+1={L // 2 + 1} for L={L}")
    return np.fft.fft(windows, axis=-1)[..., :w]


def vectorize_fd(tensor: np.ndarray) -> np.ndarray:
    """N x T~ x W -> N x T~W, column-major per node: flat index is w * T~ + t."""
    n, tt, w = tensor.shape
    return tensor.transpose(0, 2, 1).reshape(n, w * tt)


def devectorize_fd(flat: np.ndarray, t_tilde: int, w: int) -> np.ndarray:
    n, d0 = flat.shape
    if d0 != t_tilde * w:
        raise DimensionMismatch(f"feature length {d0} != T~ * W = {t_tilde * w}")
    return flat.reshape(n, w, t_tilde).transpose(0, 2, 1)


def initial_features(sample: GraphSignalSample, config: FeatureConfig) -> np.ndarray:
    if config.domain == "time":
        return initial_features_time(sample)
    config.check(sample.t_len)
    return vectorize_fd(dft_windows(partition_windows(sample, config.inner_windows), config.bins))
