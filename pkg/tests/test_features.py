import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ncdd.core import ConfigError, GraphSignalSample, make_rng
from ncdd.features import (
    FeatureConfig,
    devectorize_fd,
    dft_windows,
    initial_features,
    initial_features_time,
    partition_windows,
    vectorize_fd,
)


def naive_dft(x, w):
    L = len(x)
    return np.array([sum(x[n] * np.exp(-2j * np.pi * k * n / L) for n in range(L)) for k in range(w)])


def test_time_features_are_identity():
    x = make_rng(0).normal(size=(3, 7))
    assert np.array_equal(initial_features_time(GraphSignalSample(x)), x)
    assert np.all(initial_features_time(GraphSignalSample(np.zeros((2, 4)))) == 0)


def test_partition_shapes():
    x = np.arange(6.0)[None, :]
    assert np.array_equal(partition_windows(x, 3)[0], [[0, 1], [2, 3], [4, 5]])
    w = partition_windows(np.arange(7.0)[None, :], 3)
    assert w.shape == (1, 3, 2) and w[0, -1, -1] == 5
    assert partition_windows(np.zeros((2, 640)), 3).shape == (2, 3, 640 // 3)
    assert 640 // 3 == 213


def test_dc_window():
    L, c = 10, 2.5
    z = dft_windows(np.full((1, 1, L), c), 4)
    assert abs(z[0, 0, 0] - c * L) < 1e-10
    assert np.all(np.abs(z[0, 0, 1:]) < 1e-10)


@pytest.mark.parametrize("k0", [1, 2, 5])
def test_single_tone(k0):
    L = 16
    x = np.cos(2 * np.pi * k0 * np.arange(L) / L)
    z = dft_windows(x[None, None, :], L // 2 + 1)[0, 0]
    assert abs(abs(z[k0]) - L / 2) < 1e-9
    others = np.delete(np.abs(z), k0)
    assert np.all(others < 1e-9)


@pytest.mark.parametrize("L", [8, 17, 64])
def test_matches_naive_dft(L):
    x = make_rng(L).normal(size=L)
    w = L // 2 + 1
    assert np.max(np.abs(dft_windows(x[None, None, :], w)[0, 0] - naive_dft(x, w))) < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 64), st.integers(0, 2**32 - 1))
def test_parseval(L, seed):
    x = make_rng(seed).normal(size=L)
    full = np.fft.fft(x)
    # full-spectrum check through the public call with every bin kept by symmetry
    half = dft_windows(x[None, None, :], L // 2 + 1)[0, 0]
    energy = np.abs(half[0]) ** 2 + 2 * np.sum(np.abs(half[1 : (L + 1) // 2]) ** 2)
    if L % 2 == 0:
        energy += np.abs(half[L // 2]) ** 2
    assert abs(energy / L - np.sum(x**2)) <= 1e-10 * max(1.0, np.sum(x**2))
    assert np.allclose(half, full[: L // 2 + 1])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-3, 3), st.floats(-3, 3))
def test_dft_linearity(seed, a, b):
    rng = make_rng(seed)
    x, y = rng.normal(size=(2, 1, 2, 12))
    lhs = dft_windows(a * x + b * y, 5)
    rhs = a * dft_windows(x, 5) + b * dft_windows(y, 5)
    assert np.allclose(lhs, rhs, atol=1e-9)


def test_too_many_bins():
    with pytest.raises(ConfigError):
        dft_windows(np.zeros((1, 1, 8)), 6)


def test_vectorize_column_major():
    a, b, c, d = 1 + 1j, 2.0, 3j, 4 - 1j
    t = np.array([[[a, b], [c, d]]])  # rows are windows
    assert np.array_equal(vectorize_fd(t)[0], [a, c, b, d])
    assert np.array_equal(devectorize_fd(vectorize_fd(t), 2, 2), t)


def test_default_feature_length():
    cfg = FeatureConfig("frequency", inner_windows=3, bins=79)
    assert cfg.d0(640) == 237
    h = initial_features(GraphSignalSample(make_rng(0).normal(size=(2, 640))), cfg)
    assert h.shape == (2, 237) and np.iscomplexobj(h)


def test_bin_frequencies():
    cfg = FeatureConfig("frequency", inner_windows=3, bins=4, sampling_rate_hz=256)
    assert np.allclose(cfg.bin_frequencies(640), np.arange(4) * 256 / 213)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-3, 3), st.floats(-3, 3))
def test_frequency_pipeline_linear(seed, a, b):
    rng = make_rng(seed)
    x, y = rng.normal(size=(2, 3, 50))
    cfg = FeatureConfig("frequency", inner_windows=3, bins=6)
    f = lambda v: initial_features(GraphSignalSample(v), cfg)
    assert np.allclose(f(a * x + b * y), a * f(x) + b * f(y), atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_devectorize_inverts_vectorize(tt, w, seed):
    rng = make_rng(seed)
    t = rng.normal(size=(2, tt, w)) + 1j * rng.normal(size=(2, tt, w))
    assert np.array_equal(devectorize_fd(vectorize_fd(t), tt, w), t)
