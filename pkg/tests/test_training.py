
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ncdd.core import ConfigError, GraphSignalSample, ModeUnavailable, NumericalError, Topology, make_rng
from ncdd.embedding import run_aggregation
from ncdd.features import FeatureConfig, initial_features
from ncdd.similarity import similarity
from ncdd.synthdata import SynthConfig, generate
from ncdd.training import (
    N_BANDS,
    ParameterLayout,
    TrainConfig,
    TrainableParameters,
    band_index,
    band_index_from_sizes,
    band_partition,
    expand_parameters,
    infer_similarity,
    loss_and_gradient,
    loss_from_similarity,
    loss_gradient,
    make_layout,
    ncdd_loss,
    sgd_train,
)

from conftest import central_diff, random_topology


def test_band_interior_points():
    assert list(band_index([1, 5, 10])) == [0, 1, 2]


def test_band_gap_goes_to_lower():
    assert band_index([60.0])[0] == 4
    assert band_index([55.0])[0] == 4
    assert band_index([65.0])[0] == 5


def test_band_edges_half_open():
    assert list(band_index([4.0, 8.0, 13.0, 30.0])) == [1, 2, 3, 4]


def test_band_sizes_sum_to_w():
    f = np.arange(79) * 256 / 213
    parts = band_partition(f)
    counts = [sum(1 for x in band_index(f) if x == l) for l in range(N_BANDS)]
    assert [len(p) for p in parts] == counts
    assert sum(counts) == 79
    assert sorted(np.concatenate(parts).tolist()) == list(range(79))


def test_scalar_bias_expansion():
    lay = ParameterLayout("time", d0=3, K=1, psi_mode="scalar", theta_mode="scalar")
    e = lay.expand(np.array([0.5, 2.0, 1.0]))
    assert np.array_equal(e.b[0], [2, 2, 2])
    assert np.array_equal(e.U[0], np.full((3, 3), 0.5))
    assert np.array_equal(e.theta, np.ones(6))


def test_band_repeated_theta():
    band = tuple(band_index_from_sizes([2, 1, 1, 1, 1, 1]))
    lay = ParameterLayout("frequency", d0=7, K=1, psi_mode="scalar", theta_mode="diagonal_repeated",
                          t_tilde=1, bins=7, band_of_bin=band)
    base = np.arange(1.0, 7.0)
    e = lay.expand(np.concatenate([[1.0, 0.0], base, np.zeros(6)]))
    assert np.array_equal(e.theta_a, [1, 1, 2, 3, 4, 5, 6])


def test_band_repeated_psi_aligns_with_vec_order():
    band = (0, 0, 1)
    lay = ParameterLayout("frequency", d0=6, K=1, psi_mode="diagonal_repeated", theta_mode="scalar",
                          t_tilde=2, bins=3, band_of_bin=band)
    u = np.arange(1.0, 7.0)
    free = np.concatenate([u, np.zeros(6), [1.0, 1.0]])
    # flat index w * T~ + t, so each bin's value appears for both windows consecutively
    assert np.array_equal(np.diag(lay.expand(free).U[0]), [1, 1, 1, 1, 2, 2])


def test_band_repeated_unavailable_in_time():
    with pytest.raises(ModeUnavailable):
        ParameterLayout("time", d0=4, K=1, psi_mode="diagonal_repeated")


def _layouts():
    band = (0, 1, 1, 5)
    yield ParameterLayout("time", 3, 2, "full", "full", theta_scale=0.3)
    yield ParameterLayout("time", 3, 1, "scalar", "scalar")
    yield ParameterLayout("frequency", 8, 1, "full", "full", 2, 4, band)
    yield ParameterLayout("frequency", 8, 2, "diagonal_repeated", "diagonal_repeated", 2, 4, band, 0.5)
    yield ParameterLayout("frequency", 8, 1, "scalar", "scalar", 2, 4, band)


def _flatten(e):
    parts = [u.ravel() for u in e.U] + list(e.b)
    parts += [e.theta] if e.theta is not None else [e.theta_a, e.theta_b]
    return np.concatenate(parts)


@pytest.mark.parametrize("lay", list(_layouts()))
def test_expansion_jacobian(lay):
    rng = make_rng(0)
    x = rng.normal(size=lay.n_free)
    r = rng.normal(size=_flatten(lay.expand(x)).size)
    # the expansion is linear, so its adjoint is the gradient of <r, expand(x)>
    e = lay.expand(x)
    n_u = [u.size for u in e.U]
    pos = 0
    gU = []
    for u in e.U:
        gU.append(r[pos : pos + u.size].reshape(u.shape))
        pos += u.size
    gb = []
    for b in e.b:
        gb.append(r[pos : pos + b.size])
        pos += b.size
    if lay.domain == "time":
        analytic = lay.adjoint(gU, gb, g_theta=r[pos:])
    else:
        w = lay.bins
        analytic = lay.adjoint(gU, gb, g_theta_a=r[pos : pos + w], g_theta_b=r[pos + w :])
    numeric = central_diff(lambda v: r @ _flatten(lay.expand(v)), x)
    assert np.allclose(analytic, numeric, atol=1e-7)
    assert sum(n_u) == lay.K * lay.d0**2


def test_expand_parameters_alias():
    lay = ParameterLayout("time", 2, 1, "scalar", "scalar")
    x = np.array([1.0, 2.0, 3.0])
    assert np.array_equal(expand_parameters(x, lay).theta, lay.expand(x).theta)


@pytest.mark.parametrize("n", [2, 3, 5])
def test_uniform_complete_closed_form(n):
    loss, _ = loss_from_similarity(np.full((n, n), 0.7), Topology.complete(n))
    assert abs(loss - n * n * np.log(n)) < 1e-10


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-1e3, 1e3))
def test_shift_invariance(seed, c):
    rng = make_rng(seed)
    n = int(rng.integers(2, 7))
    S = rng.normal(size=(n, n))
    S = S + S.T
    topo = random_topology(n, rng)
    a, _ = loss_from_similarity(S, topo)
    b, _ = loss_from_similarity(S + c, topo)
    assert abs(a - b) < 1e-10 * max(1.0, abs(a))


def kl_objective(S_list, topo):
    """Sum over samples and nodes of |N_v| KL(p_hat(.|v) || p(.|v)) plus the log-degree constant."""
    A = topo.adjacency
    total = 0.0
    for S in S_list:
        for v in range(topo.n_nodes):
            nv = A[:, v].sum()
            p = np.exp(S[:, v]) / np.exp(S[:, v]).sum()
            kl = sum((1 / nv) * np.log((1 / nv) / p[u]) for u in range(topo.n_nodes) if A[u, v])
            total += nv * kl + nv * np.log(nv)
    return total


def compose_similarity(sample, topo, params, cfg):
    h0 = initial_features(sample, cfg.features)
    emb = run_aggregation(h0, topo, params.aggregator_params(cfg.aggregator, cfg.activation))
    return similarity(emb, params.similarity_params(), params.layout.t_tilde, cfg.cn_epsilon).values


@pytest.mark.parametrize("seed", range(4))
def test_kl_equivalence(seed):
    rng = make_rng(seed)
    topo = random_topology(3, rng)
    cfg = TrainConfig(psi_mode="scalar", theta_mode="scalar")
    lay = make_layout(cfg, 6)
    params = TrainableParameters(lay, rng.normal(size=lay.n_free))
    samples = [GraphSignalSample(rng.normal(size=(3, 6))) for _ in range(2)]
    S_list = [compose_similarity(s, topo, params, cfg) for s in samples]
    assert abs(ncdd_loss(samples, topo, params, cfg) - kl_objective(S_list, topo)) < 1e-10


def _fd_instance(seed, domain, agg, act, mode):
    rng = make_rng(seed)
    n = int(rng.choice([3, 5]))
    K = int(rng.choice([1, 2]))
    if domain == "time":
        t = int(rng.choice([4, 8]))
        fc = FeatureConfig("time")
    else:
        t = 12
        fc = FeatureConfig("frequency", inner_windows=2, bins=4, sampling_rate_hz=60)
    topo = random_topology(n, rng)
    cfg = TrainConfig(features=fc, K=K, aggregator=agg, activation=act, psi_mode=mode, theta_mode=mode)
    lay = make_layout(cfg, t)
    x = rng.normal(0, 0.5, lay.n_free)
    scale = 0.3 if domain == "frequency" else 1.0
    samples = [GraphSignalSample(scale * rng.normal(size=(n, t))) for _ in range(2)]
    return samples, topo, lay, x, cfg


@pytest.mark.parametrize("domain,mode", [("time", "full"), ("time", "scalar"),
                                         ("frequency", "diagonal_repeated")])
def test_gradient_matches_finite_differences(domain, mode):
    samples, topo, lay, x, cfg = _fd_instance(7, domain, "mean", "relu", mode)
    _, g = loss_and_gradient(samples, topo, TrainableParameters(lay, x), cfg)
    num = central_diff(lambda v: ncdd_loss(samples, topo, TrainableParameters(lay, v), cfg), x)
    assert np.linalg.norm(g - num) <= 1e-5 * np.linalg.norm(num)


def test_gradient_n4_d6():
    rng = make_rng(11)
    topo = random_topology(4, rng)
    cfg = TrainConfig(K=1, psi_mode="full", theta_mode="full", activation="softmax")
    lay = make_layout(cfg, 6)
    x = rng.normal(0, 0.5, lay.n_free)
    samples = [GraphSignalSample(rng.normal(size=(4, 6)))]
    g = loss_gradient(samples, topo, TrainableParameters(lay, x), cfg)
    num = central_diff(lambda v: ncdd_loss(samples, topo, TrainableParameters(lay, v), cfg), x)
    assert np.linalg.norm(g - num) <= 1e-5 * np.linalg.norm(num)


def test_zero_theta_annihilates_psi_gradient():
    rng = make_rng(5)
    topo = random_topology(4, rng)
    cfg = TrainConfig(psi_mode="full", theta_mode="full")
    lay = make_layout(cfg, 6)
    x = rng.normal(size=lay.n_free)
    x[lay.n_psi :] = 0.0
    g = loss_gradient([GraphSignalSample(rng.normal(size=(4, 6)))], topo, TrainableParameters(lay, x), cfg)
    assert np.all(g[: lay.n_psi] == 0)


def test_duplicate_sample_doubles_gradient():
    rng = make_rng(6)
    topo = random_topology(4, rng)
    cfg = TrainConfig(psi_mode="full", theta_mode="scalar")
    lay = make_layout(cfg, 6)
    params = TrainableParameters(lay, rng.normal(size=lay.n_free))
    s = GraphSignalSample(rng.normal(size=(4, 6)))
    g1 = loss_gradient([s], topo, params, cfg)
    g2 = loss_gradient([s, s], topo, params, cfg)
    assert np.allclose(g2, 2 * g1, rtol=1e-13, atol=1e-13)


def _two_cluster(n_per=20, seed=0):
    return generate(SynthConfig(n_nodes=4, t_len=32, n_samples_per_state=n_per, seed=seed, kappa=3.0))


def test_zero_learning_rate_is_static():
    samples = _two_cluster()
    topo = Topology.complete(4)
    cfg = TrainConfig(epochs=3, learning_rate=0.0, batch_size=8)
    res = sgd_train(samples, topo, cfg)
    init = sgd_train(samples, topo, TrainConfig(epochs=1, learning_rate=0.0, batch_size=8))
    assert np.array_equal(res.params.values, init.params.values)
    assert len(set(res.loss_trace)) == 1


def test_sgd_deterministic():
    samples = _two_cluster()
    topo = Topology.complete(4)
    cfg = TrainConfig(epochs=2, learning_rate=0.05, batch_size=7, seed=3)
    a, b = sgd_train(samples, topo, cfg), sgd_train(samples, topo, cfg)
    assert a.params.values.tobytes() == b.params.values.tobytes()
    assert a.loss_trace == b.loss_trace


def test_sgd_reduces_loss():
    samples = _two_cluster()
    topo = Topology.from_edges(4, [(0, 1), (2, 3)])
    res = sgd_train(samples, topo, TrainConfig(epochs=5, learning_rate=0.01, batch_size=8))
    assert res.loss_trace[-1] <= res.loss_trace[0]


def test_sgd_frequency_runs():
    samples = generate(SynthConfig(n_nodes=4, t_len=64, n_samples_per_state=6, seed=1))
    fc = FeatureConfig("frequency", inner_windows=2, bins=8, sampling_rate_hz=256)
    cfg = TrainConfig(features=fc, psi_mode="diagonal_repeated", theta_mode="diagonal_repeated",
                      epochs=2, learning_rate=0.1, batch_size=4)
    res = sgd_train(samples, Topology.complete(4), cfg)
    assert all(np.isfinite(res.loss_trace))


def test_sgd_blowup_raises():
    samples = generate(SynthConfig(n_nodes=4, t_len=64, n_samples_per_state=5, seed=1))
    fc = FeatureConfig("frequency", inner_windows=2, bins=8)
    cfg = TrainConfig(features=fc, K=2, epochs=20, learning_rate=1e12, batch_size=2,
                      activation="identity", theta_mode="full")
    with np.errstate(all="ignore"), pytest.raises(NumericalError):
        sgd_train(samples, Topology.from_edges(4, [(0, 1)]), cfg)


def test_inference_matches_composition():
    samples = _two_cluster(4)
    topo = Topology.from_edges(4, [(0, 1), (1, 2)])
    cfg = TrainConfig(epochs=1, batch_size=4)
    params = sgd_train(samples, topo, cfg).params
    s = samples[0]
    S = infer_similarity(s, topo, params, cfg).values
    assert np.array_equal(S, infer_similarity(s, topo, params, cfg).values)
    assert np.array_equal(S, S.T)
    assert np.allclose(S, compose_similarity(s, topo, params, cfg), atol=1e-12)


def test_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(aggregator="sum")
    with pytest.raises(ConfigError):
        TrainConfig(psi_mode="banded")
    band = (0, 1)
    lay = ParameterLayout("frequency", 2, 1, "diagonal-repeated", "scalar", 1, 2, band)
    assert lay.psi_mode == "diagonal_repeated"
