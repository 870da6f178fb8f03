import io
import json

import numpy as np
import pytest

from speechsi.classical import UNIT_WEIGHTS, ClassWeights
from speechsi.errors import DivergedLoss, IncompatibleInputMeta
from speechsi.neural import (Adam, Conv1D, Dense, Embedding, GlobalMaxPool, MaskedMeanPool, NetworkModel,
                             ReLU, Sigmoid, ToSequence, TrainConfig, build_network, relu, train_network,
                             weighted_bce, weighted_bce_grad)

H = 1e-5
REL_TOL = 1e-4


def rel_error(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(a) + np.linalg.norm(b), 1e-12)


def numeric(f, x):
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + H
        up = f()
        x[i] = old - H
        down = f()
        x[i] = old
        g[i] = (up - down) / (2 * H)
    return g


def check_layer(layer, x, rng, skip_rows=()):
    """Compare analytic input and parameter gradients of sum(R * layer(x))."""
    R = rng.standard_normal(layer.forward(x).shape)

    def loss():
        return float(np.sum(R * layer.forward(x)))

    loss()
    dx = layer.backward(R)
    grads = {k: g.copy() for k, g in layer.grads.items()}
    if dx is not None:
        assert rel_error(dx, numeric(loss, x)) < REL_TOL
    for name, p in layer.params.items():
        num = numeric(loss, p)
        keep = np.setdiff1d(np.arange(len(p)), skip_rows) if skip_rows else slice(None)
        assert rel_error(grads[name][keep], num[keep]) < REL_TOL, name


def test_dense_gradient(rng):
    check_layer(Dense(4, 3, rng), rng.standard_normal((5, 4)), rng)


def test_relu_gradient(rng):
    x = rng.standard_normal((4, 6))
    x[np.abs(x) < 0.01] = 0.5  # keep away from the kink
    check_layer(ReLU(), x, rng)


def test_sigmoid_gradient(rng):
    check_layer(Sigmoid(), 3 * rng.standard_normal((4, 5)), rng)


def test_to_sequence_gradient(rng):
    check_layer(ToSequence(), rng.standard_normal((3, 7)), rng)


def test_conv1d_gradient_dense_path(rng):
    check_layer(Conv1D(3, 4, 3, rng), rng.standard_normal((2, 6, 3)), rng)


def test_conv1d_gradient_sparse_path(rng):
    layer = Conv1D(2, 5, 3, rng)
    x = rng.standard_normal((3, 20, 2))
    out_shape = layer.forward(x).shape
    R = np.zeros(out_shape)
    R[0, 4, 1] = 1.3
    R[2, 10, 3] = -0.7  # 2 of 270 entries live, so the sparse branch runs

    def loss():
        return float(np.sum(R * layer.forward(x)))

    loss()
    dx = layer.backward(R)
    assert rel_error(dx, numeric(loss, x)) < REL_TOL
    gW = layer.grads["W"].copy()
    assert rel_error(gW, numeric(loss, layer.params["W"])) < REL_TOL


def test_global_max_pool_gradient(rng):
    check_layer(GlobalMaxPool(), rng.standard_normal((3, 5, 4)), rng)


def test_embedding_gradient(rng):
    emb = Embedding(rng.standard_normal((6, 3)))
    ids = np.array([[0, 2, 3, 2], [1, 5, 0, 0]])
    R = rng.standard_normal((2, 4, 3))

    def loss():
        return float(np.sum(R * emb.forward(ids)))

    loss()
    emb.backward(R)
    g = emb.grads["E"]
    num = numeric(loss, emb.params["E"])
    assert np.all(g[0] == 0)
    assert rel_error(g[1:], num[1:]) < REL_TOL


def test_masked_mean_pool_gradient(rng):
    emb = Embedding(rng.standard_normal((5, 3)))
    pool = MaskedMeanPool(emb)
    ids = np.array([[0, 0, 1, 4], [2, 3, 3, 1]])
    x = emb.forward(ids)
    check_layer(pool, x, rng)
    assert np.all(pool.weights[0, :2] == 0)


def test_bce_gradient(rng):
    p = rng.uniform(0.05, 0.95, 7)
    y = rng.integers(0, 2, 7).astype(float)
    w = ClassWeights(2.5, 0.4)
    num = numeric(lambda: weighted_bce(p, y, w), p)
    assert rel_error(weighted_bce_grad(p, y, w), num) < REL_TOL


@pytest.mark.parametrize("variant", ["acoustic_ann", "acoustic_cnn", "linguistic_ann", "linguistic_cnn"])
def test_whole_network_gradient(rng, variant):
    if variant.startswith("acoustic"):
        meta = {"n_features": 6}
        x = rng.standard_normal((4, 6))
    else:
        meta = {"embedding": rng.standard_normal((7, 3))}
        x = np.array([[0, 1, 2, 6, 3], [4, 4, 5, 1, 2], [0, 0, 0, 3, 1], [2, 3, 1, 5, 6]])
    net = build_network(variant, meta, seed=2, hidden=(5, 4), linguistic_hidden=4, filters=3)
    for _, p, _ in net.parameters():  # lift biases off zero so ReLUs are not tied
        p += 0.1 * rng.standard_normal(p.shape)
    net.layers[0].params.get("E", np.zeros((1, 1)))[0] = 0
    y = np.array([1.0, 0.0, 1.0, 0.0])
    w = ClassWeights(1.5, 0.5)

    def loss():
        return weighted_bce(net.forward(x)[:, 0], y, w)

    out = net.forward(x)[:, 0]
    net.backward(weighted_bce_grad(out, y, w)[:, None])
    for key, p, layer in net.parameters():
        analytic = layer.grads[key.rsplit(".", 1)[1]].copy()
        num = numeric(loss, p)
        if key.endswith("E"):
            analytic, num = analytic[1:], num[1:]
        assert rel_error(analytic, num) < REL_TOL, key


# -- loss / activation values

def test_bce_values():
    assert weighted_bce([1.0], [1]) == pytest.approx(-np.log(1 - 1e-7))
    assert weighted_bce([0.5], [1]) == pytest.approx(np.log(2))
    assert weighted_bce([0.5], [0], ClassWeights(1.0, 2.0)) == pytest.approx(2 * np.log(2))
    # the clamp bounds the worst case at about 16.1 per unit weight
    assert weighted_bce([0.0], [1]) == pytest.approx(-np.log(1e-7))


def test_unit_weights_equal_plain_cross_entropy(rng):
    p = rng.uniform(0.01, 0.99, 50)
    y = rng.integers(0, 2, 50)
    plain = -np.mean(y * np.log(p) + (1 - y) * np.log(1 - p))
    assert weighted_bce(p, y, UNIT_WEIGHTS) == pytest.approx(plain, rel=1e-12)


def test_bce_grad_zero_outside_clamp():
    g = weighted_bce_grad(np.array([0.0, 1.0, 0.5]), np.array([1.0, 0.0, 1.0]))
    assert g[0] == 0 and g[1] == 0 and g[2] < 0


def test_relu_values():
    assert relu(-3) == 0 and relu(2) == 2 and relu(0) == 0
    layer = ReLU()
    layer.forward(np.array([0.0]))
    assert layer.backward(np.array([1.0]))[0] == 0


def test_adam_first_step_is_lr_sign():
    p = {"w": np.array([1.0, -2.0, 3.0])}
    g = {"w": np.array([0.3, -5.0, 1e-3])}
    Adam(lr=0.01).step(p, g)
    np.testing.assert_allclose(p["w"], [1.0 - 0.01, -2.0 + 0.01, 3.0 - 0.01], atol=1e-7)


# -- architecture

def test_acoustic_ann_parameter_count():
    net = build_network("acoustic_ann", {"n_features": 136})
    assert net.n_parameters() == 136 * 128 + 128 + 128 * 64 + 64 + 64 * 32 + 32 + 32 + 1 == 27905


def test_conv_output_length(rng):
    layer = Conv1D(4, 7, 3, rng)
    assert layer.forward(np.zeros((2, 11, 4))).shape == (2, 9, 7)
    with pytest.raises(IncompatibleInputMeta):
        layer.forward(np.zeros((1, 2, 4)))


def test_all_padding_sequence_gives_bias_path(rng):
    net = build_network("linguistic_cnn", {"embedding": rng.standard_normal((9, 5))}, seed=1, filters=6)
    conv, dense = net.layers[1], net.layers[4]
    conv.params["b"][:] = rng.standard_normal(6)
    dense.params["b"][:] = 0.3
    pooled = np.maximum(conv.params["b"], 0)
    expected = 1 / (1 + np.exp(-(pooled @ dense.params["W"][:, 0] + 0.3)))
    out = net.predict_proba(np.zeros((3, 8), dtype=int))
    np.testing.assert_allclose(out, expected, rtol=1e-12)


def test_incompatible_meta():
    with pytest.raises(IncompatibleInputMeta):
        build_network("acoustic_ann", {})
    with pytest.raises(IncompatibleInputMeta):
        build_network("linguistic_cnn", {"n_features": 3})
    with pytest.raises(IncompatibleInputMeta):
        build_network("transformer", {"n_features": 3})


def test_max_pool_shift_only_touches_boundary(rng):
    net = build_network("linguistic_cnn", {"embedding": rng.standard_normal((12, 4))}, seed=0, filters=8)
    seq = rng.integers(1, 12, 10)
    conv_stack = net.layers[:3]

    def conv_out(ids):
        x = ids[None]
        for layer in conv_stack:
            x = layer.forward(x)
        return x[0]

    a = conv_out(np.r_[0, seq])
    b = conv_out(np.r_[seq, 0])
    # interior windows are identical, just shifted by one step
    np.testing.assert_allclose(a[1:], b[:-1])


# -- training

def blobs(n=200, seed=0):
    r = np.random.default_rng(seed)
    X = np.r_[r.normal(-2, 0.6, (n // 2, 2)), r.normal(2, 0.6, (n // 2, 2))]
    y = np.repeat([0, 1], n // 2)
    return X, y


def test_ann_separates_blobs():
    X, y = blobs()
    net = build_network("acoustic_ann", {"n_features": 2}, seed=0)
    model = train_network(net, X, y, TrainConfig(epochs=250, seed=0))
    assert np.mean(model.predict(X) == y) >= 0.99
    out = model.score(X)
    assert np.all((out > 0) & (out < 1))
    assert model.loss_trace[-1] < model.loss_trace[0]


def test_training_is_deterministic():
    X, y = blobs(64, seed=3)

    def run():
        net = build_network("acoustic_cnn", {"n_features": 2 + 3}, seed=4, filters=8)
        Xp = np.c_[X, X[:, :1] * X[:, 1:], X ** 2]
        return train_network(net, Xp, y, TrainConfig(epochs=5, seed=9)).loss_trace

    assert run() == run()


def test_loss_log_written():
    X, y = blobs(40)
    buf = io.StringIO()
    train_network(build_network("acoustic_ann", {"n_features": 2}), X, y, TrainConfig(epochs=3), loss_log=buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "epoch,loss" and len(lines) == 4


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_diverged_loss():
    X, y = blobs(20)
    X[0, 0] = np.inf
    with pytest.raises(DivergedLoss):
        train_network(build_network("acoustic_ann", {"n_features": 2}), X, y, TrainConfig(epochs=2))


@pytest.mark.parametrize("variant", ["acoustic_ann", "linguistic_cnn"])
def test_model_json_round_trip(rng, variant):
    if variant == "acoustic_ann":
        meta, X = {"n_features": 4}, rng.standard_normal((6, 4))
    else:
        meta, X = {"embedding": rng.standard_normal((10, 4))}, rng.integers(0, 10, (6, 7))
    net = build_network(variant, meta, seed=3, filters=5)
    model = NetworkModel(net, [0.7, 0.6])
    back = NetworkModel.from_dict(json.loads(json.dumps(model.to_dict())))
    np.testing.assert_array_equal(back.score(X), model.score(X))
    assert back.kind == model.kind and back.loss_trace == [0.7, 0.6]
