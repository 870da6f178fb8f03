"""A small numpy network engine: layers with hand-written backward passes,
Adam, class-weighted binary cross-entropy, and the four classifier variants
(acoustic/linguistic ANN and CNN).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .classical import UNIT_WEIGHTS, ClassWeights
from .errors import DivergedLoss, IncompatibleInputMeta

P_CLAMP = 1e-7
VARIANTS = ("acoustic_ann", "linguistic_ann", "acoustic_cnn", "linguistic_cnn")


def glorot_uniform(rng, fan_in, fan_out, shape, dtype):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Layer:
    kind = "layer"

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}

    def forward(self, x):
        raise NotImplementedError

    def backward(self, dout):
        raise NotImplementedError

    def config(self) -> dict:
        return {}


class Dense(Layer):
    kind = "dense"

    def __init__(self, n_in, n_out, rng, dtype=np.float64):
        super().__init__()
        self.params = {"W": glorot_uniform(rng, n_in, n_out, (n_in, n_out), dtype),
                       "b": np.zeros(n_out, dtype=dtype)}

    def forward(self, x):
        self.x = x
        return x @ self.params["W"] + self.params["b"]

    def backward(self, dout):
        self.grads["W"] = self.x.T @ dout
        self.grads["b"] = dout.sum(axis=0)
        return dout @ self.params["W"].T

    def config(self):
        return {"units": int(self.params["W"].shape[1])}


class ReLU(Layer):
    """max(0, x); the subgradient at 0 is taken as 0."""

    kind = "relu"

    def forward(self, x):
        self.mask = x > 0
        return np.maximum(x, 0)

    def backward(self, dout):
        return np.multiply(dout, self.mask, dtype=dout.dtype)


class Sigmoid(Layer):
    kind = "sigmoid"

    def forward(self, x):
        self.out = 0.5 * (1.0 + np.tanh(0.5 * x))
        return self.out

    def backward(self, dout):
        return dout * self.out * (1.0 - self.out)


class Embedding(Layer):
    """Lookup table initialised from a pretrained matrix; row 0 (padding) stays zero."""

    kind = "embedding"

    def __init__(self, matrix, trainable=True, dtype=np.float64):
        super().__init__()
        self.params = {"E": np.array(matrix, dtype=dtype)}
        self.params["E"][0] = 0
        self.trainable = trainable

    def forward(self, ids):
        self.ids = np.asarray(ids, dtype=np.int64)
        return self.params["E"][self.ids]

    def backward(self, dout):
        E = self.params["E"]
        g = np.zeros_like(E)
        if self.trainable:
            flat = self.ids.ravel()
            onehot = sparse.csr_matrix((np.ones(flat.size, dtype=E.dtype), (flat, np.arange(flat.size))),
                                       shape=(E.shape[0], flat.size))
            g = np.asarray(onehot @ dout.reshape(-1, E.shape[1]), dtype=E.dtype)
            g[0] = 0
        self.grads["E"] = g
        return None

    def config(self):
        return {"vocab_size": int(self.params["E"].shape[0]), "dim": int(self.params["E"].shape[1])}


class MaskedMeanPool(Layer):
    """Average over time of the positions whose token id is non-zero."""

    kind = "mean_pool"

    def __init__(self, embedding: Embedding):
        super().__init__()
        self.embedding = embedding

    def forward(self, x):
        mask = (self.embedding.ids != 0).astype(x.dtype)
        self.weights = mask / np.maximum(mask.sum(axis=1, keepdims=True), 1)
        return np.einsum("bt,btd->bd", self.weights, x)

    def backward(self, dout):
        return self.weights[:, :, None] * dout[:, None, :]


class ToSequence(Layer):
    """(batch, features) -> (batch, features, 1) so a 1-D conv can slide over the features."""

    kind = "to_sequence"

    def forward(self, x):
        return x[:, :, None]

    def backward(self, dout):
        return dout[:, :, 0]


class Conv1D(Layer):
    """Valid 1-D convolution over (batch, time, channels)."""

    kind = "conv1d"

    def __init__(self, in_channels, filters, width, rng, dtype=np.float64):
        super().__init__()
        self.width = width
        self.in_channels = in_channels
        self.params = {"W": glorot_uniform(rng, width * in_channels, width * filters,
                                           (width * in_channels, filters), dtype),
                       "b": np.zeros(filters, dtype=dtype)}

    def forward(self, x):
        B, L, C = x.shape
        if L < self.width:
            raise IncompatibleInputMeta(f"sequence length {L} shorter than kernel width {self.width}")
        win = np.lib.stride_tricks.sliding_window_view(x, self.width, axis=1)  # (B, T, C, k)
        self.cols = np.ascontiguousarray(win.transpose(0, 1, 3, 2)).reshape(B, L - self.width + 1, -1)
        self.in_len = L
        T = L - self.width + 1
        out = self.cols.reshape(B * T, -1) @ self.params["W"]
        out += self.params["b"]
        return out.reshape(B, T, -1)

    def backward(self, dout):
        B, T, F = dout.shape
        kc = self.cols.shape[-1]
        d2 = dout.reshape(-1, F)
        cols2 = self.cols.reshape(-1, kc)
        W = self.params["W"]
        self.grads["b"] = d2.sum(axis=0)
        live = np.flatnonzero(d2.ravel() != 0)
        if live.size < 0.1 * d2.size:
            # typical after global max pooling: one live position per (example, filter)
            ds = sparse.csr_matrix((d2.ravel()[live], (live // F, live % F)), shape=d2.shape)
            self.grads["W"] = np.asarray((ds.T @ cols2).T, dtype=W.dtype)
            dcols = np.asarray(ds @ W.T, dtype=W.dtype)
        else:
            self.grads["W"] = cols2.T @ d2
            dcols = d2 @ W.T
        dcols = dcols.reshape(B, T, self.width, self.in_channels)
        dx = np.zeros((B, self.in_len, self.in_channels), dtype=dout.dtype)
        for s in range(self.width):
            dx[:, s:s + T] += dcols[:, :, s]
        return dx

    def config(self):
        return {"filters": int(self.params["W"].shape[1]), "width": self.width,
                "in_channels": self.in_channels}


class GlobalMaxPool(Layer):
    kind = "global_max_pool"

    def forward(self, x):
        self.shape = x.shape
        self.arg = x.argmax(axis=1)  # (B, F)
        return np.take_along_axis(x, self.arg[:, None, :], axis=1)[:, 0, :]

    def backward(self, dout):
        dx = np.zeros(self.shape, dtype=dout.dtype)
        np.put_along_axis(dx, self.arg[:, None, :], dout[:, None, :], axis=1)
        return dx


class Network:
    def __init__(self, layers, variant="custom", meta=None, dtype=np.float64):
        self.layers = list(layers)
        self.variant = variant
        self.meta = dict(meta or {})
        self.dtype = np.dtype(dtype)

    def forward(self, x):
        if not (self.layers and isinstance(self.layers[0], Embedding)):
            x = np.asarray(x, dtype=self.dtype)
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, dout):
        for layer in reversed(self.layers):
            dout = layer.backward(dout)
        return dout

    def parameters(self):
        """(key, param, layer) triples in a stable order."""
        for i, layer in enumerate(self.layers):
            for name in sorted(layer.params):
                yield f"{i}.{layer.kind}.{name}", layer.params[name], layer

    def n_parameters(self) -> int:
        return sum(p.size for _, p, _ in self.parameters())

    def predict_proba(self, x, batch_size=256) -> np.ndarray:
        x = np.asarray(x)
        outs = [self.forward(x[s:s + batch_size])[:, 0] for s in range(0, len(x), batch_size)]
        return np.concatenate(outs).astype(np.float64) if outs else np.zeros(0)


# ------------------------------------------------------------------- loss

def weighted_bce(p, y, weights: ClassWeights = UNIT_WEIGHTS) -> float:
    """Mean of -w_y [y log p + (1 - y) log(1 - p)], with p clamped to [1e-7, 1 - 1e-7]."""
    p = np.clip(np.asarray(p, dtype=np.float64), P_CLAMP, 1.0 - P_CLAMP)
    y = np.asarray(y, dtype=np.float64)
    w = np.where(y == 1, weights.w_pos, weights.w_neg)
    return float(np.mean(-w * (y * np.log(p) + (1.0 - y) * np.log(1.0 - p))))


def weighted_bce_grad(p, y, weights: ClassWeights = UNIT_WEIGHTS) -> np.ndarray:
    """d(weighted_bce)/dp; zero where the clamp is active."""
    p = np.asarray(p)
    y = np.asarray(y, dtype=p.dtype)
    w = np.where(y == 1, weights.w_pos, weights.w_neg).astype(p.dtype)
    inside = (p > P_CLAMP) & (p < 1.0 - P_CLAMP)
    pc = np.clip(p, P_CLAMP, 1.0 - P_CLAMP)
    g = -w * (y / pc - (1.0 - y) / (1.0 - pc)) / len(p)
    return np.where(inside, g, 0).astype(p.dtype)


def relu(x):
    return np.maximum(0, x)


# ------------------------------------------------------------------ optimiser

class Adam:
    def __init__(self, lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for k, p in params.items():
            g = grads[k]
            if k not in self.m:
                self.m[k] = np.zeros_like(p)
                self.v[k] = np.zeros_like(p)
            m, v = self.m[k], self.v[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


# ------------------------------------------------------------------ networks

def build_network(variant: str, input_meta: dict, seed: int = 0, dtype=np.float64,
                  hidden=(128, 64, 32), linguistic_hidden: int = 128,
                  filters: int = 250, kernel_width: int = 3) -> Network:
    """Construct one of the four classifier variants.

    ``input_meta`` carries ``n_features`` for the acoustic variants and
    ``embedding`` (a ``(V + 1, D)`` array) for the linguistic ones.
    """
    rng = np.random.default_rng(seed)
    dtype = np.dtype(dtype)
    if variant not in VARIANTS:
        raise IncompatibleInputMeta(f"unknown variant {variant!r}")
    if variant.startswith("acoustic"):
        n = input_meta.get("n_features")
        if not n or n < 1:
            raise IncompatibleInputMeta(f"{variant} needs a positive n_features")
        meta = {"n_features": int(n)}
        if variant == "acoustic_ann":
            layers, width = [], n
            for units in hidden:
                layers += [Dense(width, units, rng, dtype), ReLU()]
                width = units
            layers += [Dense(width, 1, rng, dtype), Sigmoid()]
        else:
            if n < kernel_width:
                raise IncompatibleInputMeta("feature vector shorter than the kernel")
            layers = [ToSequence(), Conv1D(1, filters, kernel_width, rng, dtype), ReLU(),
                      GlobalMaxPool(), Dense(filters, 1, rng, dtype), Sigmoid()]
    else:
        emb = input_meta.get("embedding")
        if emb is None:
            raise IncompatibleInputMeta(f"{variant} needs an embedding matrix")
        emb = np.asarray(getattr(emb, "rows", emb))
        if emb.ndim != 2:
            raise IncompatibleInputMeta("embedding matrix must be 2-D")
        dim = emb.shape[1]
        embedding = Embedding(emb, trainable=True, dtype=dtype)
        meta = {"vocab_size": int(emb.shape[0]), "dim": int(dim)}
        if variant == "linguistic_ann":
            layers = [embedding, MaskedMeanPool(embedding), Dense(dim, linguistic_hidden, rng, dtype), ReLU(),
                      Dense(linguistic_hidden, 1, rng, dtype), Sigmoid()]
        else:
            layers = [embedding, Conv1D(dim, filters, kernel_width, rng, dtype), ReLU(),
                      GlobalMaxPool(), Dense(filters, 1, rng, dtype), Sigmoid()]
    meta.update(hidden=list(hidden), linguistic_hidden=linguistic_hidden,
                filters=filters, kernel_width=kernel_width)
    return Network(layers, variant, meta, dtype)


@dataclass
class TrainConfig:
    epochs: int = 250
    batch_size: int = 32
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")


@dataclass
class NetworkModel:
    network: Network
    loss_trace: list = field(default_factory=list)
    threshold: float = 0.5

    @property
    def kind(self) -> str:
        return "ann" if self.network.variant.endswith("ann") else "cnn"

    def score(self, X) -> np.ndarray:
        return self.network.predict_proba(X)

    def predict(self, X) -> np.ndarray:
        return (self.score(X) > self.threshold).astype(int)

    def to_dict(self) -> dict:
        net = self.network
        return {"variant": net.variant, "meta": net.meta, "dtype": net.dtype.name,
                "params": {k: p.tolist() for k, p, _ in net.parameters()},
                "loss_trace": list(self.loss_trace)}

    @classmethod
    def from_dict(cls, d) -> "NetworkModel":
        meta = dict(d["meta"])
        build_meta = dict(meta)
        if "vocab_size" in meta:
            build_meta["embedding"] = np.zeros((meta["vocab_size"], meta["dim"]))
        net = build_network(d["variant"], build_meta, dtype=d["dtype"], hidden=tuple(meta["hidden"]),
                            linguistic_hidden=meta["linguistic_hidden"], filters=meta["filters"],
                            kernel_width=meta["kernel_width"])
        for key, p, _ in net.parameters():
            p[...] = np.asarray(d["params"][key], dtype=p.dtype).reshape(p.shape)
        return cls(net, d.get("loss_trace", []))


def train_network(network: Network, X, y, config: TrainConfig = TrainConfig(),
                  weights: ClassWeights = UNIT_WEIGHTS, loss_log=None) -> NetworkModel:
    """Mini-batch Adam on weighted BCE, reshuffling every epoch with a seeded RNG.

    ``loss_log``, if given, is a writable text stream that receives an
    ``epoch,loss`` CSV trace.
    """
    X = np.asarray(X)
    y = np.asarray(y, dtype=network.dtype)
    n = len(y)
    rng = np.random.default_rng(config.seed)
    opt = Adam(config.lr, config.beta1, config.beta2, config.eps)
    params = {k: p for k, p, _ in network.parameters()}
    owners = {k: (layer, k.rsplit(".", 1)[1]) for k, _, layer in network.parameters()}
    trace = []
    if loss_log is not None:
        loss_log.write("epoch,loss\n")
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            out = network.forward(X[idx])[:, 0]
            yb = y[idx]
            total += weighted_bce(out, yb, weights) * len(idx)
            network.backward(weighted_bce_grad(out, yb, weights)[:, None])
            grads = {k: owners[k][0].grads[owners[k][1]] for k in params}
            opt.step(params, grads)
        epoch_loss = total / n
        if not np.isfinite(epoch_loss):
            raise DivergedLoss(f"loss became {epoch_loss} at epoch {epoch + 1}")
        trace.append(epoch_loss)
        if loss_log is not None:
            loss_log.write(f"{epoch + 1},{epoch_loss!r}\n")
    return NetworkModel(network, trace)
