"""Class-weighted logistic regression, SMO support vector machine and random forest.

All three expose ``score(X)`` and ``predict(X)``. Scores of the logistic
model and the forest are probabilities thresholded at 0.5; the SVM's score is
its raw decision value, thresholded at 0.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyClass, NonFiniteFeature

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class ClassWeights:
    w_pos: float
    w_neg: float

    def __post_init__(self):
        if not (self.w_pos > 0 and self.w_neg > 0):
            raise ValueError("class weights must be positive")

    def per_example(self, y) -> np.ndarray:
        y = np.asarray(y)
        return np.where(y == 1, self.w_pos, self.w_neg).astype(float)


UNIT_WEIGHTS = ClassWeights(1.0, 1.0)


def balanced_class_weights(n_pos: int, n_neg: int) -> ClassWeights:
    """w_c = (n_pos + n_neg) / (2 n_c)."""
    if n_pos < 1 or n_neg < 1:
        raise EmptyClass(f"need both classes, got n_pos={n_pos}, n_neg={n_neg}")
    n = n_pos + n_neg
    return ClassWeights(n / (2.0 * n_pos), n / (2.0 * n_neg))


def weights_for_labels(y) -> ClassWeights:
    y = np.asarray(y)
    return balanced_class_weights(int((y == 1).sum()), int((y == 0).sum()))


def _check_xy(X, y=None):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("expected a 2-D feature matrix")
    if not np.all(np.isfinite(X)):
        raise NonFiniteFeature("feature matrix contains NaN or inf")
    if y is None:
        return X
    y = np.asarray(y).astype(int)
    if len(y) != len(X):
        raise ValueError("X and y lengths differ")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0/1")
    return X, y


@dataclass
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X) -> "Standardizer":
        X = np.asarray(X, dtype=float)
        std = X.std(axis=0)
        return cls(X.mean(axis=0), np.where(std > 1e-12, std, 1.0))

    def transform(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) / self.scale


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


# ------------------------------------------------------------ logistic model

def logistic_loss_and_grad(w, b, X, y, sample_weight, l2):
    """Class-weighted mean cross-entropy plus ``l2 * ||w||^2`` and its gradient."""
    z = X @ w + b
    p = sigmoid(z)
    # log(1 + e^z) - y z, stable form
    nll = np.logaddexp(0.0, z) - y * z
    n = len(y)
    loss = float(np.sum(sample_weight * nll) / n + l2 * np.dot(w, w))
    r = sample_weight * (p - y) / n
    return loss, X.T @ r + 2.0 * l2 * w, float(r.sum())


@dataclass
class LogisticModel:
    w: np.ndarray
    b: float
    l2: float = 1e-4
    loss_trace: list = field(default_factory=list)
    kind: str = "lr"
    threshold: float = 0.5

    def decision(self, X) -> np.ndarray:
        return _check_xy(X) @ self.w + self.b

    def score(self, X) -> np.ndarray:
        return sigmoid(self.decision(X))

    def predict(self, X) -> np.ndarray:
        return (self.score(X) > self.threshold).astype(int)

    def to_dict(self) -> dict:
        return {"w": self.w.tolist(), "b": self.b, "l2": self.l2}

    @classmethod
    def from_dict(cls, d) -> "LogisticModel":
        return cls(np.asarray(d["w"], dtype=float), float(d["b"]), d["l2"])


def train_logistic(X, y, weights: ClassWeights = UNIT_WEIGHTS, l2: float = 1e-4,
                   lr: float = 0.1, epochs: int = 500, seed: int = 0) -> LogisticModel:
    """Full-batch gradient descent on the class-weighted, L2-penalised log loss.

    Parameters start at zero so ``seed`` has no effect; it is accepted to keep
    the trainer signatures uniform.
    """
    X, y = _check_xy(X, y)
    sw = weights.per_example(y)
    w = np.zeros(X.shape[1])
    b = 0.0
    trace = []
    for _ in range(epochs):
        loss, gw, gb = logistic_loss_and_grad(w, b, X, y, sw, l2)
        trace.append(loss)
        w -= lr * gw
        b -= lr * gb
    trace.append(logistic_loss_and_grad(w, b, X, y, sw, l2)[0])
    return LogisticModel(w, b, l2, trace)


# ------------------------------------------------------------------- SVM (SMO)

TAU = 1e-12


def rbf_gamma(X) -> float:
    """Default RBF width: 1 / (n_features * variance of all entries)."""
    var = float(np.var(X))
    return 1.0 / (X.shape[1] * var) if var > 0 else 1.0


def kernel_matrix(A, B, kernel: str, gamma: float) -> np.ndarray:
    if kernel == "linear":
        return A @ B.T
    if kernel == "rbf":
        sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
        return np.exp(-gamma * np.maximum(sq, 0.0))
    raise ValueError(f"unknown kernel {kernel!r}")


@dataclass
class SVMModel:
    support_vectors: np.ndarray
    dual_coef: np.ndarray  # alpha_i * y_i, y in {-1, +1}
    rho: float
    kernel: str
    gamma: float
    converged: bool = True
    n_iter: int = 0
    alpha: np.ndarray | None = None  # full alpha vector, kept for auditing
    kind: str = "svm"
    threshold: float = 0.0

    def score(self, X) -> np.ndarray:
        X = _check_xy(X)
        if len(self.dual_coef) == 0:
            return np.full(len(X), -self.rho)
        K = kernel_matrix(X, self.support_vectors, self.kernel, self.gamma)
        return K @ self.dual_coef - self.rho

    def predict(self, X) -> np.ndarray:
        return (self.score(X) >= self.threshold).astype(int)

    def to_dict(self) -> dict:
        return {"support_vectors": self.support_vectors.tolist(), "dual_coef": self.dual_coef.tolist(),
                "rho": self.rho, "kernel": self.kernel, "gamma": self.gamma,
                "converged": self.converged, "n_iter": self.n_iter}

    @classmethod
    def from_dict(cls, d) -> "SVMModel":
        sv = np.asarray(d["support_vectors"], dtype=float)
        return cls(sv.reshape(len(d["dual_coef"]), -1), np.asarray(d["dual_coef"], dtype=float),
                   float(d["rho"]), d["kernel"], float(d["gamma"]), d["converged"], d["n_iter"])


def train_svm(X, y, weights: ClassWeights = UNIT_WEIGHTS, kernel: str = "rbf", C: float = 1.0,
              gamma: float | None = None, tol: float = 1e-3, max_iter: int = 100_000,
              seed: int = 0) -> SVMModel:
    """Soft-margin SVM dual solved by SMO with second-order working-set selection.

    The per-example box constraint is ``C * w_class``. Pair selection is
    deterministic, so ``seed`` is unused. If ``max_iter`` is exhausted the
    current iterate is returned with ``converged=False`` and a warning.
    """
    X, y01 = _check_xy(X, y)
    if y01.min() == y01.max():
        raise EmptyClass("SVM needs both classes")
    yy = np.where(y01 == 1, 1.0, -1.0)
    n = len(yy)
    if gamma is None:
        gamma = rbf_gamma(X)
    K = kernel_matrix(X, X, kernel, gamma)
    Cb = C * weights.per_example(y01)
    QD = np.diag(K).copy()
    alpha = np.zeros(n)
    G = -np.ones(n)  # gradient of 0.5 a'Qa - e'a

    converged = False
    it = 0
    while it < max_iter:
        v = -yy * G
        up = ((yy > 0) & (alpha < Cb)) | ((yy < 0) & (alpha > 0))
        low = ((yy > 0) & (alpha > 0)) | ((yy < 0) & (alpha < Cb))
        if not up.any() or not low.any():
            converged = True
            break
        v_up = np.where(up, v, -np.inf)
        i = int(np.argmax(v_up))
        m = v_up[i]
        M = np.min(np.where(low, v, np.inf))
        if m - M < tol:
            converged = True
            break
        b = m - v
        a = QD[i] + QD - 2.0 * K[i]
        a = np.where(a > 0, a, TAU)
        obj = np.where(low & (b > 0), -(b * b) / a, np.inf)
        j = int(np.argmin(obj))

        Ci, Cj = Cb[i], Cb[j]
        ai_old, aj_old = alpha[i], alpha[j]
        Qij = yy[i] * yy[j] * K[i, j]
        if yy[i] != yy[j]:
            quad = QD[i] + QD[j] + 2.0 * Qij
            delta = (-G[i] - G[j]) / max(quad, TAU)
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            elif alpha[i] < 0:
                alpha[i] = 0.0
                alpha[j] = -diff
            if diff > Ci - Cj:
                if alpha[i] > Ci:
                    alpha[i] = Ci
                    alpha[j] = Ci - diff
            elif alpha[j] > Cj:
                alpha[j] = Cj
                alpha[i] = Cj + diff
        else:
            quad = QD[i] + QD[j] - 2.0 * Qij
            delta = (G[i] - G[j]) / max(quad, TAU)
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > Ci:
                if alpha[i] > Ci:
                    alpha[i] = Ci
                    alpha[j] = total - Ci
            elif alpha[j] < 0:
                alpha[j] = 0.0
                alpha[i] = total
            if total > Cj:
                if alpha[j] > Cj:
                    alpha[j] = Cj
                    alpha[i] = total - Cj
            elif alpha[i] < 0:
                alpha[i] = 0.0
                alpha[j] = total
        d_i = alpha[i] - ai_old
        d_j = alpha[j] - aj_old
        G += yy * (yy[i] * K[:, i] * d_i + yy[j] * K[:, j] * d_j)
        it += 1

    if not converged:
        warnings.warn(f"SMO did not converge within {max_iter} iterations", RuntimeWarning)

    yG = yy * G
    at_upper = alpha >= Cb
    at_lower = alpha <= 0
    free = ~at_upper & ~at_lower
    if free.any():
        rho = float(yG[free].mean())
    else:
        ub_mask = (at_upper & (yy < 0)) | (at_lower & (yy > 0))
        lb_mask = (at_upper & (yy > 0)) | (at_lower & (yy < 0))
        ub = yG[ub_mask].min() if ub_mask.any() else np.inf
        lb = yG[lb_mask].max() if lb_mask.any() else -np.inf
        rho = float((ub + lb) / 2.0)

    sv = alpha > 0
    return SVMModel(X[sv].copy(), (alpha * yy)[sv], rho, kernel, float(gamma), converged, it, alpha)


# ---------------------------------------------------------------- random forest

LEAF = -1


@dataclass
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # class vote (0/1) at leaves

    def predict(self, X) -> np.ndarray:
        node = np.zeros(len(X), dtype=int)
        active = self.feature[node] != LEAF
        while active.any():
            idx = np.nonzero(active)[0]
            nd = node[idx]
            go_left = X[idx, self.feature[nd]] <= self.threshold[nd]
            node[idx] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] != LEAF
        return self.value[node]

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("feature", "threshold", "left", "right", "value")}

    @classmethod
    def from_dict(cls, d) -> "Tree":
        return cls(np.asarray(d["feature"], dtype=int), np.asarray(d["threshold"], dtype=float),
                   np.asarray(d["left"], dtype=int), np.asarray(d["right"], dtype=int),
                   np.asarray(d["value"], dtype=int))


def _best_split(x, y):
    """Best Gini threshold on one feature; returns (weighted impurity, threshold) or None."""
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    n = len(xs)
    cut = np.nonzero(xs[1:] > xs[:-1])[0]  # split after position cut
    if cut.size == 0:
        return None
    pos_left = np.cumsum(ys)[cut]
    n_left = cut + 1.0
    n_right = n - n_left
    pos_right = ys.sum() - pos_left
    p_l = pos_left / n_left
    p_r = pos_right / n_right
    impurity = n_left * 2 * p_l * (1 - p_l) + n_right * 2 * p_r * (1 - p_r)
    k = int(np.argmin(impurity))
    return impurity[k], 0.5 * (xs[cut[k]] + xs[cut[k] + 1])


def build_tree(X, y, max_features: int, rng: np.random.Generator) -> Tree:
    """CART with Gini impurity, grown until nodes are pure or hold fewer than 2 samples."""
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node():
        for lst, v in ((feature, LEAF), (threshold, 0.0), (left, LEAF), (right, LEAF), (value, 0)):
            lst.append(v)
        return len(feature) - 1

    root = new_node()
    stack = [(root, np.arange(len(y)))]
    n_feat = X.shape[1]
    while stack:
        node, idx = stack.pop()
        yn = y[idx]
        n_pos = int(yn.sum())
        value[node] = int(2 * n_pos >= len(yn))
        if len(idx) < 2 or n_pos == 0 or n_pos == len(yn):
            continue
        best = None
        perm = rng.permutation(n_feat)
        # widen the search past max_features only when no candidate can split
        for start in range(0, n_feat, max_features):
            for f in perm[start:start + max_features]:
                res = _best_split(X[idx, f], yn)
                if res is not None and (best is None or res[0] < best[0]):
                    best = (res[0], res[1], int(f))
            if best is not None:
                break
        if best is None:
            continue
        _, thr, f = best
        mask = X[idx, f] <= thr
        feature[node], threshold[node] = f, thr
        l_node, r_node = new_node(), new_node()
        left[node], right[node] = l_node, r_node
        stack.append((r_node, idx[~mask]))
        stack.append((l_node, idx[mask]))

    return Tree(np.array(feature), np.array(threshold), np.array(left), np.array(right), np.array(value))


@dataclass
class ForestModel:
    trees: list
    oob_masks: list = field(default_factory=list)
    kind: str = "rf"
    threshold: float = 0.5

    def votes(self, X) -> np.ndarray:
        X = _check_xy(X)
        return np.stack([t.predict(X) for t in self.trees])

    def score(self, X) -> np.ndarray:
        """Fraction of trees voting for class 1."""
        return self.votes(X).mean(axis=0)

    def predict(self, X) -> np.ndarray:
        return (self.score(X) >= self.threshold).astype(int)

    def oob_score(self, X) -> np.ndarray:
        """Out-of-bag vote fraction; NaN for examples that were in every bootstrap."""
        votes = self.votes(X).astype(float)
        oob = np.stack(self.oob_masks)
        counts = oob.sum(axis=0)
        with np.errstate(invalid="ignore"):
            return np.where(counts > 0, (votes * oob).sum(axis=0) / np.maximum(counts, 1), np.nan)

    def to_dict(self) -> dict:
        return {"trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_dict(cls, d) -> "ForestModel":
        return cls([Tree.from_dict(t) for t in d["trees"]])


def train_random_forest(X, y, weights: ClassWeights = UNIT_WEIGHTS, n_trees: int = 5,
                        max_features: int | None = None, seed: int = 0) -> ForestModel:
    """Bootstrap-aggregated CART trees; the bootstrap draws examples with probability ∝ class weight."""
    X, y = _check_xy(X, y)
    rng = np.random.default_rng(seed)
    n, F = X.shape
    if max_features is None:
        max_features = max(1, int(np.sqrt(F)))
    p = weights.per_example(y)
    p = p / p.sum()
    trees, oob = [], []
    for _ in range(n_trees):
        idx = rng.choice(n, size=n, replace=True, p=p)
        in_bag = np.zeros(n, dtype=bool)
        in_bag[idx] = True
        trees.append(build_tree(X[idx], y[idx], max_features, rng))
        oob.append(~in_bag)
    return ForestModel(trees, oob)


# -------------------------------------------------------------- serialisation

_CLASSICAL = {"lr": LogisticModel, "svm": SVMModel, "rf": ForestModel}


def model_to_dict(model, hyperparameters: dict | None = None) -> dict:
    """Versioned JSON-ready document: kind tag, hyperparameters, flattened parameters."""
    return {"format_version": MODEL_FORMAT_VERSION, "kind": model.kind,
            "threshold": model.threshold, "hyperparameters": hyperparameters or {},
            "parameters": model.to_dict()}


def model_from_dict(doc: dict):
    from . import neural  # deferred: neural imports this module

    if doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format {doc.get('format_version')!r}")
    kind = doc["kind"]
    if kind in _CLASSICAL:
        return _CLASSICAL[kind].from_dict(doc["parameters"])
    return neural.NetworkModel.from_dict(doc["parameters"])
