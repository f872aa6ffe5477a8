"""GraphSAGE + linear fusion classifier with hand-written backprop and Adam.

Each beat is a graph of 20 scalar-feature nodes.  One mean-aggregator
GraphSAGE layer embeds every node, a dense layer embeds the raw feature
vector, and the flattened node embeddings are concatenated with the dense
embedding before the output layer.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .graph import GraphSpec

log = logging.getLogger(__name__)

CLASSES = ("N", "S", "V")
PARAM_NAMES = ("w_sage", "b_sage", "w_lin", "b_lin", "w_out", "b_out")


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    gnn_hidden: int = 32
    lin_hidden: int = 64
    n_classes: int = 3
    learning_rate: float = 0.01
    epochs: int = 700
    batch_size: int = 512  # <= 0 means full batch
    seed: int = 0
    class_weights: bool = False

    def __post_init__(self):
        if self.gnn_hidden < 1 or self.lin_hidden < 1:
            raise ValueError("hidden sizes must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning rate must be positive")


@dataclass
class ModelParams:
    w_sage: np.ndarray  # (h_g, 2): [self, neighbour mean]
    b_sage: np.ndarray  # (h_g,)
    w_lin: np.ndarray   # (h_l, n_nodes)
    b_lin: np.ndarray   # (h_l,)
    w_out: np.ndarray   # (n_classes, n_nodes * h_g + h_l)
    b_out: np.ndarray   # (n_classes,)

    def arrays(self) -> dict[str, np.ndarray]:
        return {n: getattr(self, n) for n in PARAM_NAMES}

    def copy(self) -> "ModelParams":
        return ModelParams(**{n: a.copy() for n, a in self.arrays().items()})

    @classmethod
    def zeros(cls, config: ModelConfig, n_nodes: int = 20) -> "ModelParams":
        hg, hl, k = config.gnn_hidden, config.lin_hidden, config.n_classes
        return cls(np.zeros((hg, 2)), np.zeros(hg), np.zeros((hl, n_nodes)), np.zeros(hl),
                   np.zeros((k, n_nodes * hg + hl)), np.zeros(k))

    @classmethod
    def glorot(cls, config: ModelConfig, rng: np.random.Generator, n_nodes: int = 20) -> "ModelParams":
        p = cls.zeros(config, n_nodes)
        for name in ("w_sage", "w_lin", "w_out"):
            fan_out, fan_in = getattr(p, name).shape
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            setattr(p, name, rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        return p


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params: ModelParams) -> "AdamState":
        return cls({n: np.zeros_like(a) for n, a in params.arrays().items()},
                   {n: np.zeros_like(a) for n, a in params.arrays().items()})


def _as_batch(x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 3:  # (B, n, 1) node features
        x = x[..., 0]
    if x.ndim == 1:
        return x[None, :], True
    if x.ndim == 2 and x.shape[1] == 1:  # one graph as (n, 1)
        return x.T, True
    return x, False


def _aggregator(graph) -> np.ndarray:
    return graph.mean_aggregator() if isinstance(graph, GraphSpec) else np.asarray(graph)


def sage_forward(node_features, graph, w_sage: np.ndarray, b_sage: np.ndarray) -> np.ndarray:
    """Node embeddings ``ReLU(W [x_v; mean_{u in N(v)} x_u] + b)``, shape (n, h) or (B, n, h)."""
    X, single = _as_batch(node_features)
    nbr = X @ _aggregator(graph).T
    pre = X[:, :, None] * w_sage[:, 0] + nbr[:, :, None] * w_sage[:, 1] + b_sage
    h = np.maximum(pre, 0.0)
    return h[0] if single else h


def _forward(X: np.ndarray, M: np.ndarray, p: ModelParams):
    nbr = X @ M.T
    pre_g = X[:, :, None] * p.w_sage[:, 0] + nbr[:, :, None] * p.w_sage[:, 1] + p.b_sage
    g = np.maximum(pre_g, 0.0).reshape(X.shape[0], -1)
    pre_l = X @ p.w_lin.T + p.b_lin
    z = np.concatenate([g, np.maximum(pre_l, 0.0)], axis=1)
    logits = z @ p.w_out.T + p.b_out
    return logits, (X, nbr, pre_g, pre_l, z)


def fusion_forward(node_features, graph, params: ModelParams) -> np.ndarray:
    """Class logits for one graph (n_classes,) or a batch (B, n_classes)."""
    X, single = _as_batch(node_features)
    logits, _ = _forward(X, _aggregator(graph), params)
    return logits[0] if single else logits


def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits, label: int) -> tuple[float, np.ndarray]:
    """Loss ``-log softmax(logits)[label]`` and its gradient w.r.t. the logits."""
    z = np.asarray(logits, dtype=np.float64)
    shifted = z - z.max()
    logsumexp = np.log(np.sum(np.exp(shifted)))
    loss = float(logsumexp - shifted[label])
    grad = np.exp(shifted - logsumexp)
    grad[label] -= 1.0
    return loss, grad


def batch_cross_entropy(logits: np.ndarray, labels: np.ndarray,
                        sample_weights: np.ndarray | None = None) -> tuple[float, np.ndarray]:
    """Mean (or weight-normalized) loss over a batch and d(loss)/d(logits)."""
    z = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1))
    idx = np.arange(z.shape[0])
    losses = lse - z[idx, labels]
    grad = np.exp(z - lse[:, None])
    grad[idx, labels] -= 1.0
    if sample_weights is None:
        return float(losses.mean()), grad / z.shape[0]
    total = sample_weights.sum()
    return float((sample_weights * losses).sum() / total), grad * (sample_weights / total)[:, None]


def backward(cache, dlogits: np.ndarray, params: ModelParams) -> dict[str, np.ndarray]:
    """Parameter gradients given d(loss)/d(logits) for every sample of the batch.

    ``dlogits`` must already carry the batch averaging.  The ReLU derivative
    at exactly zero is taken as zero.
    """
    X, nbr, pre_g, pre_l, z = cache
    B, n = X.shape
    hg = params.w_sage.shape[0]
    dz = dlogits @ params.w_out
    dpre_g = dz[:, :n * hg].reshape(B, n, hg) * (pre_g > 0)
    dpre_l = dz[:, n * hg:] * (pre_l > 0)
    return {
        "w_sage": np.stack([np.einsum("bnh,bn->h", dpre_g, X),
                            np.einsum("bnh,bn->h", dpre_g, nbr)], axis=1),
        "b_sage": dpre_g.sum(axis=(0, 1)),
        "w_lin": dpre_l.T @ X,
        "b_lin": dpre_l.sum(axis=0),
        "w_out": dlogits.T @ z,
        "b_out": dlogits.sum(axis=0),
    }


def loss_and_grads(params: ModelParams, X, labels, graph,
                   sample_weights: np.ndarray | None = None) -> tuple[float, dict[str, np.ndarray]]:
    X, _ = _as_batch(X)
    logits, cache = _forward(X, _aggregator(graph), params)
    loss, dlogits = batch_cross_entropy(logits, np.asarray(labels), sample_weights)
    return loss, backward(cache, dlogits, params)


def adam_step(params: ModelParams, grads: dict[str, np.ndarray], state: AdamState,
              lr: float = 0.01) -> tuple[ModelParams, AdamState]:
    """One bias-corrected Adam update; inputs are left untouched."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient in {name} at step {state.t + 1}")
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    new, m_new, v_new = {}, {}, {}
    for name, theta in params.arrays().items():
        g = grads[name]
        m = b1 * state.m[name] + (1 - b1) * g
        v = b2 * state.v[name] + (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        new[name] = theta - lr * m_hat / (np.sqrt(v_hat) + state.eps)
        m_new[name], v_new[name] = m, v
    return ModelParams(**new), AdamState(m_new, v_new, t, b1, b2, state.eps)


def encode_labels(labels) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.dtype.kind in "iu":
        return labels.astype(np.int64)
    lookup = {c: i for i, c in enumerate(CLASSES)}
    return np.array([lookup[str(c)] for c in labels], dtype=np.int64)


def inverse_frequency_weights(y: np.ndarray, n_classes: int) -> np.ndarray:
    counts = np.bincount(y, minlength=n_classes).astype(np.float64)
    return np.where(counts > 0, y.size / (n_classes * np.maximum(counts, 1)), 0.0)


@dataclass
class TrainResult:
    params: ModelParams
    loss_history: list[float] = field(default_factory=list)


def train(X, labels, graph: GraphSpec, config: ModelConfig = ModelConfig(),
          epochs: int | None = None) -> TrainResult:
    """Mini-batch Adam training, deterministic for a given (seed, data, config)."""
    X, _ = _as_batch(X)
    y = encode_labels(labels)
    n, n_nodes = X.shape
    M = _aggregator(graph)
    rng = np.random.default_rng(config.seed)
    params = ModelParams.glorot(config, rng, n_nodes)
    state = AdamState.zeros_like(params)
    class_w = inverse_frequency_weights(y, config.n_classes) if config.class_weights else None
    bs = n if config.batch_size <= 0 else min(config.batch_size, n)
    history = []
    for epoch in range(config.epochs if epochs is None else epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, bs):
            idx = order[start:start + bs]
            xb, yb = X[idx], y[idx]
            logits, cache = _forward(xb, M, params)
            w = class_w[yb] if class_w is not None else None
            loss, dlogits = batch_cross_entropy(logits, yb, w)
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}")
            params, state = adam_step(params, backward(cache, dlogits, params), state, config.learning_rate)
            total += loss * idx.size
        history.append(total / n)
        if epoch % 50 == 0:
            log.debug("epoch %d loss %.6f", epoch, history[-1])
    return TrainResult(params, history)


def predict_logits(params: ModelParams, graph, X) -> np.ndarray:
    return fusion_forward(X, graph, params)


def predict(params: ModelParams, graph, X) -> np.ndarray:
    """Class indices (ties resolve to the lowest index)."""
    logits = np.atleast_2d(fusion_forward(X, graph, params))
    return np.argmax(logits, axis=1)


# ---------------------------------------------------------------- checkpoints

def save_checkpoint(path: str | Path, params: ModelParams, config: ModelConfig, graph_digest: str,
                    loss_history: list[float]) -> None:
    doc = {
        "config": asdict(config),
        "graph_sha256": graph_digest,
        "params": {n: {"shape": list(a.shape), "data": a.ravel().tolist()} for n, a in params.arrays().items()},
        "loss_history": list(loss_history),
    }
    Path(path).write_text(json.dumps(doc, indent=1))


def load_checkpoint(path: str | Path) -> tuple[ModelParams, ModelConfig, str, list[float]]:
    doc = json.loads(Path(path).read_text())
    params = ModelParams(**{n: np.array(d["data"], dtype=np.float64).reshape(d["shape"])
                            for n, d in doc["params"].items()})
    return params, ModelConfig(**doc["config"]), doc["graph_sha256"], doc["loss_history"]
