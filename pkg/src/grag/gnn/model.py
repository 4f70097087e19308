"""Edge-weighted GCN reranker with hand-written reverse mode.

Shapes, for one question with ``n`` documents:

    X  (n, d)     node features, row ``i`` is document ``i``
    A  (n, n)     0/1 symmetric adjacency, zero diagonal
    E  (n, n, 2)  edge features; ``E[u, v]`` weights the message u -> v

Layer ``l`` (row-vector convention)::

    S[u, v]  = A[u, v] * (E[u, v, 0] + E[u, v, 1])
    agg[v]   = sum_u S[u, v] * x[u] / deg(v)          (0 when deg(v) == 0)
    x'[v]    = relu(x[v] @ W_self + agg[v] @ W_nbr + b)   (no relu on the last layer)
    m[u]     = sum_w A[w, u] * E[w, u] / deg(u)
    E'[u, v] = A[u, v] * relu(W_e @ E[u, v] + U_e @ m[u] + b_e)
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from grag.docgraph import DocumentGraph
from grag.encoder import EmbeddingSet

PARAM_NAMES = ("W_self", "W_nbr", "b", "W_e", "U_e", "b_e")
HIDDEN_DIMS = (8, 64, 128)
DROPOUT_RATES = (0.1, 0.2, 0.4)


class DimMismatch(ValueError):
    pass


class StaleCache(RuntimeError):
    pass


def glorot(rng: np.random.Generator, d_in: int, d_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (d_in + d_out))
    return rng.uniform(-bound, bound, size=(d_in, d_out))


@dataclass
class GcnModel:
    layers: list[dict[str, np.ndarray]]
    dropout_rate: float = 0.1
    seed: int = 0
    message_passing: bool = True
    version: int = field(default=0, compare=False)

    @classmethod
    def init(cls, d: int, hidden: int = 64, num_layers: int = 2, dropout_rate: float = 0.1,
             seed: int = 0, message_passing: bool = True) -> "GcnModel":
        if num_layers < 1:
            raise ValueError("need at least one layer")
        rng = np.random.default_rng(seed)
        dims = [d] + [hidden] * (num_layers - 1) + [d]
        layers = []
        for d_in, d_out in zip(dims[:-1], dims[1:]):
            layers.append({
                "W_self": glorot(rng, d_in, d_out),
                "W_nbr": glorot(rng, d_in, d_out),
                "b": np.zeros(d_out),
                "W_e": glorot(rng, 2, 2),
                "U_e": glorot(rng, 2, 2),
                "b_e": np.zeros(2),
            })
        return cls(layers, dropout_rate, seed, message_passing)

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.layers[0]["W_self"].shape[0],) + tuple(p["W_self"].shape[1] for p in self.layers)

    @property
    def in_dim(self) -> int:
        return self.dims[0]

    def parameters(self):
        """``(layer, name, array)`` in declaration order."""
        for k, p in enumerate(self.layers):
            for name in PARAM_NAMES:
                yield k, name, p[name]

    def copy(self) -> "GcnModel":
        return GcnModel([{k: v.copy() for k, v in p.items()} for p in self.layers],
                        self.dropout_rate, self.seed, self.message_passing, self.version)

    def zeros_like(self) -> list[dict[str, np.ndarray]]:
        return [{k: np.zeros_like(v) for k, v in p.items()} for p in self.layers]

    def bump(self) -> None:
        self.version += 1


@dataclass(frozen=True)
class GraphInputs:
    """Dense tensors for one question, ready for :func:`forward`."""

    question_id: str
    doc_ids: tuple[str, ...]
    X: np.ndarray
    A: np.ndarray
    E: np.ndarray
    y: np.ndarray

    @property
    def n(self) -> int:
        return len(self.doc_ids)


def prepare_inputs(graph: DocumentGraph, emb: EmbeddingSet) -> GraphInputs:
    try:
        X = emb.matrix(graph.doc_ids)
    except KeyError as exc:
        raise DimMismatch(str(exc)) from None
    A = graph.adjacency_matrix
    E = graph.norm * A[:, :, None]
    return GraphInputs(graph.question_id, graph.doc_ids, X, A, E,
                       np.asarray(emb.question_vector, dtype=np.float64))


@dataclass
class LayerCache:
    X: np.ndarray
    E: np.ndarray
    M: np.ndarray
    agg: np.ndarray
    Z: np.ndarray
    mask: np.ndarray | None
    m_edge: np.ndarray
    Pe: np.ndarray


@dataclass
class ForwardCache:
    model_version: int
    inputs: GraphInputs
    layers: list[LayerCache]
    inv_deg: np.ndarray
    A: np.ndarray


@dataclass
class LayerState:
    node_reps: np.ndarray
    edge_reps: np.ndarray


def message(x_u: np.ndarray, e_uv: np.ndarray) -> np.ndarray:
    """Neighbor feature weighted by the summed edge channels."""
    return float(np.sum(e_uv)) * np.asarray(x_u, dtype=np.float64)


def dropout_mask(seed: int, step: int, slot: int, layer: int, shape, rate: float) -> np.ndarray:
    rng = np.random.default_rng([seed & 0xFFFFFFFF, step, slot, layer])
    keep = rng.random(shape) >= rate
    return keep / (1.0 - rate)


def forward(model: GcnModel, inputs: GraphInputs, train_mode: bool = False,
            step: int = 0, slot: int = 0) -> tuple[LayerState, ForwardCache]:
    X = inputs.X
    if X.shape[1] != model.in_dim or inputs.y.shape != (model.dims[-1],):
        raise DimMismatch(f"model dims {model.dims} incompatible with features {X.shape}, "
                          f"question vector {inputs.y.shape}")
    A = inputs.A if model.message_passing else np.zeros_like(inputs.A)
    E = inputs.E * A[:, :, None]
    deg = A.sum(axis=1)
    inv_deg = np.divide(1.0, deg, out=np.zeros_like(deg), where=deg > 0)

    caches = []
    L = model.num_layers
    for k, p in enumerate(model.layers):
        last = k == L - 1
        S = A * E.sum(axis=2)
        M = inv_deg[:, None] * S.T
        agg = M @ X
        Z = X @ p["W_self"] + agg @ p["W_nbr"] + p["b"]
        H = Z if last else np.maximum(Z, 0.0)
        mask = None
        if train_mode and not last and model.dropout_rate > 0:
            mask = dropout_mask(model.seed, step, slot, k, H.shape, model.dropout_rate)
            H = H * mask
        m_edge = np.einsum("wu,wuc->uc", A, E) * inv_deg[:, None]
        Pe = E @ p["W_e"].T + (m_edge @ p["U_e"].T)[:, None, :] + p["b_e"]
        E_next = np.maximum(Pe, 0.0) * A[:, :, None]
        caches.append(LayerCache(X, E, M, agg, Z, mask, m_edge, Pe))
        X, E = H, E_next
    state = LayerState(X, E)
    return state, ForwardCache(model.version, inputs, caches, inv_deg, A)


def score(y: np.ndarray, state: LayerState) -> np.ndarray:
    return state.node_reps @ y


def backward(model: GcnModel, cache: ForwardCache, grad_scores: np.ndarray):
    """Parameter gradients given dLoss/dscores, plus dLoss/dX for the inputs.

    Returns ``(grads, grad_X)`` where ``grads`` mirrors ``model.layers``.
    """
    if cache.model_version != model.version:
        raise StaleCache("model parameters changed since the forward pass")
    grad_scores = np.asarray(grad_scores, dtype=np.float64)
    if grad_scores.shape != (cache.inputs.n,):
        raise DimMismatch(f"expected {cache.inputs.n} score gradients, got {grad_scores.shape}")
    A = cache.A
    inv_deg = cache.inv_deg
    grads = model.zeros_like()

    dH = np.outer(grad_scores, cache.inputs.y)
    dE_next = np.zeros_like(cache.layers[-1].E)
    L = model.num_layers
    for k in range(L - 1, -1, -1):
        p, c, g = model.layers[k], cache.layers[k], grads[k]
        last = k == L - 1
        # edge branch
        dPe = dE_next * A[:, :, None] * (c.Pe > 0)
        g["W_e"] += np.einsum("uvi,uvj->ij", dPe, c.E)
        g["U_e"] += dPe.sum(axis=1).T @ c.m_edge
        g["b_e"] += dPe.sum(axis=(0, 1))
        dE = dPe @ p["W_e"]
        dm = dPe.sum(axis=1) @ p["U_e"]
        dE += A[:, :, None] * (inv_deg[:, None] * dm)[None, :, :]
        # node branch
        if c.mask is not None:
            dH = dH * c.mask
        dZ = dH if last else dH * (c.Z > 0)
        g["W_self"] += c.X.T @ dZ
        g["W_nbr"] += c.agg.T @ dZ
        g["b"] += dZ.sum(axis=0)
        dagg = dZ @ p["W_nbr"].T
        dX = dZ @ p["W_self"].T + c.M.T @ dagg
        dM = dagg @ c.X.T
        dS = (inv_deg[:, None] * dM).T * A
        dE += dS[:, :, None]
        dH, dE_next = dX, dE
    return grads, dH


def predict(model: GcnModel, inputs: GraphInputs) -> np.ndarray:
    state, _ = forward(model, inputs, train_mode=False)
    return score(inputs.y, state)
