"""Pure numeric kernels for the debiasing losses and transforms.

Every kernel is a stateless value-plus-gradient function.  Scalar-valued
kernels return their partial derivatives directly; the vector-valued
kernels (adapter forward, temperature-scaled attention) return the output
together with a ``vjp`` callable mapping an output cotangent to the input
gradients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np

from .interchange import ATTENTION_ROW_TOL, AttentionRecord
from .numkit import as_matrix, as_vector, row_entropies, softmax_rows

__all__ = [
    "BlindLossResult",
    "blind_weighted_loss",
    "PairRegularizerResult",
    "embedding_pair_regularizer",
    "EntropyPenaltyResult",
    "attention_entropy_penalty",
    "EarResult",
    "ear_regularizer",
    "AdapterGrads",
    "AdapterResult",
    "adapter_forward",
    "HardConcreteParams",
    "HardConcreteResult",
    "hard_concrete_l0",
    "TransformKernel",
    "identity_kernel",
    "tanh_kernel",
    "ModdiffyResult",
    "moddiffy_debias_loss",
    "DiffParams",
    "compose_diff_params",
    "EatGrads",
    "EatResult",
    "eat_attention",
]


def _sigmoid(x: float) -> float:
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


# --------------------------------------------------------------------------
# Success-probability loss reweighting
# --------------------------------------------------------------------------


class BlindLossResult(NamedTuple):
    value: float
    grad_task_loss: float
    grad_blind_logit: float


def blind_weighted_loss(task_loss: float, blind_logit: float, gamma: float) -> BlindLossResult:
    """Task loss reweighted by (1 - sigmoid(blind_logit))**gamma.

    gamma = 0 restores the plain task loss; large logits (confident success)
    drive the weight toward zero.
    """
    if gamma < 0.0:
        raise ValueError(f"gamma must be nonnegative, got {gamma}")
    if not math.isfinite(task_loss):
        raise ValueError("task_loss must be finite")
    s = _sigmoid(float(blind_logit))
    weight = (1.0 - s) ** gamma
    return BlindLossResult(
        value=weight * task_loss,
        grad_task_loss=weight,
        grad_blind_logit=-gamma * s * weight * task_loss,
    )


# --------------------------------------------------------------------------
# Counterfactual embedding-pair distance regularizer
# --------------------------------------------------------------------------


class PairRegularizerResult(NamedTuple):
    value: float
    grads: list[tuple[np.ndarray, np.ndarray]]


def embedding_pair_regularizer(pairs: Sequence[tuple], strength: float) -> PairRegularizerResult:
    """strength * sum of Euclidean distances between counterfactual pair embeddings.

    The subgradient at a coincident pair is zero.
    """
    if strength < 0.0:
        raise ValueError(f"strength must be nonnegative, got {strength}")
    total = 0.0
    grads: list[tuple[np.ndarray, np.ndarray]] = []
    for a, b in pairs:
        av = as_vector(a, "pair embedding")
        bv = as_vector(b, "pair embedding")
        if av.size != bv.size:
            raise ValueError("pair embeddings must share one dimension")
        diff = av - bv
        dist = float(np.linalg.norm(diff))
        total += dist
        if dist == 0.0:
            grads.append((np.zeros_like(av), np.zeros_like(bv)))
        else:
            ga = strength * diff / dist
            grads.append((ga, -ga))
    return PairRegularizerResult(strength * total, grads)


# --------------------------------------------------------------------------
# Attention-entropy regularizer
# --------------------------------------------------------------------------


class EntropyPenaltyResult(NamedTuple):
    value: float
    grads: list[list[np.ndarray]]


def attention_entropy_penalty(
    layers: Sequence[Sequence], strength: float
) -> EntropyPenaltyResult:
    """-strength * sum over layers of the mean row entropy of that layer's heads.

    The per-layer entropy averages over every (head, query-row) pair, so the
    scale is independent of sequence length.  Gradients treat the weight
    entries as free variables and are -inf at exactly-zero entries.
    """
    value = 0.0
    grads: list[list[np.ndarray]] = []
    for layer in layers:
        mats = [as_matrix(m, "weights") for m in layer]
        if not mats:
            raise ValueError("each layer needs at least one head matrix")
        n_rows = sum(m.shape[0] for m in mats)
        layer_entropy = sum(float(row_entropies(m).sum()) for m in mats) / n_rows
        value -= strength * layer_entropy
        layer_grads = []
        for m in mats:
            grad = np.full_like(m, -np.inf if strength > 0.0 else 0.0)
            mask = m > 0.0
            grad[mask] = strength * (np.log(m[mask]) + 1.0) / n_rows
            layer_grads.append(grad)
        grads.append(layer_grads)
    return EntropyPenaltyResult(value, grads)


class EarResult(NamedTuple):
    value: float
    grads: list[np.ndarray]


def ear_regularizer(records: Iterable[AttentionRecord], strength: float) -> EarResult:
    """Entropy penalty over attention records, grouped by their layer index.

    Returns the gradient with respect to each record's weights, aligned with
    the input order.
    """
    records = list(records)
    if not records:
        raise ValueError("no attention records")
    by_layer: dict[int, list[int]] = {}
    for idx, rec in enumerate(records):
        weights = as_matrix(rec.weights, "weights")
        if np.any(weights < 0.0) or np.any(np.abs(weights.sum(axis=1) - 1.0) > ATTENTION_ROW_TOL):
            raise ValueError(f"record layer={rec.layer} head={rec.head} is not row-stochastic")
        by_layer.setdefault(rec.layer, []).append(idx)
    layer_order = list(by_layer)
    penalty = attention_entropy_penalty(
        [[np.asarray(records[i].weights, dtype=np.float64) for i in by_layer[layer]]
         for layer in layer_order],
        strength,
    )
    grads: list[np.ndarray] = [None] * len(records)  # type: ignore[list-item]
    for layer, layer_grads in zip(layer_order, penalty.grads):
        for idx, grad in zip(by_layer[layer], layer_grads):
            grads[idx] = grad
    return EarResult(penalty.value, grads)


# --------------------------------------------------------------------------
# Bottleneck adapter forward pass
# --------------------------------------------------------------------------


class AdapterGrads(NamedTuple):
    h: np.ndarray
    r: np.ndarray
    down: np.ndarray
    up: np.ndarray


class AdapterResult(NamedTuple):
    output: np.ndarray
    vjp: Callable[[np.ndarray], AdapterGrads]


def adapter_forward(h, r, down, up, activation: str = "relu") -> AdapterResult:
    """Two-layer bottleneck with residual: up @ relu(down @ h) + r."""
    if activation != "relu":
        raise ValueError(f"unsupported activation {activation!r}")
    hv = as_vector(h, "h")
    rv = as_vector(r, "r")
    dm = as_matrix(down, "down")
    um = as_matrix(up, "up")
    d = hv.size
    m = dm.shape[0]
    if dm.shape != (m, d) or um.shape != (d, m) or rv.size != d:
        raise ValueError(
            f"shape mismatch: h({d},), r({rv.size},), down{dm.shape}, up{um.shape}"
        )
    z = dm @ hv
    activated = np.maximum(z, 0.0)
    output = um @ activated + rv

    def vjp(cotangent) -> AdapterGrads:
        u = as_vector(cotangent, "cotangent")
        if u.size != d:
            raise ValueError(f"cotangent must have dimension {d}, got {u.size}")
        grad_up = np.outer(u, activated)
        dz = (um.T @ u) * (z > 0.0)
        return AdapterGrads(h=dm.T @ dz, r=u, down=np.outer(dz, hv), up=grad_up)

    return AdapterResult(output, vjp)


# --------------------------------------------------------------------------
# Expected-L0 penalty of stretched concrete gates
# --------------------------------------------------------------------------


@dataclass
class HardConcreteParams:
    """Gate location parameters plus the stretch interval (lo < 0 < 1 < hi)."""

    log_alpha: np.ndarray
    stretch_lo: float
    stretch_hi: float

    def __post_init__(self):
        self.log_alpha = as_vector(self.log_alpha, "log_alpha")
        if not self.stretch_lo < 0.0:
            raise ValueError(f"stretch_lo must be negative, got {self.stretch_lo}")
        if not self.stretch_hi > 1.0:
            raise ValueError(f"stretch_hi must exceed 1, got {self.stretch_hi}")


class HardConcreteResult(NamedTuple):
    value: float
    grad_log_alpha: np.ndarray


def hard_concrete_l0(params: HardConcreteParams) -> HardConcreteResult:
    """Expected number of open gates: sum sigmoid(log_alpha - log(-lo/hi))."""
    shift = math.log(-params.stretch_lo / params.stretch_hi)
    gates = np.array([_sigmoid(x - shift) for x in params.log_alpha])
    return HardConcreteResult(float(gates.sum()), gates * (1.0 - gates))


# --------------------------------------------------------------------------
# Group-mean embedding matching loss
# --------------------------------------------------------------------------


class TransformKernel(NamedTuple):
    """A transform fn: R^d -> R^k with its Jacobian (k x d) at a point."""

    fn: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]


def identity_kernel() -> TransformKernel:
    return TransformKernel(fn=lambda x: x, jacobian=lambda x: np.eye(x.size))


def tanh_kernel() -> TransformKernel:
    return TransformKernel(
        fn=np.tanh,
        jacobian=lambda x: np.diag(1.0 - np.tanh(x) ** 2),
    )


class ModdiffyResult(NamedTuple):
    value: float
    grads_a: list[np.ndarray]
    grads_b: list[np.ndarray]


def moddiffy_debias_loss(
    emb_a: Sequence,
    emb_b: Sequence,
    kernel: TransformKernel | None = None,
    strength: float = 1.0,
) -> ModdiffyResult:
    """strength * squared distance between the transformed group-mean embeddings."""
    if not emb_a or not emb_b:
        raise ValueError("both embedding groups must be nonempty")
    kernel = kernel or identity_kernel()
    a_vecs = [as_vector(x, "emb_a") for x in emb_a]
    b_vecs = [as_vector(x, "emb_b") for x in emb_b]
    if len({v.size for v in a_vecs + b_vecs}) != 1:
        raise ValueError("all embeddings must share one dimension")
    phi_a = [np.asarray(kernel.fn(v), dtype=np.float64) for v in a_vecs]
    phi_b = [np.asarray(kernel.fn(v), dtype=np.float64) for v in b_vecs]
    delta = np.mean(phi_a, axis=0) - np.mean(phi_b, axis=0)
    value = strength * float(delta @ delta)
    scale_a = 2.0 * strength / len(a_vecs)
    scale_b = -2.0 * strength / len(b_vecs)
    grads_a = [scale_a * (kernel.jacobian(v).T @ delta) for v in a_vecs]
    grads_b = [scale_b * (kernel.jacobian(v).T @ delta) for v in b_vecs]
    return ModdiffyResult(value, grads_a, grads_b)


# --------------------------------------------------------------------------
# Sparse diff-parameter composition
# --------------------------------------------------------------------------


@dataclass
class DiffParams:
    """Frozen base parameters with a binary mask and magnitudes for the diff."""

    theta: np.ndarray
    mask: np.ndarray
    magnitude: np.ndarray

    def __post_init__(self):
        self.theta = as_vector(self.theta, "theta")
        self.mask = as_vector(self.mask, "mask")
        self.magnitude = as_vector(self.magnitude, "magnitude")
        if not (self.theta.size == self.mask.size == self.magnitude.size):
            raise ValueError("theta, mask and magnitude must share one length")
        if not np.all((self.mask == 0.0) | (self.mask == 1.0)):
            raise ValueError("mask entries must be exactly 0 or 1")


def compose_diff_params(params: DiffParams, extra_deltas: Sequence = ()) -> np.ndarray:
    """theta + mask*magnitude plus any additional per-attribute deltas."""
    result = params.theta + params.mask * params.magnitude
    for delta in extra_deltas:
        dv = as_vector(delta, "extra delta")
        if dv.size != result.size:
            raise ValueError("extra deltas must match the parameter length")
        result = result + dv
    return result


# --------------------------------------------------------------------------
# Temperature-scaled attention
# --------------------------------------------------------------------------


class EatGrads(NamedTuple):
    q: np.ndarray
    k: np.ndarray
    v: np.ndarray
    beta: float


class EatResult(NamedTuple):
    output: np.ndarray
    vjp: Callable[[np.ndarray], EatGrads]


def eat_attention(q, k, v, beta: float, d_k: float) -> EatResult:
    """softmax(beta * Q K^T / sqrt(d_k)) V.

    beta = 1 reproduces unscaled attention bit-for-bit; beta = 0 attends
    uniformly, so every output row is the mean of V's rows.
    """
    if beta < 0.0:
        raise ValueError(f"beta must be nonnegative, got {beta}")
    if d_k <= 0.0:
        raise ValueError(f"d_k must be positive, got {d_k}")
    qm = as_matrix(q, "q")
    km = as_matrix(k, "k")
    vm = as_matrix(v, "v")
    if qm.shape[1] != km.shape[1]:
        raise ValueError(f"q and k must share the key dimension: {qm.shape} vs {km.shape}")
    if km.shape[0] != vm.shape[0]:
        raise ValueError(f"k and v must share the sequence length: {km.shape} vs {vm.shape}")
    sqrt_dk = math.sqrt(d_k)
    raw = qm @ km.T
    # dividing (rather than multiplying by the reciprocal) keeps beta = 1
    # bit-identical to the unscaled softmax(Q K^T / sqrt(d_k)) V
    probs = softmax_rows((beta * raw) / sqrt_dk)
    output = probs @ vm

    def vjp(cotangent) -> EatGrads:
        u = as_matrix(cotangent, "cotangent")
        if u.shape != output.shape:
            raise ValueError(f"cotangent must have shape {output.shape}, got {u.shape}")
        grad_v = probs.T @ u
        d_probs = u @ vm.T
        d_scores = probs * (d_probs - (d_probs * probs).sum(axis=1, keepdims=True))
        scale = beta / sqrt_dk
        return EatGrads(
            q=scale * d_scores @ km,
            k=scale * d_scores.T @ qm,
            v=grad_v,
            beta=float((d_scores * raw).sum() / sqrt_dk),
        )

    return EatResult(output, vjp)
