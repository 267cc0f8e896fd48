"""Finite-difference verification of every kernel's analytic gradient.

Each trial draws seeded random inputs, flattens the real-valued ones into a
single vector, and compares the analytic gradient against central
differences componentwise with denominator max(1, |analytic|).  Vector-
valued kernels are probed through a random linear functional of their
output, whose gradient is the kernel's vector-Jacobian product.
"""

from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np

from . import loss_kernels as lk
from .numkit import finite_diff_grad

__all__ = ["KERNEL_NAMES", "GradCheckResult", "check_kernel", "run_suite"]

KERNEL_NAMES = ("blind", "embedding_pair", "ear", "adapter", "hard_concrete", "moddiffy", "eat")

DEFAULT_TOLERANCE = 1e-4


class GradCheckResult(NamedTuple):
    kernel: str
    trials: int
    failures: int
    max_rel_error: float

    @property
    def passed(self) -> bool:
        return self.failures == 0


def _split(flat: np.ndarray, shapes: Sequence[tuple]) -> list[np.ndarray]:
    parts = []
    offset = 0
    for shape in shapes:
        size = int(np.prod(shape))
        parts.append(flat[offset : offset + size].reshape(shape))
        offset += size
    return parts


def _case_blind(rng: np.random.Generator):
    gamma = float(rng.uniform(0.0, 3.0))
    x0 = np.array([rng.uniform(-2.0, 2.0), rng.uniform(-3.0, 3.0)])

    def f(x):
        return lk.blind_weighted_loss(x[0], x[1], gamma).value

    res = lk.blind_weighted_loss(x0[0], x0[1], gamma)
    return x0, f, np.array([res.grad_task_loss, res.grad_blind_logit])


def _case_embedding_pair(rng: np.random.Generator):
    n_pairs, dim = 3, 4
    strength = float(rng.uniform(0.1, 2.0))
    shapes = [(dim,)] * (2 * n_pairs)

    def build(x):
        parts = _split(x, shapes)
        return [(parts[2 * i], parts[2 * i + 1]) for i in range(n_pairs)]

    while True:
        x0 = rng.standard_normal(2 * n_pairs * dim)
        pairs = build(x0)
        if min(np.linalg.norm(a - b) for a, b in pairs) > 1e-2:
            break

    def f(x):
        return lk.embedding_pair_regularizer(build(x), strength).value

    res = lk.embedding_pair_regularizer(build(x0), strength)
    return x0, f, np.concatenate([np.concatenate(g) for g in res.grads])


def _case_ear(rng: np.random.Generator):
    strength = float(rng.uniform(0.1, 2.0))
    shapes = [(3, 4)] * 4  # two layers of two heads each

    def build(x):
        mats = _split(x, shapes)
        return [mats[:2], mats[2:]]

    logits = rng.normal(0.0, 1.0, size=(4, 3, 4))
    rows = np.exp(logits)
    rows /= rows.sum(axis=2, keepdims=True)
    x0 = rows.ravel()

    def f(x):
        return lk.attention_entropy_penalty(build(x), strength).value

    res = lk.attention_entropy_penalty(build(x0), strength)
    return x0, f, np.concatenate([g.ravel() for layer in res.grads for g in layer])


def _case_adapter(rng: np.random.Generator):
    d, m = 3, 2
    shapes = [(d,), (d,), (m, d), (d, m)]
    while True:
        x0 = rng.standard_normal(2 * d + 2 * m * d)
        h, r, down, up = _split(x0, shapes)
        if np.min(np.abs(down @ h)) > 1e-3:  # keep clear of the relu kink
            break
    probe = rng.standard_normal(d)

    def f(x):
        hx, rx, downx, upx = _split(x, shapes)
        return float(lk.adapter_forward(hx, rx, downx, upx).output @ probe)

    grads = lk.adapter_forward(h, r, down, up).vjp(probe)
    analytic = np.concatenate([grads.h, grads.r, grads.down.ravel(), grads.up.ravel()])
    return x0, f, analytic


def _case_hard_concrete(rng: np.random.Generator):
    lo = -float(rng.uniform(0.01, 2.0))
    hi = 1.0 + float(rng.uniform(0.01, 2.0))
    x0 = rng.normal(0.0, 2.0, size=5)

    def f(x):
        return lk.hard_concrete_l0(lk.HardConcreteParams(x, lo, hi)).value

    res = lk.hard_concrete_l0(lk.HardConcreteParams(x0, lo, hi))
    return x0, f, res.grad_log_alpha


def _case_moddiffy(rng: np.random.Generator, trial: int):
    n_a, n_b, dim = 2, 3, 3
    strength = float(rng.uniform(0.1, 2.0))
    kernel = lk.identity_kernel() if trial % 2 == 0 else lk.tanh_kernel()
    shapes = [(dim,)] * (n_a + n_b)
    x0 = rng.standard_normal((n_a + n_b) * dim)

    def build(x):
        parts = _split(x, shapes)
        return parts[:n_a], parts[n_a:]

    def f(x):
        a, b = build(x)
        return lk.moddiffy_debias_loss(a, b, kernel=kernel, strength=strength).value

    a0, b0 = build(x0)
    res = lk.moddiffy_debias_loss(a0, b0, kernel=kernel, strength=strength)
    return x0, f, np.concatenate(res.grads_a + res.grads_b)


def _case_eat(rng: np.random.Generator):
    n, d, d_v = 4, 3, 2
    d_k = float(d)
    shapes = [(n, d), (n, d), (n, d_v)]
    x0 = np.concatenate([rng.standard_normal(n * d * 2 + n * d_v), [rng.uniform(0.05, 2.0)]])
    probe = rng.standard_normal((n, d_v))

    def build(x):
        q, k, v = _split(x[:-1], shapes)
        return q, k, v, float(x[-1])

    def f(x):
        q, k, v, beta = build(x)
        return float((lk.eat_attention(q, k, v, beta, d_k).output * probe).sum())

    q0, k0, v0, beta0 = build(x0)
    grads = lk.eat_attention(q0, k0, v0, beta0, d_k).vjp(probe)
    analytic = np.concatenate([grads.q.ravel(), grads.k.ravel(), grads.v.ravel(), [grads.beta]])
    return x0, f, analytic


def _build_case(name: str, rng: np.random.Generator, trial: int):
    if name == "blind":
        return _case_blind(rng)
    if name == "embedding_pair":
        return _case_embedding_pair(rng)
    if name == "ear":
        return _case_ear(rng)
    if name == "adapter":
        return _case_adapter(rng)
    if name == "hard_concrete":
        return _case_hard_concrete(rng)
    if name == "moddiffy":
        return _case_moddiffy(rng, trial)
    if name == "eat":
        return _case_eat(rng)
    raise ValueError(f"unknown kernel {name!r}")


def check_kernel(
    name: str,
    trials: int = 100,
    seed: int = 0,
    step_scale: float = 1e-6,
    tolerance: float = DEFAULT_TOLERANCE,
) -> GradCheckResult:
    """Compare analytic and finite-difference gradients at seeded random points."""
    kernel_index = KERNEL_NAMES.index(name)
    failures = 0
    max_rel = 0.0
    for trial in range(trials):
        rng = np.random.default_rng([seed, kernel_index, trial])
        x0, f, analytic = _build_case(name, rng, trial)
        numeric = finite_diff_grad(f, x0, step_scale=step_scale)
        rel = np.abs(numeric - analytic) / np.maximum(1.0, np.abs(analytic))
        worst = float(rel.max())
        max_rel = max(max_rel, worst)
        if worst >= tolerance:
            failures += 1
    return GradCheckResult(name, trials, failures, max_rel)


def run_suite(
    kernels: Sequence[str] | None = None,
    trials: int = 100,
    seed: int = 0,
    step_scale: float = 1e-6,
    tolerance: float = DEFAULT_TOLERANCE,
) -> list[GradCheckResult]:
    """Run the gradient check for every requested kernel (all by default)."""
    names = list(kernels) if kernels is not None else list(KERNEL_NAMES)
    for name in names:
        if name not in KERNEL_NAMES:
            raise ValueError(f"unknown kernel {name!r}; choose from {KERNEL_NAMES}")
    return [check_kernel(n, trials=trials, seed=seed, step_scale=step_scale, tolerance=tolerance)
            for n in names]
