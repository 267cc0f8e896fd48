"""Small dense linear-algebra helpers shared by the metric and kernel modules.

Vectors are 1-D float64 numpy arrays, matrices are 2-D row-major float64
arrays.  Every entry point rejects NaN/Inf inputs.  Natural logarithms are
used throughout.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

__all__ = [
    "ConvergenceError",
    "as_vector",
    "as_matrix",
    "cosine",
    "softmax_rows",
    "entropy_rows",
    "cross_entropy",
    "top_eigenvectors",
    "finite_diff_grad",
]


class ConvergenceError(RuntimeError):
    """Raised when the power-iteration eigensolver exhausts its budget."""


def as_vector(data, name: str = "vector") -> np.ndarray:
    """Coerce to a finite 1-D float64 array (scalars become length-1)."""
    arr = np.atleast_1d(np.asarray(data, dtype=np.float64))
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def as_matrix(data, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite 2-D float64 array."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be two-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def cosine(a, b) -> float:
    """Cosine similarity a.b / (|a||b|); errors on zero-norm input."""
    av = as_vector(a, "a")
    bv = as_vector(b, "b")
    if av.size != bv.size:
        raise ValueError(f"dimension mismatch: {av.size} vs {bv.size}")
    na = np.linalg.norm(av)
    nb = np.linalg.norm(bv)
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine is undefined for zero-norm input")
    return float(np.dot(av, bv) / (na * nb))


def softmax_rows(m) -> np.ndarray:
    """Row-wise softmax with max-subtraction for numerical stability."""
    mat = as_matrix(m, "m")
    shifted = mat - mat.max(axis=1, keepdims=True)
    expm = np.exp(shifted)
    return expm / expm.sum(axis=1, keepdims=True)


def _require_row_stochastic(mat: np.ndarray, tol: float, name: str) -> None:
    if np.any(mat < 0.0):
        raise ValueError(f"{name} has negative entries; rows must be distributions")
    sums = mat.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > tol):
        bad = int(np.argmax(np.abs(sums - 1.0)))
        raise ValueError(f"{name} row {bad} sums to {sums[bad]!r}, not 1 within {tol}")


def row_entropies(mat: np.ndarray) -> np.ndarray:
    """Shannon entropy -sum p ln p of each row, with 0 ln 0 := 0."""
    plogp = np.zeros_like(mat)
    mask = mat > 0.0
    plogp[mask] = mat[mask] * np.log(mat[mask])
    return -plogp.sum(axis=1)


def entropy_rows(m) -> float:
    """Mean Shannon entropy over the rows of a row-stochastic matrix."""
    mat = as_matrix(m, "m")
    _require_row_stochastic(mat, tol=1e-9, name="m")
    return float(np.mean(row_entropies(mat)))


def cross_entropy(predicted, onehot_label) -> float:
    """-sum_k y_k log p_k for a one-hot label y against a distribution p."""
    p = as_vector(predicted, "predicted")
    y = as_vector(onehot_label, "onehot_label")
    if p.size != y.size:
        raise ValueError(f"dimension mismatch: {p.size} vs {y.size}")
    if np.any(p < 0.0) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("predicted must be a probability distribution")
    ones = np.flatnonzero(y == 1.0)
    if ones.size != 1 or np.count_nonzero(y) != 1:
        raise ValueError("onehot_label must have exactly one entry equal to 1")
    prob = p[ones[0]]
    if prob == 0.0:
        raise ValueError("label class has predicted probability 0 (infinite loss)")
    return float(-np.log(prob))


def _orthogonalize(v: np.ndarray, basis: Sequence[np.ndarray]) -> np.ndarray:
    # two Gram-Schmidt sweeps keep the residual orthogonal to working precision
    for _ in range(2):
        for u in basis:
            v = v - np.dot(v, u) * u
    return v


def _complete_basis(basis: Sequence[np.ndarray], dim: int) -> np.ndarray:
    """Deterministic unit vector orthogonal to every vector in `basis`."""
    best = None
    best_norm = -1.0
    for j in range(dim):
        e = np.zeros(dim)
        e[j] = 1.0
        r = _orthogonalize(e, basis)
        nr = np.linalg.norm(r)
        if nr > best_norm:
            best, best_norm = r, nr
    if best is None or best_norm == 0.0:
        raise ValueError("cannot extend basis beyond the full dimension")
    return best / best_norm


def _canonical_sign(v: np.ndarray) -> np.ndarray:
    for comp in v:
        if abs(comp) > 1e-12:
            return -v if comp < 0.0 else v
    return v


def _dominant_eigenpair(work, prior, tol, max_iter, comp_index, res_tol):
    dim = work.shape[0]
    scale = float(np.abs(work).max())
    if scale == 0.0:
        return 0.0, _complete_basis(prior, dim)
    rng = np.random.default_rng(0x7E47 + comp_index)  # fixed seed: deterministic output
    v = _orthogonalize(rng.standard_normal(dim), prior)
    nv = np.linalg.norm(v)
    v = _complete_basis(prior, dim) if nv == 0.0 else v / nv
    prev_val = None
    best_val, best_v, best_residual = None, None, np.inf
    since_improved = 0
    for _ in range(max_iter):
        image = work @ v
        val = float(v @ image)
        # the eigenvalue settles quadratically faster than the vector, so a
        # residual check is needed on top of the eigenvalue-change tolerance;
        # deflation error from earlier components floors the residual, so a
        # stalled-but-settled iterate is accepted as converged
        residual = float(np.abs(image - val * v).max())
        if residual < 0.9 * best_residual:
            best_val, best_v, best_residual = val, v, residual
            since_improved = 0
        else:
            since_improved += 1
        settled = prev_val is not None and abs(val - prev_val) <= tol * max(1.0, abs(val))
        if settled and (residual <= res_tol or since_improved >= 100):
            return best_val, best_v
        prev_val = val
        w = _orthogonalize(image, prior)
        nw = np.linalg.norm(w)
        if nw <= 1e-14 * scale:
            # iterate fell into the numerical null space: eigenvalue ~ 0
            return 0.0, v
        v = w / nw
    raise ConvergenceError(f"power iteration did not converge in {max_iter} iterations")


def top_eigenvectors(
    cov,
    n: int,
    tol: float = 1e-12,
    max_iter: int = 10_000,
) -> list[tuple[float, np.ndarray]]:
    """Top-n eigenpairs of a symmetric PSD matrix, by power iteration.

    Uses Hotelling deflation with per-iteration re-orthogonalization.
    Eigenpairs are returned in descending eigenvalue order; each vector is
    unit-norm with its first non-negligible component made positive.
    """
    a = as_matrix(cov, "cov")
    rows, cols = a.shape
    if rows != cols:
        raise ValueError(f"cov must be square, got {rows}x{cols}")
    if not np.allclose(a, a.T, rtol=0.0, atol=1e-10 * max(1.0, float(np.abs(a).max()))):
        raise ValueError("cov must be symmetric")
    if not 1 <= n <= rows:
        raise ValueError(f"n must be in [1, {rows}], got {n}")
    a = (a + a.T) / 2.0
    work = a.copy()
    scale0 = max(1.0, float(np.abs(a).max()))
    clamp = 1e-13 * scale0
    res_tol = 1e-10 * scale0  # deflation noise grows with the original scale
    vals: list[float] = []
    vecs: list[np.ndarray] = []
    for comp in range(n):
        val, vec = _dominant_eigenpair(work, vecs, tol, max_iter, comp, res_tol)
        if abs(val) <= clamp:
            val = 0.0
        vals.append(val)
        vecs.append(vec)
        work = work - val * np.outer(vec, vec)
    order = np.argsort(-np.asarray(vals), kind="stable")
    return [(vals[i], _canonical_sign(vecs[i])) for i in order]


def finite_diff_grad(
    f: Callable[[np.ndarray], float],
    x,
    step_scale: float = 1e-6,
) -> np.ndarray:
    """Central-difference gradient with per-coordinate step h_i = s*max(1,|x_i|)."""
    x0 = as_vector(x, "x")
    grad = np.empty_like(x0)
    for i in range(x0.size):
        h = step_scale * max(1.0, abs(x0[i]))
        xp = x0.copy()
        xm = x0.copy()
        xp[i] += h
        xm[i] -= h
        fp = float(f(xp))
        fm = float(f(xm))
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise ValueError(f"f returned a non-finite value near coordinate {i}")
        grad[i] = (fp - fm) / (2.0 * h)
    return grad
