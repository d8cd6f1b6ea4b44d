"""Brute-force reference solvers used for verification.

Everything here recomputes results directly from accumulated data, with no
recursion and no shared solver code with the streaming path: inverses are
done by a hand-rolled Gauss-Jordan elimination instead of the factorization
routines the engine uses. Performance is irrelevant; these exist so the
recursive results can be checked against an independent computation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ShapeError


@dataclass(frozen=True)
class JointProblem:
    """All phases' data stacked into one regularized least-squares problem.

    ``activations`` stacks the per-phase activation blocks row-wise;
    ``labels`` places the per-phase label blocks on a block diagonal, which
    is exact because class sets of different phases never intersect.
    """

    activations: np.ndarray  # (N_total, d_buffer)
    labels: np.ndarray       # (N_total, C_total)
    gamma: float


def build_joint_problem(blocks: list[tuple[np.ndarray, np.ndarray]], gamma: float) -> JointProblem:
    """Assemble a JointProblem from per-phase (activations, labels) blocks.

    Label blocks are placed block-diagonally; activation blocks are stacked.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if not blocks:
        raise ValueError("at least one block is required")
    d = blocks[0][0].shape[1]
    total_rows = sum(x.shape[0] for x, _ in blocks)
    total_cols = sum(y.shape[1] for _, y in blocks)
    activations = np.zeros((total_rows, d))
    labels = np.zeros((total_rows, total_cols))
    r = c = 0
    for x, y in blocks:
        if x.shape[1] != d:
            raise ShapeError("all activation blocks must share a feature dimension")
        if x.shape[0] != y.shape[0]:
            raise ShapeError("activation and label blocks must have equal row counts")
        activations[r:r + x.shape[0]] = x
        labels[r:r + y.shape[0], c:c + y.shape[1]] = y
        r += x.shape[0]
        c += y.shape[1]
    return JointProblem(activations=activations, labels=labels, gamma=float(gamma))


def gauss_jordan_inverse(matrix: np.ndarray) -> np.ndarray:
    """Invert a square matrix by Gauss-Jordan elimination with partial pivoting.

    Deliberately avoids every library inverse/solve so the result is an
    independent check on factorization-based code.
    """
    a = np.array(matrix, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError("matrix must be square")
    n = a.shape[0]
    inv = np.eye(n)
    for col in range(n):
        pivot_row = col + int(np.argmax(np.abs(a[col:, col])))
        pivot = a[pivot_row, col]
        if pivot == 0.0:
            raise NumericalError("singular matrix in Gauss-Jordan elimination")
        if pivot_row != col:
            a[[col, pivot_row]] = a[[pivot_row, col]]
            inv[[col, pivot_row]] = inv[[pivot_row, col]]
        a[col] /= pivot
        inv[col] /= pivot
        for row in range(n):
            if row != col and a[row, col] != 0.0:
                factor = a[row, col]
                a[row] -= factor * a[col]
                inv[row] -= factor * inv[col]
    return inv


def joint_solve(problem: JointProblem) -> np.ndarray:
    """Solve the stacked ridge problem directly: (XtX + gamma I)^-1 XtY."""
    if problem.gamma <= 0:
        raise NumericalError("gamma must be positive for a non-singular system")
    x, y = problem.activations, problem.labels
    gram = x.T @ x + problem.gamma * np.eye(x.shape[1])
    return gauss_jordan_inverse(gram) @ (x.T @ y)


def direct_iacm(activations: np.ndarray, gamma: float) -> np.ndarray:
    """Explicitly invert the regularized auto-correlation of the given rows."""
    if gamma <= 0:
        raise NumericalError("gamma must be positive for a non-singular system")
    x = np.asarray(activations, dtype=np.float64)
    gram = x.T @ x + gamma * np.eye(x.shape[1])
    return gauss_jordan_inverse(gram)


def matmul_naive(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Triple-loop matrix product. Only sane for small test cases."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape[1] != b.shape[0]:
        raise ShapeError("inner dimensions must agree")
    out = np.zeros((a.shape[0], b.shape[1]))
    for i in range(a.shape[0]):
        for j in range(b.shape[1]):
            acc = 0.0
            for k in range(a.shape[1]):
                acc += a[i, k] * b[k, j]
            out[i, j] = acc
    return out


def rel_frobenius(a: np.ndarray, b: np.ndarray) -> float:
    """Frobenius distance between a and b, relative to the norm of b.

    Falls back to the absolute distance when b is exactly zero (or empty),
    so the empty problem reports a discrepancy of 0.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")
    diff = float(np.linalg.norm(a - b))
    denom = float(np.linalg.norm(b))
    return diff if denom == 0.0 else diff / denom
