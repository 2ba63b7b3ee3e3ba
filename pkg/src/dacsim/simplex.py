"""Dense tableau simplex for small packing LPs.

Solves  max c.x  subject to  A x <= b,  x >= 0  with b >= 0, so the origin is
always feasible and no phase-1 is needed.  Bland's rule keeps the pivot
sequence finite.  Sized for a few hundred variables and rows, which is all
the bribe-allocation problems in this package ever produce.
"""

from __future__ import annotations

import numpy as np


class UnboundedProblem(Exception):
    pass


def maximize(
    c: np.ndarray,
    A: np.ndarray,
    b: np.ndarray,
    tol: float = 1e-12,
    max_pivots: int = 200_000,
) -> tuple[float, np.ndarray]:
    """Return (optimal value, optimal x)."""
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    m, n = A.shape
    if b.min() < -tol:
        raise ValueError("requires b >= 0 (origin-feasible form)")
    b = np.maximum(b, 0.0)

    # tableau rows: m constraints, last row = reduced costs; columns: n vars,
    # m slacks, rhs
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n : n + m] = np.eye(m)
    T[:m, -1] = b
    T[m, :n] = -c
    basis = list(range(n, n + m))

    for _ in range(max_pivots):
        reduced = T[m, : n + m]
        candidates = np.nonzero(reduced < -tol)[0]
        if candidates.size == 0:
            break
        col = int(candidates[0])  # Bland: smallest index
        ratios = np.full(m, np.inf)
        positive = T[:m, col] > tol
        ratios[positive] = T[:m, -1][positive] / T[:m, col][positive]
        if not np.isfinite(ratios).any():
            raise UnboundedProblem("objective unbounded above")
        best = ratios.min()
        # Bland tie-break: among minimal ratios, smallest basis variable index
        tied = np.nonzero(ratios <= best + 1e-12 * (1.0 + abs(best)))[0]
        row = int(min(tied, key=lambda r: basis[r]))
        pivot = T[row, col]
        T[row] /= pivot
        for r in range(m + 1):
            if r != row and T[r, col] != 0.0:
                T[r] -= T[r, col] * T[row]
        basis[row] = col
    else:
        raise RuntimeError("pivot limit exceeded")

    x = np.zeros(n)
    for r, var in enumerate(basis):
        if var < n:
            x[var] = T[r, -1]
    return float(c @ x), x
