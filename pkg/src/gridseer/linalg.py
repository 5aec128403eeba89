"""Small dense linear-algebra helpers shared by the estimator and the
observability checks."""

from __future__ import annotations

import numpy as np

RANK_RTOL = 1e-9


def _tol(s: np.ndarray, shape: tuple[int, int]) -> float:
    if s.size == 0:
        return 0.0
    return max(shape) * np.finfo(float).eps * s[0] + RANK_RTOL * s[0]


def rank(A: np.ndarray) -> int:
    A = np.atleast_2d(A)
    if A.size == 0:
        return 0
    s = np.linalg.svd(A, compute_uv=False)
    return int((s > _tol(s, A.shape)).sum())


def null_space(A: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the right null space, one vector per column."""
    A = np.atleast_2d(A)
    ncols = A.shape[1]
    if A.shape[0] == 0:
        return np.eye(ncols)
    _, s, vt = np.linalg.svd(A, full_matrices=True)
    r = int((s > _tol(s, A.shape)).sum())
    return vt[r:].T.copy()


class RowEchelon:
    """Incremental Gauss-Jordan elimination.

    ``add(row)`` reduces the row against the pivots collected so far and keeps
    it only if something independent is left over.
    """

    def __init__(self, ncols: int, tol: float = 1e-9):
        self.ncols = ncols
        self.tol = tol
        self.rows: list[np.ndarray] = []
        self.pivots: list[int] = []

    def add(self, row: np.ndarray) -> bool:
        r = np.asarray(row, dtype=float).copy()
        scale = np.abs(r).max(initial=0.0)
        if scale == 0.0:
            return False
        r /= scale
        for piv, prow in zip(self.pivots, self.rows):
            if r[piv] != 0.0:
                r -= r[piv] * prow
        k = int(np.argmax(np.abs(r)))
        if abs(r[k]) <= self.tol:
            return False
        r /= r[k]
        for i, prow in enumerate(self.rows):
            if prow[k] != 0.0:
                self.rows[i] = prow - prow[k] * r
        self.rows.append(r)
        self.pivots.append(k)
        return True

    @property
    def rank(self) -> int:
        return len(self.rows)
