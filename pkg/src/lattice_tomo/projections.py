"""Orthogonal projections that isolate one or two channel columns.

For a pair (i, j) the projector annihilates every other column of H, leaving a
system in the two unknowns s_i, s_j. The projector is never formed; we keep an
orthonormal basis Q of the removed columns and apply ``v - Q (Q^T v)``.
Projected vectors stay in the ambient p-dimensional space.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
import scipy.linalg

from .errors import InvalidArgumentError

# singular directions below RANK_RTOL * largest are treated as null
RANK_RTOL = 1e-10


def orthonormal_basis(A: np.ndarray) -> np.ndarray:
    """Orthonormal basis of range(A) from a column-pivoted Householder QR.

    Numerically null directions are dropped, so the result spans the actual
    column space even when ``A`` is rank deficient.
    """
    p, n = A.shape
    if n == 0:
        return np.zeros((p, 0))
    Q, R, _ = scipy.linalg.qr(A, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag[0] == 0.0:
        return np.zeros((p, 0))
    # pivoting makes |R_kk| non-increasing, so the kept set is a prefix
    rank = int(np.count_nonzero(diag > RANK_RTOL * diag[0]))
    return np.ascontiguousarray(Q[:, :rank])


def project_out(Q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Apply ``I - Q Q^T`` to ``v`` (vector or matrix of column vectors)."""
    if Q.shape[1] == 0:
        return np.array(v, dtype=float, copy=True)
    return v - Q @ (Q.T @ v)


@dataclass(frozen=True)
class PairProjection:
    i: int
    j: int
    h_i_proj: np.ndarray
    h_j_proj: np.ndarray
    x_proj: np.ndarray
    basis: np.ndarray = field(repr=False)

    def apply(self, v):
        """Action of the pair projector on an arbitrary vector."""
        return project_out(self.basis, np.asarray(v, dtype=float))

    @property
    def columns(self) -> np.ndarray:
        """Projected pair channel, shape (p, 2)."""
        return np.column_stack([self.h_i_proj, self.h_j_proj])


@dataclass(frozen=True)
class SingleProjection:
    i: int
    h_i_proj: np.ndarray
    x_proj: np.ndarray
    basis: np.ndarray = field(repr=False)

    def apply(self, v):
        return project_out(self.basis, np.asarray(v, dtype=float))


def _check_H(H):
    H = np.asarray(H, dtype=float)
    if H.ndim != 2:
        raise InvalidArgumentError("H must be a matrix")
    return H


def compute_pair_projection(H, x, i: int, j: int) -> PairProjection:
    H = _check_H(H)
    d = H.shape[1]
    if not 0 <= i < j < d:
        raise InvalidArgumentError(f"need 0 <= i < j < d, got ({i}, {j}) with d={d}")
    rest = [k for k in range(d) if k != i and k != j]
    Q = orthonormal_basis(H[:, rest])
    x = np.asarray(x, dtype=float)
    return PairProjection(i, j, project_out(Q, H[:, i]), project_out(Q, H[:, j]), project_out(Q, x), Q)


def compute_single_projection(H, x, i: int) -> SingleProjection:
    H = _check_H(H)
    d = H.shape[1]
    if not 0 <= i < d:
        raise InvalidArgumentError(f"need 0 <= i < d, got {i} with d={d}")
    rest = [k for k in range(d) if k != i]
    Q = orthonormal_basis(H[:, rest])
    x = np.asarray(x, dtype=float)
    return SingleProjection(i, project_out(Q, H[:, i]), project_out(Q, x), Q)


def pair_indices(d: int) -> np.ndarray:
    """All pairs i < j in lexicographic order, shape (d(d-1)/2, 2)."""
    return np.array(list(combinations(range(d), 2)), dtype=np.int64).reshape(-1, 2)


class ChannelProjections:
    """Channel-dependent projection data, computed once per channel realization.

    Everything that depends only on H (bases, projected columns and their Gram
    entries) is built here; observations are projected per received vector.
    """

    def __init__(self, H, pair_projector=compute_pair_projection):
        H = _check_H(H)
        p, d = H.shape
        if p < d:
            raise InvalidArgumentError(f"need p >= d, got p={p}, d={d}")
        self.H = H
        self.pairs = pair_indices(d)
        zero = np.zeros(p)
        pp = [pair_projector(H, zero, int(i), int(j)) for i, j in self.pairs]
        sp = [compute_single_projection(H, zero, i) for i in range(d)]
        self._pair_bases = [q.basis for q in pp]
        self._single_bases = [q.basis for q in sp]
        self.h_i_proj = np.array([q.h_i_proj for q in pp]).reshape(len(pp), p)
        self.h_j_proj = np.array([q.h_j_proj for q in pp]).reshape(len(pp), p)
        self.single_proj = np.array([q.h_i_proj for q in sp])
        # Gram entries of the projected pair columns
        self.g_ii = np.einsum("np,np->n", self.h_i_proj, self.h_i_proj)
        self.g_jj = np.einsum("np,np->n", self.h_j_proj, self.h_j_proj)
        self.g_ij = np.einsum("np,np->n", self.h_i_proj, self.h_j_proj)
        self.single_norm2 = np.einsum("dp,dp->d", self.single_proj, self.single_proj)

    @property
    def d(self) -> int:
        return self.H.shape[1]

    @property
    def n_pairs(self) -> int:
        return len(self.pairs)

    def pair_projections(self, x) -> list[PairProjection]:
        x = np.asarray(x, dtype=float)
        return [
            PairProjection(int(i), int(j), self.h_i_proj[n], self.h_j_proj[n], project_out(Q, x), Q)
            for n, ((i, j), Q) in enumerate(zip(self.pairs, self._pair_bases))
        ]

    def single_projections(self, x) -> list[SingleProjection]:
        x = np.asarray(x, dtype=float)
        return [
            SingleProjection(i, self.single_proj[i], project_out(Q, x), Q)
            for i, Q in enumerate(self._single_bases)
        ]

    def pair_correlations(self, X):
        """Inner products <P_ij x, P_ij h_i> and <P_ij x, P_ij h_j>.

        ``X`` has shape (B, p). Since the projector is symmetric and idempotent
        these equal <x, P_ij h_i>, so no per-vector projection is needed.
        Returns two arrays of shape (B, n_pairs).
        """
        X = np.atleast_2d(X)
        return X @ self.h_i_proj.T, X @ self.h_j_proj.T

    def single_correlations(self, X):
        X = np.atleast_2d(X)
        return X @ self.single_proj.T


def all_pair_projections(H, x) -> list[PairProjection]:
    return ChannelProjections(H).pair_projections(x)
