"""Reference detectors: zero forcing, linear MMSE, MMSE-SIC (V-BLAST) and exhaustive ML.

Each detector has a batch form operating on a frame of received vectors
``X`` with shape (B, p) and returning symbol indices of shape (B, d), plus a
single-problem wrapper returning :class:`DetectorOutput`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .core import Constellation, Problem, SymbolVector
from .errors import CapabilityError, DecodeFailure

ML_GUARD = 2**20
_RANK_RTOL = 1e-10
# bound on B * n_candidates * p per ML chunk
_ML_CHUNK_ELEMS = 1 << 22


@dataclass(frozen=True)
class DetectorOutput:
    hard: SymbolVector
    residual2: float
    extra: np.ndarray | None = None


def residual2(H, x, s) -> float:
    """Squared residual ||H s - x||^2."""
    r = np.asarray(H, dtype=float) @ np.asarray(s, dtype=float) - np.asarray(x, dtype=float)
    return float(r @ r)


def batch_residual2(H, X, S_values) -> np.ndarray:
    """Row-wise ||H s_b - x_b||^2 for (B, d) symbol values and (B, p) observations."""
    R = S_values @ H.T - X
    return np.einsum("bp,bp->b", R, R)


def _output(problem: Problem, idx, extra=None) -> DetectorOutput:
    hard = SymbolVector.from_indices(idx, problem.constellation)
    return DetectorOutput(hard, residual2(problem.H, problem.x, hard.values), extra)


def regularizer(sigma2: float, constellation: Constellation) -> float:
    # sigma2 / E_s: the textbook MMSE weight for non-unit symbol energy
    return sigma2 / constellation.energy


# -- zero forcing ----------------------------------------------------------------

def zf_soft(H, X) -> np.ndarray:
    """Unconstrained least-squares estimates via pivoted QR, shape (B, d)."""
    H = np.asarray(H, dtype=float)
    Q, R, perm = scipy.linalg.qr(H, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag[0] == 0.0 or diag[-1] <= _RANK_RTOL * diag[0]:
        raise DecodeFailure("zero forcing needs a full-column-rank channel")
    z = scipy.linalg.solve_triangular(R, Q.T @ np.atleast_2d(X).T)
    S = np.empty_like(z)
    S[perm] = z
    return S.T


def zf_batch(H, X, constellation: Constellation) -> np.ndarray:
    return constellation.slice(zf_soft(H, X))


def zf_detect(problem: Problem) -> DetectorOutput:
    soft = zf_soft(problem.H, problem.x)[0]
    return _output(problem, problem.constellation.slice(soft), soft)


# -- linear MMSE -----------------------------------------------------------------

def mmse_soft(H, X, reg: float) -> np.ndarray:
    H = np.asarray(H, dtype=float)
    G = H.T @ H + reg * np.eye(H.shape[1])
    c = scipy.linalg.cho_factor(G)
    return scipy.linalg.cho_solve(c, H.T @ np.atleast_2d(X).T).T


def mmse_batch(H, X, sigma2, constellation: Constellation) -> np.ndarray:
    return constellation.slice(mmse_soft(H, X, regularizer(sigma2, constellation)))


def mmse_detect(problem: Problem) -> DetectorOutput:
    reg = regularizer(problem.sigma2, problem.constellation)
    soft = mmse_soft(problem.H, problem.x, reg)[0]
    return _output(problem, problem.constellation.slice(soft), soft)


# -- MMSE-SIC / V-BLAST ----------------------------------------------------------

class SicPlan:
    """Detection order and nulling vectors of ordered MMSE-SIC.

    With hard cancellation the order and filters depend only on (H, sigma2),
    so they are computed once per channel and reused for every vector.

    Attributes:
        order: stream indices in detection order.
        filters: row ``t`` is the MMSE nulling vector used at stage ``t``.
        sinrs: post-filter SINR of the stream picked at each stage.
    """

    def __init__(self, H, sigma2: float, constellation: Constellation):
        H = np.asarray(H, dtype=float)
        p, d = H.shape
        reg = regularizer(sigma2, constellation)
        es = constellation.energy
        remaining = list(range(d))
        order, filters, sinrs = [], [], []
        for _ in range(d):
            Hr = H[:, remaining]
            W = np.linalg.inv(Hr.T @ Hr + reg * np.eye(len(remaining)))
            w_diag = np.diag(W)
            # max SINR == min diagonal of the regularized inverse; first index on ties
            t = int(np.argmin(w_diag))
            order.append(remaining[t])
            filters.append(W[t] @ Hr.T)
            sinrs.append(es / (sigma2 * w_diag[t]) - 1.0)
            del remaining[t]
        self.H = H
        self.order = np.array(order, dtype=np.int64)
        self.filters = np.array(filters)
        self.sinrs = np.array(sinrs)

    def detect(self, X, constellation: Constellation) -> np.ndarray:
        Xr = np.array(np.atleast_2d(X), dtype=float, copy=True)
        out = np.empty((Xr.shape[0], self.H.shape[1]), dtype=np.int64)
        for k, w in zip(self.order, self.filters):
            idx = constellation.slice(Xr @ w)
            out[:, k] = idx
            Xr -= np.outer(constellation.symbols[idx], self.H[:, k])
        return out


def mmse_sic_detect(problem: Problem) -> DetectorOutput:
    plan = SicPlan(problem.H, problem.sigma2, problem.constellation)
    return _output(problem, plan.detect(problem.x, problem.constellation)[0])


# -- exhaustive ML ---------------------------------------------------------------

def check_ml_guard(m: int, d: int) -> None:
    if m**d > ML_GUARD:
        raise CapabilityError(
            f"ML search space {m}^{d} exceeds the guard of 2^20 candidates; "
            "disable the 'ml' detector for this configuration"
        )


class MlSearch:
    """Exhaustive minimizer of ||H s - x||^2 over the constellation product set.

    Candidates are visited in lexicographic index order and only a strictly
    smaller metric replaces the incumbent, so ties resolve to the smallest
    index vector.
    """

    def __init__(self, H, constellation: Constellation):
        H = np.asarray(H, dtype=float)
        self.H = H
        self.constellation = constellation
        d = H.shape[1]
        check_ml_guard(constellation.m, d)
        self.n_candidates = constellation.m**d
        self._radix = constellation.m ** np.arange(d - 1, -1, -1, dtype=np.int64)

    def candidates(self, start: int, stop: int) -> np.ndarray:
        n = np.arange(start, stop, dtype=np.int64)
        return (n[:, None] // self._radix[None, :]) % self.constellation.m

    def detect(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        B, p = X.shape
        chunk = max(1, _ML_CHUNK_ELEMS // max(1, B * p))
        best = np.full(B, np.inf)
        best_n = np.zeros(B, dtype=np.int64)
        for start in range(0, self.n_candidates, chunk):
            stop = min(start + chunk, self.n_candidates)
            C = self.constellation.symbols[self.candidates(start, stop)]
            HC = C @ self.H.T
            R = X[:, None, :] - HC[None, :, :]
            dist = np.einsum("bnp,bnp->bn", R, R)
            local = np.argmin(dist, axis=1)
            val = dist[np.arange(B), local]
            better = val < best
            best[better] = val[better]
            best_n[better] = start + local[better]
        return (best_n[:, None] // self._radix[None, :]) % self.constellation.m


def ml_detect(problem: Problem) -> DetectorOutput:
    search = MlSearch(problem.H, problem.constellation)
    return _output(problem, search.detect(problem.x)[0])
