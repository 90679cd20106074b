"""Hot loops of the decoder: pairwise belief sweeps over a frame.

Two interchangeable backends share one contract:

    run_sweeps(theta, tables, pi, pj, max_sweeps, tol)
        theta   (B, d, M) float64, updated in place
        tables  (B, P, M, M) float64 metric tables, one per pair
        pi, pj  (P,) int64 pair indices, i < j
    -> sweeps_used (B,) int64, converged (B,) bool, resets (B,) int64

The numba kernel loops vector by vector; the numpy fallback vectorizes over the
batch and loops over pairs in Python. ``LATTICE_TOMO_NUMBA=0`` selects the
fallback.
"""

from __future__ import annotations

import numpy as np

from ._accel import USE_NUMBA, njit


def _normalize_rows(t, resets):
    tot = t.sum(axis=1)
    dead = tot <= 0.0
    if dead.any():
        t[dead] = 1.0
        tot[dead] = t.shape[1]
        resets += dead
    return t / tot[:, None]


def pair_step_numpy(theta, D, i: int, j: int, resets) -> None:
    """One pair update for every row of the batch.

    Both messages are formed from the beliefs held before the update, so with
    uniform priors on a two-symbol system the result is the exact marginal
    posterior. Rows whose normalizer underflows to zero are reset to uniform
    and counted in ``resets``.
    """
    ti = theta[:, i, :]
    tj = theta[:, j, :]
    new_i = ti * np.einsum("bkl,bl->bk", D, tj)
    new_j = tj * np.einsum("bkl,bk->bl", D, ti)
    theta[:, i, :] = _normalize_rows(new_i, resets)
    theta[:, j, :] = _normalize_rows(new_j, resets)


def run_sweeps_numpy(theta, tables, pi, pj, max_sweeps: int, tol: float):
    B = theta.shape[0]
    sweeps_used = np.zeros(B, dtype=np.int64)
    converged = np.zeros(B, dtype=bool)
    resets = np.zeros(B, dtype=np.int64)
    active = np.arange(B)
    for sweep in range(max_sweeps):
        if active.size == 0:
            break
        th = theta[active]
        D = tables[active]
        rs = np.zeros(active.size, dtype=np.int64)
        start = th.copy()
        for n in range(pi.shape[0]):
            pair_step_numpy(th, D[:, n], int(pi[n]), int(pj[n]), rs)
        theta[active] = th
        resets[active] += rs
        sweeps_used[active] = sweep + 1
        delta = np.abs(th - start).reshape(active.size, -1).max(axis=1)
        done = delta < tol
        converged[active[done]] = True
        active = active[~done]
    return sweeps_used, converged, resets


@njit(cache=True)
def _sweeps_nb(theta, tables, pi, pj, max_sweeps, tol, sweeps_used, converged, resets):
    B, d, M = theta.shape
    P = pi.shape[0]
    start = np.empty((d, M))
    msg_i = np.empty(M)
    msg_j = np.empty(M)
    for b in range(B):
        th = theta[b]
        for s in range(max_sweeps):
            start[:, :] = th
            for n in range(P):
                i = pi[n]
                j = pj[n]
                D = tables[b, n]
                tot_i = 0.0
                for k in range(M):
                    acc = 0.0
                    for l in range(M):
                        acc += D[k, l] * th[j, l]
                    msg_i[k] = th[i, k] * acc
                    tot_i += msg_i[k]
                tot_j = 0.0
                for l in range(M):
                    acc = 0.0
                    for k in range(M):
                        acc += D[k, l] * th[i, k]
                    msg_j[l] = th[j, l] * acc
                    tot_j += msg_j[l]
                if tot_i > 0.0:
                    for k in range(M):
                        th[i, k] = msg_i[k] / tot_i
                else:
                    resets[b] += 1
                    for k in range(M):
                        th[i, k] = 1.0 / M
                if tot_j > 0.0:
                    for l in range(M):
                        th[j, l] = msg_j[l] / tot_j
                else:
                    resets[b] += 1
                    for l in range(M):
                        th[j, l] = 1.0 / M
            delta = 0.0
            for a in range(d):
                for k in range(M):
                    v = abs(th[a, k] - start[a, k])
                    if v > delta:
                        delta = v
            sweeps_used[b] = s + 1
            if delta < tol:
                converged[b] = True
                break


def run_sweeps_numba(theta, tables, pi, pj, max_sweeps: int, tol: float):
    B = theta.shape[0]
    sweeps_used = np.zeros(B, dtype=np.int64)
    converged = np.zeros(B, dtype=np.bool_)
    resets = np.zeros(B, dtype=np.int64)
    _sweeps_nb(
        theta,
        np.ascontiguousarray(tables),
        np.ascontiguousarray(pi, dtype=np.int64),
        np.ascontiguousarray(pj, dtype=np.int64),
        int(max_sweeps),
        float(tol),
        sweeps_used,
        converged,
        resets,
    )
    return sweeps_used, converged, resets


run_sweeps = run_sweeps_numba if USE_NUMBA else run_sweeps_numpy
BACKEND = "numba" if USE_NUMBA else "numpy"
