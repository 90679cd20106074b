"""Fast invariant checks runnable from the command line.

``run_selftest(fault="skip-qr-column")`` swaps in a projector whose basis is
missing one column, to confirm the annihilation check actually bites.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .core import Problem, make_constellation, sample_channel
from .projections import (
    PairProjection,
    compute_pair_projection,
    orthonormal_basis,
    pair_indices,
    project_out,
)
from .tlsd import BeliefState, MetricTable, exhaustive_marginals, metric_tables, pair_update

FAULTS = ("skip-qr-column",)


def _broken_pair_projection(H, x, i, j):
    d = H.shape[1]
    rest = [k for k in range(d) if k not in (i, j)]
    Q = orthonormal_basis(H[:, rest])[:, :-1]
    return PairProjection(i, j, project_out(Q, H[:, i]), project_out(Q, H[:, j]), project_out(Q, x), Q)


def _pairs(rng, n, projector):
    for t in range(n):
        p, d = [(4, 4), (8, 8), (12, 8)][t % 3]
        H = sample_channel(rng, p, d)
        x = rng.standard_normal(p)
        for i, j in pair_indices(d):
            yield H, projector(H, x, int(i), int(j))


def check_annihilation(rng, n, projector):
    worst = 0.0
    for H, pp in _pairs(rng, n, projector):
        for k in range(H.shape[1]):
            if k in (pp.i, pp.j):
                continue
            worst = max(worst, np.linalg.norm(pp.apply(H[:, k])) / np.linalg.norm(H[:, k]))
    return worst <= 1e-9, f"max ||P_ij h_k|| / ||h_k|| = {worst:.2e}"


def check_idempotence(rng, n, projector):
    worst = 0.0
    for H, pp in _pairs(rng, n, projector):
        v = rng.standard_normal(H.shape[0])
        once = pp.apply(v)
        worst = max(worst, np.linalg.norm(pp.apply(once) - once) / max(np.linalg.norm(once), 1e-300))
    return worst <= 1e-10, f"max relative deviation {worst:.2e}"


def check_symmetry(rng, n, projector):
    worst = 0.0
    for H, pp in _pairs(rng, n, projector):
        u, v = rng.standard_normal((2, H.shape[0]))
        scale = np.linalg.norm(u) * np.linalg.norm(v)
        worst = max(worst, abs(pp.apply(u) @ v - u @ pp.apply(v)) / scale)
    return worst <= 1e-10, f"max |<Pu,v> - <u,Pv>| / (|u||v|) = {worst:.2e}"


def _random_beliefs(rng, d, m):
    theta = rng.random((d, m)) + 1e-3
    return BeliefState(theta / theta.sum(axis=1, keepdims=True))


def check_normalization(rng, n, projector):
    worst = 0.0
    for _ in range(n):
        m = int(rng.choice([2, 4, 8]))
        b = _random_beliefs(rng, 4, m)
        for i, j in pair_indices(4):
            pair_update(b, MetricTable(int(i), int(j), rng.random((m, m)), np.zeros((m, m))))
            worst = max(worst, np.abs(b.theta.sum(axis=1) - 1).max())
            if (b.theta < 0).any() or not np.isfinite(b.theta).all():
                return False, "negative or non-finite belief entry"
    return worst <= 1e-12, f"max |sum - 1| = {worst:.2e}"


def check_one_hot_fixed_point(rng, n, projector):
    for _ in range(n):
        m = int(rng.choice([2, 4]))
        idx = rng.integers(0, m, size=4)
        b = BeliefState(np.eye(m)[idx])
        before = b.theta.copy()
        for i, j in pair_indices(4):
            pair_update(b, MetricTable(int(i), int(j), rng.random((m, m)) + 0.01, np.zeros((m, m))))
        if not np.array_equal(before, b.theta):
            return False, "one-hot state moved"
    return True, "exact"


def check_d2_exactness(rng, n, projector):
    worst = 0.0
    for t in range(n):
        c = make_constellation([2, 4][t % 2])
        sigma2 = [0.1, 1.0, 10.0][t % 3]
        H = rng.standard_normal((2, 2))
        x = H @ c.symbols[rng.integers(0, c.m, 2)] + rng.standard_normal(2) * np.sqrt(sigma2)
        prob = Problem(H, x, sigma2, c)
        table = metric_tables([projector(H, x, 0, 1)], sigma2, c)[0]
        b = pair_update(BeliefState.uniform(2, c.m), table)
        worst = max(worst, np.abs(b.theta - exhaustive_marginals(prob)).max())
    return worst <= 1e-10, f"max |theta - exact marginal| = {worst:.2e}"


def check_scale_invariance(rng, n, projector):
    worst = 0.0
    for _ in range(n):
        m = 4
        b1 = _random_beliefs(rng, 3, m)
        b2 = b1.copy()
        scale = float(np.exp(rng.uniform(-20, 20)))
        for i, j in pair_indices(3):
            t = MetricTable(int(i), int(j), rng.random((m, m)), np.zeros((m, m)))
            pair_update(b1, t)
            pair_update(b2, t.scaled(scale))
        worst = max(worst, np.abs(b1.theta - b2.theta).max())
    return worst <= 1e-14, f"max deviation {worst:.2e}"


def check_backends_agree(rng, n, projector):
    B, d, m = 8, 5, 4
    P = pair_indices(d)
    worst = 0.0
    for _ in range(n):
        theta = rng.random((B, d, m))
        theta /= theta.sum(axis=2, keepdims=True)
        tables = rng.random((B, len(P), m, m))
        t1, t2 = theta.copy(), theta.copy()
        r1 = kernels.run_sweeps_numpy(t1, tables, P[:, 0], P[:, 1], 10, 1e-6)
        r2 = kernels.run_sweeps_numba(t2, tables, P[:, 0], P[:, 1], 10, 1e-6)
        worst = max(worst, np.abs(t1 - t2).max())
        if not all(np.array_equal(a, b) for a, b in zip(r1, r2)):
            return False, "sweep counters differ between backends"
    return worst <= 1e-12, f"max |numpy - compiled| = {worst:.2e}"


CHECKS = {
    "annihilation": (check_annihilation, 60),
    "idempotence": (check_idempotence, 60),
    "symmetry": (check_symmetry, 60),
    "normalization": (check_normalization, 50),
    "one-hot fixed point": (check_one_hot_fixed_point, 50),
    "d2 exactness": (check_d2_exactness, 300),
    "metric-scale invariance": (check_scale_invariance, 50),
    "kernel backends agree": (check_backends_agree, 10),
}


def run_selftest(quick: bool = False, fault: str | None = None, seed: int = 20240101):
    """Run every check; returns a list of ``(name, passed, detail)``."""
    if fault is not None and fault not in FAULTS:
        raise ValueError(f"unknown fault {fault!r}")
    projector = _broken_pair_projection if fault == "skip-qr-column" else compute_pair_projection
    rng = np.random.default_rng(seed)
    out = []
    for name, (fn, n) in CHECKS.items():
        ok, detail = fn(rng, max(3, n // 10) if quick else n, projector)
        out.append((name, bool(ok), detail))
    return out
