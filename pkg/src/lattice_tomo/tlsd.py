"""Tomographic least-squares decoding.

The decoder projects the system onto every pair of coordinates, scores all
M x M symbol pairs under each projected Gaussian model, and then refines one
probability vector per coordinate by sweeping over the pairs. The hard
decision is the per-coordinate argmax, optionally arbitrated against MMSE-SIC
by the true residual.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .baseline import MlSearch, SicPlan, batch_residual2
from .core import Constellation, Problem, SymbolVector
from .errors import InvalidArgumentError
from .projections import RANK_RTOL, ChannelProjections, PairProjection, SingleProjection

LLR_CLIP = 50.0


@dataclass
class BeliefState:
    """One probability vector per coordinate; ``theta[i, k] = P(s_i = a_k)``.

    ``resets`` counts vectors that underflowed and were reset to uniform.
    """

    theta: np.ndarray
    resets: int = 0

    @classmethod
    def uniform(cls, d: int, m: int) -> "BeliefState":
        return cls(np.full((d, m), 1.0 / m))

    def copy(self) -> "BeliefState":
        return BeliefState(self.theta.copy(), self.resets)

    def argmax(self) -> np.ndarray:
        return np.argmax(self.theta, axis=-1)


@dataclass(frozen=True)
class MetricTable:
    """Pair likelihood scores rescaled so the largest entry is exactly 1."""

    i: int
    j: int
    D: np.ndarray
    log_d: np.ndarray = field(repr=False)

    def scaled(self, c: float) -> "MetricTable":
        return MetricTable(self.i, self.j, self.D * c, self.log_d + np.log(c))


@dataclass(frozen=True)
class TlsdConfig:
    max_sweeps: int = 10
    tol: float = 1e-6
    arbitrate_with_sic: bool = True
    # "zf": soft zero-forcing priors; "uniform": flat priors (d=2 then gives exact marginals)
    init: str = "zf"

    def __post_init__(self):
        if self.init not in ("zf", "uniform"):
            raise InvalidArgumentError("init must be 'zf' or 'uniform'")
        if int(self.max_sweeps) < 1:
            raise InvalidArgumentError("max_sweeps must be >= 1")
        if not self.tol >= 0:
            raise InvalidArgumentError("tol must be nonnegative")


class Winner(str, enum.Enum):
    TLSD = "TLSD"
    MMSE_SIC = "MMSE_SIC"


@dataclass(frozen=True)
class TlsdResult:
    hard: SymbolVector
    posteriors: BeliefState
    bit_llrs: np.ndarray
    sweeps_used: int
    converged: bool
    winner: Winner
    tlsd_hard: SymbolVector
    resets: int = 0


# -- single-problem building blocks ---------------------------------------------

def _normalize_logits(logits):
    logits = logits - logits.max(axis=-1, keepdims=True)
    w = np.exp(logits)
    return w / w.sum(axis=-1, keepdims=True)


def init_beliefs(problem: Problem, single_projections: list[SingleProjection]) -> BeliefState:
    """Soft zero-forcing priors from the single-column projections."""
    a = problem.constellation.symbols
    theta = np.empty((problem.d, a.size))
    for sp in single_projections:
        g = sp.h_i_proj
        h_norm = np.linalg.norm(problem.H[:, sp.i])
        if np.linalg.norm(g) <= RANK_RTOL * h_norm:
            theta[sp.i] = 1.0 / a.size
            continue
        r = a[:, None] * g[None, :] - sp.x_proj[None, :]
        theta[sp.i] = _normalize_logits(-np.einsum("kp,kp->k", r, r) / (2 * problem.sigma2))
    return BeliefState(theta)


def metric_tables(pair_projections: list[PairProjection], sigma2: float, constellation: Constellation):
    """Metric tables evaluated directly from the projected residual norms."""
    a = constellation.symbols
    out = []
    for pp in pair_projections:
        r = (
            pp.x_proj[None, None, :]
            - a[:, None, None] * pp.h_i_proj[None, None, :]
            - a[None, :, None] * pp.h_j_proj[None, None, :]
        )
        log_d = -np.einsum("klp,klp->kl", r, r) / (2 * sigma2)
        log_d -= log_d.max()
        out.append(MetricTable(pp.i, pp.j, np.exp(log_d), log_d))
    return out


def pair_update(beliefs: BeliefState, table: MetricTable) -> BeliefState:
    """Update theta_i and theta_j from one metric table, in place."""
    theta = beliefs.theta[None]
    resets = np.zeros(1, dtype=np.int64)
    kernels.pair_step_numpy(theta, table.D[None], table.i, table.j, resets)
    beliefs.resets += int(resets[0])
    return beliefs


def bit_llrs_from_beliefs(beliefs, constellation: Constellation) -> np.ndarray:
    """Per-bit log ratios ln P(bit=0) - ln P(bit=1), clipped to +-50.

    Accepts a BeliefState or a raw (..., M) probability array.
    """
    theta = beliefs.theta if isinstance(beliefs, BeliefState) else np.asarray(beliefs)
    bits = constellation.bits.astype(float)
    p1 = theta @ bits
    p0 = theta @ (1.0 - bits)
    with np.errstate(divide="ignore"):
        llr = np.log(p0) - np.log(p1)
    return np.clip(llr, -LLR_CLIP, LLR_CLIP)


def pseudo_log_likelihood(s, tables: list[MetricTable]) -> float:
    """Sum of pairwise log scores of a hard vector (a diagnostic, <= 0).

    ``s`` may be a SymbolVector, an index array, or a BeliefState (argmax used).
    """
    if isinstance(s, BeliefState):
        idx = s.argmax()
    elif isinstance(s, SymbolVector):
        idx = s.indices
    else:
        idx = np.asarray(s, dtype=np.int64)
    return float(sum(t.log_d[idx[t.i], idx[t.j]] for t in tables))


def exhaustive_marginals(problem: Problem) -> np.ndarray:
    """Exact per-coordinate posteriors under uniform priors, by enumeration."""
    search = MlSearch(problem.H, problem.constellation)
    cand = search.candidates(0, search.n_candidates)
    S = problem.constellation.symbols[cand]
    r = S @ problem.H.T - problem.x
    logw = -np.einsum("np,np->n", r, r) / (2 * problem.sigma2)
    w = np.exp(logw - logw.max())
    w /= w.sum()
    out = np.zeros((problem.d, problem.constellation.m))
    for i in range(problem.d):
        np.add.at(out[i], cand[:, i], w)
    return out


# -- frame decoder --------------------------------------------------------------

@dataclass
class FrameDecision:
    hard: np.ndarray
    tlsd_hard: np.ndarray
    theta: np.ndarray
    sweeps_used: np.ndarray
    converged: np.ndarray
    sic_won: np.ndarray
    resets: np.ndarray


class TlsdDecoder:
    """Decoder bound to one channel realization and noise level.

    Projections, and the MMSE-SIC plan used for arbitration, are built once;
    :meth:`decode` then handles any number of received vectors.
    """

    def __init__(self, H, sigma2, constellation, config=None, projections=None, sic_plan=None):
        self.H = np.asarray(H, dtype=float)
        self.sigma2 = float(sigma2)
        self.constellation = constellation
        self.config = config or TlsdConfig()
        self.proj = projections if projections is not None else ChannelProjections(self.H)
        self._sic = sic_plan
        h_norms = np.linalg.norm(self.H, axis=0)
        self._degenerate = np.sqrt(self.proj.single_norm2) <= RANK_RTOL * h_norms

    @property
    def sic_plan(self) -> SicPlan:
        if self._sic is None:
            self._sic = SicPlan(self.H, self.sigma2, self.constellation)
        return self._sic

    def initial_beliefs(self, X) -> np.ndarray:
        a = self.constellation.symbols
        u = self.proj.single_correlations(X)  # (B, d)
        quad = a[None, None, :] ** 2 * self.proj.single_norm2[None, :, None]
        logits = -(quad - 2 * a[None, None, :] * u[:, :, None]) / (2 * self.sigma2)
        logits[:, self._degenerate, :] = 0.0
        return _normalize_logits(logits)

    def log_tables(self, X) -> np.ndarray:
        """Log metric tables (B, P, M, M) from projected inner products.

        Uses the expansion of ||x_ij - h_i a_k - h_j a_l||^2; the ||x_ij||^2
        term is constant per table and drops out with the max shift.
        """
        a = self.constellation.symbols
        p = self.proj
        ui, uj = p.pair_correlations(X)  # (B, P)
        ak = a[:, None]
        al = a[None, :]
        quad = (
            ak**2 * p.g_ii[:, None, None]
            + al**2 * p.g_jj[:, None, None]
            + 2 * ak * al * p.g_ij[:, None, None]
        )  # (P, M, M)
        lin = ak * ui[:, :, None, None] + al * uj[:, :, None, None]  # (B, P, M, M)
        log_d = (2 * lin - quad[None]) / (2 * self.sigma2)
        log_d -= log_d.max(axis=(2, 3), keepdims=True)
        return log_d

    def decode(self, X) -> FrameDecision:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        cfg = self.config
        if cfg.init == "uniform":
            m = self.constellation.m
            theta = np.full((X.shape[0], self.H.shape[1], m), 1.0 / m)
        else:
            theta = np.ascontiguousarray(self.initial_beliefs(X))
        tables = np.exp(self.log_tables(X))
        pairs = self.proj.pairs
        sweeps, conv, resets = kernels.run_sweeps(
            theta, tables, pairs[:, 0], pairs[:, 1], cfg.max_sweeps, cfg.tol
        )
        tlsd_hard = np.argmax(theta, axis=2)
        hard = tlsd_hard
        sic_won = np.zeros(X.shape[0], dtype=bool)
        if cfg.arbitrate_with_sic:
            a = self.constellation.symbols
            sic = self.sic_plan.detect(X, self.constellation)
            r_tlsd = batch_residual2(self.H, X, a[tlsd_hard])
            r_sic = batch_residual2(self.H, X, a[sic])
            sic_won = r_sic < r_tlsd
            hard = np.where(sic_won[:, None], sic, tlsd_hard)
        return FrameDecision(hard, tlsd_hard, theta, sweeps, conv, sic_won, resets)


def tlsd_detect(problem: Problem, config: TlsdConfig | None = None) -> TlsdResult:
    dec = TlsdDecoder(problem.H, problem.sigma2, problem.constellation, config)
    out = dec.decode(problem.x[None])
    beliefs = BeliefState(out.theta[0], int(out.resets[0]))
    c = problem.constellation
    return TlsdResult(
        hard=SymbolVector.from_indices(out.hard[0], c),
        posteriors=beliefs,
        bit_llrs=bit_llrs_from_beliefs(beliefs, c),
        sweeps_used=int(out.sweeps_used[0]),
        converged=bool(out.converged[0]),
        winner=Winner.MMSE_SIC if out.sic_won[0] else Winner.TLSD,
        tlsd_hard=SymbolVector.from_indices(out.tlsd_hard[0], c),
        resets=int(out.resets[0]),
    )
