"""Seeded Monte Carlo SER simulation under block fading.

Every (SNR point, channel realization) pair is an independent task with its own
generator seeded from ``(seed, snr_idx, chan_idx)``. Results are integer counts
reduced in task order, so the output does not depend on the worker count.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .baseline import MlSearch, SicPlan, check_ml_guard, mmse_batch, zf_batch
from .core import make_constellation, sample_channel, sigma2_from_snr
from .errors import CapabilityError, ConfigError, DecodeFailure
from .projections import ChannelProjections
from .tlsd import TlsdConfig, TlsdDecoder

log = logging.getLogger(__name__)

DETECTORS = ("zf", "mmse", "mmse-sic", "tlsd", "ml")
DEFAULT_DETECTORS = ("mmse", "mmse-sic", "tlsd", "ml")


@dataclass(frozen=True)
class SimConfig:
    d: int = 8
    p: int = 8
    constellation_m: int = 2
    snr_grid_db: tuple = (4.0, 6.0, 8.0, 10.0, 12.0, 14.0)
    n_channels: int = 500
    frame_len: int = 100
    detectors: tuple = DEFAULT_DETECTORS
    seed: int = 0
    tlsd: TlsdConfig = field(default_factory=TlsdConfig)

    def __post_init__(self):
        object.__setattr__(self, "snr_grid_db", tuple(float(s) for s in self.snr_grid_db))
        object.__setattr__(self, "detectors", tuple(self.detectors))
        if not isinstance(self.d, int) or self.d < 2:
            raise ConfigError("d", "must be an integer >= 2")
        if not isinstance(self.p, int) or self.p < self.d:
            raise ConfigError("p", "must be an integer >= d")
        m = self.constellation_m
        if not isinstance(m, int) or m < 2 or m & (m - 1):
            raise ConfigError("constellation_m", "must be a power of two >= 2")
        if not self.snr_grid_db:
            raise ConfigError("snr_grid_db", "must be nonempty")
        if not isinstance(self.n_channels, int) or self.n_channels < 1:
            raise ConfigError("n_channels", "must be >= 1")
        if not isinstance(self.frame_len, int) or self.frame_len < 1:
            raise ConfigError("frame_len", "must be >= 1")
        if not self.detectors:
            raise ConfigError("detectors", "must name at least one detector")
        bad = [name for name in self.detectors if name not in DETECTORS]
        if bad:
            raise ConfigError("detectors", f"unknown detector(s) {bad}; choose from {list(DETECTORS)}")
        if len(set(self.detectors)) != len(self.detectors):
            raise ConfigError("detectors", "duplicate entries")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigError("seed", "must be a 64-bit unsigned integer")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["snr_grid_db"] = list(self.snr_grid_db)
        out["detectors"] = list(self.detectors)
        return out


@dataclass(frozen=True)
class SerRecord:
    snr_db: float
    detector: str
    symbol_errors: int
    symbols_total: int
    vector_errors: int
    frames_total: int

    @property
    def ser(self) -> float:
        return self.symbol_errors / self.symbols_total

    @property
    def stderr(self) -> float:
        """Binomial standard error of the SER estimate."""
        p = self.ser
        return float(np.sqrt(p * (1 - p) / self.symbols_total))


@dataclass
class PointStats:
    """Everything gathered at one SNR point; ``records`` is the public part."""

    snr_db: float
    sigma2: float
    records: list
    n_vectors: int
    energy_sum: float
    tlsd_converged: int = 0
    tlsd_sweeps: int = 0
    tlsd_sic_wins: int = 0

    @property
    def mean_energy_per_antenna(self) -> float:
        return self.energy_sum / self.n_vectors


def task_rng(seed: int, snr_idx: int, chan_idx: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, snr_idx, chan_idx]))


def _channel_task(args):
    """Simulate one channel realization; returns integer counts keyed by detector."""
    config, snr_idx, chan_idx, sigma2 = args
    c = make_constellation(config.constellation_m)
    rng = task_rng(config.seed, snr_idx, chan_idx)
    H = sample_channel(rng, config.p, config.d)
    S = rng.integers(0, c.m, size=(config.frame_len, config.d))
    N = rng.standard_normal((config.frame_len, config.p)) * np.sqrt(sigma2)
    X = c.symbols[S] @ H.T + N

    counts = {}
    extra = {"energy": float(np.einsum("bp,bp->", X, X)) / config.p}
    sic_plan = None
    if "mmse-sic" in config.detectors or ("tlsd" in config.detectors and config.tlsd.arbitrate_with_sic):
        sic_plan = SicPlan(H, sigma2, c)
    for name in config.detectors:
        if name == "zf":
            est = zf_batch(H, X, c)
        elif name == "mmse":
            est = mmse_batch(H, X, sigma2, c)
        elif name == "mmse-sic":
            est = sic_plan.detect(X, c)
        elif name == "ml":
            est = MlSearch(H, c).detect(X)
        else:
            dec = TlsdDecoder(H, sigma2, c, config.tlsd, ChannelProjections(H), sic_plan)
            out = dec.decode(X)
            est = out.hard
            extra["converged"] = int(out.converged.sum())
            extra["sweeps"] = int(out.sweeps_used.sum())
            extra["sic_wins"] = int(out.sic_won.sum())
        wrong = est != S
        counts[name] = (int(wrong.sum()), int(wrong.any(axis=1).sum()))
    return counts, extra


def _map_tasks(tasks, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        return [_channel_task(t) for t in tasks]
    chunk = max(1, len(tasks) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_channel_task, tasks, chunksize=chunk))


def simulate_point(config: SimConfig, snr_db: float, snr_idx: int | None = None, workers: int = 1) -> PointStats:
    if snr_idx is None:
        try:
            snr_idx = config.snr_grid_db.index(float(snr_db))
        except ValueError:
            raise ConfigError("snr_grid_db", f"{snr_db} dB is not on the configured grid") from None
    c = make_constellation(config.constellation_m)
    if "ml" in config.detectors:
        check_ml_guard(c.m, config.d)
    sigma2 = sigma2_from_snr(snr_db, c, config.d)
    tasks = [(config, snr_idx, k, sigma2) for k in range(config.n_channels)]
    try:
        results = _map_tasks(tasks, workers)
    except (CapabilityError, DecodeFailure) as exc:
        raise type(exc)(f"at SNR {snr_db} dB: {exc}") from exc

    n_vec = config.n_channels * config.frame_len
    stats = PointStats(snr_db, sigma2, [], n_vec, 0.0)
    totals = {name: [0, 0] for name in config.detectors}
    for counts, extra in results:
        for name, (se, ve) in counts.items():
            totals[name][0] += se
            totals[name][1] += ve
        stats.energy_sum += extra["energy"]
        stats.tlsd_converged += extra.get("converged", 0)
        stats.tlsd_sweeps += extra.get("sweeps", 0)
        stats.tlsd_sic_wins += extra.get("sic_wins", 0)
    for name in config.detectors:
        se, ve = totals[name]
        stats.records.append(SerRecord(float(snr_db), name, se, n_vec * config.d, ve, n_vec))
    log.info(
        "snr=%g dB sigma2=%.4g %s",
        snr_db,
        sigma2,
        " ".join(f"{r.detector}={r.ser:.3e}" for r in stats.records),
    )
    return stats


def run_point(config: SimConfig, snr_db: float, workers: int = 1) -> list[SerRecord]:
    return simulate_point(config, snr_db, workers=workers).records


def run_sweep(config: SimConfig, workers: int = 1, on_point=None) -> list[SerRecord]:
    """SER records over the whole grid, ordered by grid point then detector.

    ``on_point(stats, seconds)`` is called after each point if given.
    """
    records = []
    for idx, snr in enumerate(config.snr_grid_db):
        t0 = time.perf_counter()
        stats = simulate_point(config, snr, idx, workers)
        if on_point is not None:
            on_point(stats, time.perf_counter() - t0)
        records.extend(stats.records)
    return records
