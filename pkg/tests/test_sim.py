import numpy as np
import pytest

from lattice_tomo.errors import CapabilityError, ConfigError
from lattice_tomo.sim import SimConfig, run_point, run_sweep, simulate_point
from lattice_tomo.tlsd import TlsdConfig

ALL = ("zf", "mmse", "mmse-sic", "tlsd", "ml")


def small(**kw):
    base = dict(d=4, p=4, constellation_m=2, snr_grid_db=(0.0, 6.0, 12.0), n_channels=20, frame_len=25, detectors=ALL, seed=3)
    base.update(kw)
    return SimConfig(**base)


def test_noiseless_point_has_no_errors():
    cfg = small(snr_grid_db=(200.0,))
    for r in run_point(cfg, 200.0):
        assert r.symbol_errors == 0 and r.vector_errors == 0 and r.ser == 0.0


def test_records_shape():
    cfg = small()
    recs = run_sweep(cfg)
    assert len(recs) == 3 * len(ALL)
    for r in recs:
        assert r.symbols_total == cfg.n_channels * cfg.frame_len * cfg.d
        assert r.frames_total == cfg.n_channels * cfg.frame_len
        assert 0 <= r.ser <= 1
    assert [r.detector for r in recs[:5]] == list(ALL)


def test_single_point_grid_matches_run_point():
    cfg = small(snr_grid_db=(6.0,))
    assert run_sweep(cfg) == run_point(cfg, 6.0)


def test_repeat_runs_identical():
    cfg = small()
    assert run_sweep(cfg) == run_sweep(cfg)


def test_workers_do_not_change_results():
    cfg = small(snr_grid_db=(6.0,))
    assert run_sweep(cfg, workers=1) == run_sweep(cfg, workers=3)


def test_seed_changes_results():
    assert run_sweep(small(seed=1)) != run_sweep(small(seed=2))


def test_noise_dominated_limit():
    cfg = SimConfig(d=4, p=4, snr_grid_db=(-40.0,), n_channels=250, frame_len=100, detectors=ALL, seed=5)
    for r in run_point(cfg, -40.0):
        assert r.symbols_total >= 10**5
        assert abs(r.ser - 0.5) <= 0.02, r


def test_ser_non_increasing_in_snr():
    cfg = small(snr_grid_db=(0.0, 4.0, 8.0, 12.0), n_channels=60, frame_len=100)
    recs = run_sweep(cfg)
    for det in ALL:
        rs = [r for r in recs if r.detector == det]
        for lo, hi in zip(rs, rs[1:]):
            assert hi.ser <= lo.ser + 2 * np.hypot(lo.stderr, hi.stderr), (det, lo, hi)


def test_off_grid_snr_rejected():
    with pytest.raises(ConfigError):
        run_point(small(), 5.0)


def test_ml_guard_propagates():
    cfg = SimConfig(d=16, p=16, constellation_m=4, snr_grid_db=(10.0,), n_channels=1, frame_len=1)
    with pytest.raises(CapabilityError):
        run_sweep(cfg)


@pytest.mark.parametrize(
    "kw, field",
    [
        (dict(d=1), "d"),
        (dict(p=3), "p"),
        (dict(constellation_m=3), "constellation_m"),
        (dict(snr_grid_db=()), "snr_grid_db"),
        (dict(n_channels=0), "n_channels"),
        (dict(frame_len=0), "frame_len"),
        (dict(detectors=("mmse", "sphere")), "detectors"),
        (dict(detectors=()), "detectors"),
        (dict(seed=-1), "seed"),
    ],
)
def test_config_validation(kw, field):
    with pytest.raises(ConfigError) as exc:
        small(**kw)
    assert exc.value.field == field


def test_point_stats_tlsd_counters():
    cfg = small(snr_grid_db=(12.0,), detectors=("tlsd",))
    st = simulate_point(cfg, 12.0)
    assert 0 < st.tlsd_converged <= st.n_vectors
    assert st.n_vectors <= st.tlsd_sweeps <= 10 * st.n_vectors


def test_no_arbitration_config_runs():
    cfg = small(snr_grid_db=(6.0,), detectors=("tlsd", "mmse-sic"), tlsd=TlsdConfig(arbitrate_with_sic=False))
    st = simulate_point(cfg, 6.0)
    assert st.tlsd_sic_wins == 0
