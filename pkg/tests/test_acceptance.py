"""Exit criteria for the package, one test per criterion.

Each test prints a PASS/FAIL line; all lines are repeated in the pytest
terminal summary under "acceptance criteria".
"""

import itertools
import time
from pathlib import Path

import numpy as np

from lattice_tomo.baseline import ml_detect, mmse_sic_detect, residual2
from lattice_tomo.cli import main as cli_main
from lattice_tomo.cli import records_to_csv
from lattice_tomo.core import Problem, make_constellation, sample_channel
from lattice_tomo.projections import ChannelProjections
from lattice_tomo.sim import SimConfig, run_sweep, simulate_point
from lattice_tomo.tlsd import BeliefState, MetricTable, TlsdConfig, metric_tables, pair_update, tlsd_detect

DATA = Path(__file__).parent / "data"
GRID = (4.0, 6.0, 8.0, 10.0, 12.0, 14.0)
BPSK = make_constellation(2)
PAM4 = make_constellation(4)


def pooled_se(a, b):
    """Pooled binomial standard error of the difference of two SER estimates."""
    n1, n2 = a.symbols_total, b.symbols_total
    p = (a.symbol_errors + b.symbol_errors) / (n1 + n2)
    return float(np.sqrt(p * (1 - p) * (1 / n1 + 1 / n2)))


def by_snr(records):
    out = {}
    for r in records:
        out.setdefault(r.snr_db, {})[r.detector] = r
    return out


def test_c1_projection_algebra(report):
    rng = np.random.default_rng(1)
    shapes = [(4, 4), (8, 8), (12, 8)]
    worst = {"idempotence": 0.0, "symmetry": 0.0, "annihilation": 0.0}
    t0 = time.perf_counter()
    for t in range(200):
        p, d = shapes[t % 3]
        H = sample_channel(rng, p, d)
        for pp in ChannelProjections(H).pair_projections(rng.standard_normal(p)):
            u, v = rng.standard_normal((2, p))
            once = pp.apply(u)
            worst["idempotence"] = max(worst["idempotence"], np.linalg.norm(pp.apply(once) - once) / np.linalg.norm(once))
            sym = abs(pp.apply(u) @ v - u @ pp.apply(v)) / (np.linalg.norm(u) * np.linalg.norm(v))
            worst["symmetry"] = max(worst["symmetry"], sym)
            for k in set(range(d)) - {pp.i, pp.j}:
                ratio = np.linalg.norm(pp.apply(H[:, k])) / np.linalg.norm(H[:, k])
                worst["annihilation"] = max(worst["annihilation"], ratio)
    elapsed = time.perf_counter() - t0
    ok = worst["idempotence"] <= 1e-10 and worst["symmetry"] <= 1e-10 and worst["annihilation"] <= 1e-9 and elapsed < 5
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f", {elapsed:.2f}s"
    assert report("C1 projection algebra", ok, detail)


def brute_marginals(H, x, sigma2, symbols):
    m = len(symbols)
    w = np.zeros((m, m))
    for k, l in itertools.product(range(m), repeat=2):
        r = x - H[:, 0] * symbols[k] - H[:, 1] * symbols[l]
        w[k, l] = -(r @ r) / (2 * sigma2)
    w = np.exp(w - w.max())
    w /= w.sum()
    return np.stack([w.sum(axis=1), w.sum(axis=0)])


def test_c2_d2_exactness(report):
    rng = np.random.default_rng(2)
    worst = 0.0
    for t in range(1000):
        c = (BPSK, PAM4)[t % 2]
        sigma2 = (0.1, 1.0, 10.0)[t % 3]
        H = rng.standard_normal((2, 2))
        x = H @ c.symbols[rng.integers(0, c.m, 2)] + rng.standard_normal(2) * np.sqrt(sigma2)
        (table,) = metric_tables(ChannelProjections(H).pair_projections(x), sigma2, c)
        b = pair_update(BeliefState.uniform(2, c.m), table)
        worst = max(worst, np.abs(b.theta - brute_marginals(H, x, sigma2, c.symbols)).max())
    assert report("C2 d=2 exactness", worst <= 1e-10, f"max elementwise error {worst:.2e} over 1000 problems")


def test_c3_ml_oracle(report):
    rng = np.random.default_rng(3)
    mismatches = 0
    for _ in range(500):
        H = rng.standard_normal((4, 4))
        x = H @ BPSK.symbols[rng.integers(0, 2, 4)] + rng.standard_normal(4)
        best, best_s = np.inf, None
        for s0 in (-1.0, 1.0):
            for s1 in (-1.0, 1.0):
                for s2 in (-1.0, 1.0):
                    for s3 in (-1.0, 1.0):
                        s = np.array([s0, s1, s2, s3])
                        val = np.sum((H @ s - x) ** 2)
                        if val < best:
                            best, best_s = val, s
        mismatches += not np.array_equal(ml_detect(Problem(H, x, 1.0, BPSK)).hard.values, best_s)
    assert report("C3 ML oracle equivalence", mismatches == 0, f"{mismatches} mismatches in 500 problems")


def test_c4_noiseless_recovery(report):
    cfg = SimConfig(d=8, p=8, snr_grid_db=(200.0,), n_channels=100, frame_len=100,
                    detectors=("zf", "mmse", "mmse-sic", "tlsd", "ml"), seed=4)
    recs = run_sweep(cfg)
    errs = {r.detector: r.symbol_errors for r in recs}
    assert report("C4 noiseless recovery", all(v == 0 for v in errs.values()), f"symbol errors {errs}")


def test_c5_fig1_ordering(report):
    cfg = SimConfig(d=8, p=8, constellation_m=2, snr_grid_db=GRID, n_channels=500, frame_len=100,
                    detectors=("mmse", "mmse-sic", "tlsd", "ml"), seed=7)
    t0 = time.perf_counter()
    recs = run_sweep(cfg)
    elapsed = time.perf_counter() - t0
    violations, strict = [], 0
    for snr, r in by_snr(recs).items():
        for better, worse in (("ml", "tlsd"), ("tlsd", "mmse-sic"), ("mmse-sic", "mmse")):
            if r[better].ser > r[worse].ser + 2 * pooled_se(r[better], r[worse]):
                violations.append(f"{better}>{worse}@{snr:g}dB")
        strict += r["tlsd"].ser < r["mmse-sic"].ser
    pinned = (DATA / "fig1_seed7.csv").read_text()
    regression_ok = records_to_csv(recs) == pinned
    ok = not violations and strict >= 4 and elapsed < 600 and regression_ok
    detail = (f"ordering violations {violations or 'none'}, TLSD<SIC strictly at {strict}/6, "
              f"pinned table {'matches' if regression_ok else 'DIFFERS'}, {elapsed:.1f}s")
    assert report("C5 8x8 BPSK ordering", ok, detail)


def test_c6_fig2_ordering(report):
    cfg = SimConfig(d=16, p=16, constellation_m=4, snr_grid_db=GRID, n_channels=200, frame_len=100,
                    detectors=("mmse", "mmse-sic", "tlsd"), seed=7)
    recs = run_sweep(cfg)
    violations, strict = [], 0
    for snr, r in by_snr(recs).items():
        if r["tlsd"].ser > r["mmse-sic"].ser + 2 * pooled_se(r["tlsd"], r["mmse-sic"]):
            violations.append(f"{snr:g}dB")
        strict += r["tlsd"].ser < r["mmse-sic"].ser
    regression_ok = records_to_csv(recs) == (DATA / "fig2_seed7.csv").read_text()
    ok = not violations and strict >= 3 and regression_ok
    detail = (f"TLSD>SIC+2se at {violations or 'no points'}, strictly better at {strict}/6, "
              f"pinned table {'matches' if regression_ok else 'DIFFERS'}")
    assert report("C6 16x16 4-PAM ordering", ok, detail)


# converged fraction at seed 7, frozen from a reference run
PINNED_CONVERGED = 8046


def _convergence_stats():
    cfg = SimConfig(d=8, p=8, snr_grid_db=(10.0,), n_channels=100, frame_len=100, detectors=("tlsd",), seed=7)
    return simulate_point(cfg, 10.0)


def test_c7_convergence_budget(report):
    st = _convergence_stats()
    frac = st.tlsd_converged / st.n_vectors
    assert report(
        "C7 convergence within 10 sweeps",
        frac >= 0.9,
        f"converged fraction {frac:.4f} over {st.n_vectors} trials (required >= 0.9)",
    )


def test_c7_convergence_pinned(report):
    st = _convergence_stats()
    assert report(
        "C7 convergence regression pin",
        st.tlsd_converged == PINNED_CONVERGED,
        f"{st.tlsd_converged} converged (pinned {PINNED_CONVERGED})",
    )


def test_c8_invariant_suite(report, tmp_path, capsys):
    rng = np.random.default_rng(8)
    norm_err, onehot_ok, scale_err, dominance_ok = 0.0, True, 0.0, True
    pairs = list(itertools.combinations(range(6), 2))
    for _ in range(200):
        m = int(rng.choice([2, 4, 8]))
        t = rng.random((6, m)) + 1e-3
        b1 = BeliefState(t / t.sum(axis=1, keepdims=True))
        b2 = b1.copy()
        hot = BeliefState(np.eye(m)[rng.integers(0, m, 6)])
        hot0 = hot.theta.copy()
        scale = float(np.exp(rng.uniform(-300, 300)))
        for i, j in pairs:
            D = rng.random((m, m)) + 1e-6
            table = MetricTable(i, j, D, np.log(D))
            pair_update(b1, table)
            pair_update(b2, table.scaled(scale))
            pair_update(hot, table)
            norm_err = max(norm_err, np.abs(b1.theta[[i, j]].sum(axis=1) - 1).max())
            if (b1.theta < 0).any():
                norm_err = np.inf
        onehot_ok &= np.array_equal(hot.theta, hot0)
        scale_err = max(scale_err, np.abs(b1.theta - b2.theta).max())
    for _ in range(300):
        c = (BPSK, PAM4)[int(rng.integers(0, 2))]
        H = rng.standard_normal((8, 8))
        x = H @ c.symbols[rng.integers(0, c.m, 8)] + rng.standard_normal(8) * 2
        prob = Problem(H, x, 4.0, c)
        res = tlsd_detect(prob)
        r = residual2(H, x, res.hard.values)
        dominance_ok &= r <= residual2(H, x, res.tlsd_hard.values) and r <= mmse_sic_detect(prob).residual2

    base = ["simulate", "--d", "6", "--p", "6", "--mod", "2", "--snr", "2:4:14", "--channels", "40",
            "--frame-len", "50", "--seed", "123", "--quiet"]
    outputs = []
    for run, workers in enumerate((1, 1, 4)):
        out = tmp_path / f"run{run}"
        assert cli_main(base + ["--workers", str(workers), "--out", str(out)]) == 0
        outputs.append((out / "results.csv").read_bytes())
    capsys.readouterr()
    byte_ok = outputs[0] == outputs[1] == outputs[2]

    ok = norm_err <= 1e-12 and onehot_ok and scale_err <= 1e-14 and dominance_ok and byte_ok
    detail = (f"normalization {norm_err:.1e}, one-hot fixed point {'exact' if onehot_ok else 'MOVED'}, "
              f"scale invariance {scale_err:.1e}, arbitration dominance {'holds' if dominance_ok else 'VIOLATED'}, "
              f"results.csv byte-identical across runs/workers {{1,4}}: {byte_ok}")
    assert report("C8 invariant suite", ok, detail)


def test_c9_energy_accounting(report):
    cfg = SimConfig(d=8, p=8, snr_grid_db=(10.0,), n_channels=1000, frame_len=100, detectors=("mmse",), seed=9)
    st = simulate_point(cfg, 10.0)
    expected = cfg.d * BPSK.energy + st.sigma2
    rel = abs(st.mean_energy_per_antenna - expected) / expected
    assert report(
        "C9 energy accounting",
        st.n_vectors >= 10**5 and rel <= 0.02,
        f"E||x||^2/p = {st.mean_energy_per_antenna:.4f} vs d*Es+sigma2 = {expected:.4f} ({rel:.2%}) over {st.n_vectors} vectors",
    )
