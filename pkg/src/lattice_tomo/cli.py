"""Command-line entry point: ``lattice-tomo {simulate,decode,selftest}``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .baseline import mmse_detect, mmse_sic_detect, ml_detect, zf_detect
from .core import Problem, make_constellation, sigma2_from_snr
from .errors import CapabilityError, ConfigError, DecodeFailure, InvalidArgumentError
from .selftest import FAULTS, run_selftest
from .sim import DEFAULT_DETECTORS, SimConfig, run_sweep
from .tlsd import TlsdConfig, exhaustive_marginals, tlsd_detect

log = logging.getLogger("lattice_tomo")

CSV_HEADER = ["snr_db", "detector", "ser", "symbol_errors", "symbols_total", "vector_errors", "frames_total"]

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_CAPABILITY = 0, 1, 2, 3


def configure_logging():
    level = os.environ.get("LATTICE_TOMO_LOG", "off").strip().lower()
    levels = {"info": logging.INFO, "debug": logging.DEBUG}
    if level in levels:
        logging.basicConfig(level=levels[level], format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


# -- config handling -------------------------------------------------------------

def parse_grid(text: str) -> list[float]:
    """``start:step:stop`` (inclusive), a comma list, or a single value."""
    text = str(text).strip()
    if ":" in text:
        parts = [float(v) for v in text.split(":")]
        if len(parts) != 3:
            raise ValueError("grid must be start:step:stop")
        start, step, stop = parts
        if step <= 0 or stop < start:
            raise ValueError("grid needs step > 0 and stop >= start")
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + k * step, 10) for k in range(n)]
    return [float(v) for v in text.split(",") if v.strip()]


def read_config_file(path) -> dict[str, str]:
    """Flat ``key = value`` file; ``#`` starts a comment, values may be quoted."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
            value = value[1:-1]
        out[key.replace("-", "_")] = value
    return out


def _to_bool(v):
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _split_list(v):
    if isinstance(v, (list, tuple)):
        return tuple(v)
    return tuple(s.strip() for s in str(v).replace("[", "").replace("]", "").split(",") if s.strip())


_CONVERTERS = {
    "d": int,
    "p": int,
    "constellation_m": int,
    "snr_grid_db": lambda v: tuple(v) if isinstance(v, (list, tuple)) else tuple(parse_grid(v)),
    "n_channels": int,
    "frame_len": int,
    "detectors": _split_list,
    "seed": int,
    "max_sweeps": int,
    "tol": float,
    "arbitrate_with_sic": _to_bool,
    "init": str,
}


def build_config(values: dict) -> SimConfig:
    """SimConfig from raw key/value pairs; unknown or malformed keys raise ConfigError."""
    kwargs = {}
    for key, raw in values.items():
        if key not in _CONVERTERS:
            raise ConfigError(key, "unknown configuration key")
        try:
            kwargs[key] = _CONVERTERS[key](raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(key, str(exc)) from None
    tl = {k: kwargs.pop(k) for k in ("max_sweeps", "tol", "arbitrate_with_sic", "init") if k in kwargs}
    try:
        tlsd = TlsdConfig(**tl)
    except InvalidArgumentError as exc:
        field = next((k for k in ("max_sweeps", "tol", "init") if k in str(exc)), "tlsd")
        raise ConfigError(field, str(exc)) from None
    return SimConfig(tlsd=tlsd, **kwargs)


_FLAG_KEYS = {
    "d": "d",
    "p": "p",
    "mod": "constellation_m",
    "snr": "snr_grid_db",
    "channels": "n_channels",
    "frame_len": "frame_len",
    "seed": "seed",
    "detectors": "detectors",
    "max_sweeps": "max_sweeps",
    "tol": "tol",
}


def config_from_args(args) -> SimConfig:
    values = read_config_file(args.config) if args.config else {}
    for flag, key in _FLAG_KEYS.items():
        v = getattr(args, flag)
        if v is not None:
            values[key] = v
    if args.no_arbitration:
        values["arbitrate_with_sic"] = False
    return build_config(values)


# -- output ----------------------------------------------------------------------

def records_to_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow([repr(r.snr_db), r.detector, repr(r.ser), r.symbol_errors, r.symbols_total, r.vector_errors, r.frames_total])
    return buf.getvalue()


def _now():
    return datetime.now(timezone.utc).isoformat()


# -- commands --------------------------------------------------------------------

def cmd_simulate(args) -> int:
    try:
        config = config_from_args(args)
    except ConfigError as exc:
        print(f"error: invalid configuration field '{exc.field}': {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    points = []

    def on_point(stats, seconds):
        points.append(
            {
                "snr_db": stats.snr_db,
                "sigma2": stats.sigma2,
                "seconds": round(seconds, 6),
                "tlsd_converged_fraction": stats.tlsd_converged / stats.n_vectors
                if "tlsd" in config.detectors
                else None,
            }
        )
        if not args.quiet:
            line = "  ".join(f"{r.detector}={r.ser:.4e}" for r in stats.records)
            print(f"snr {stats.snr_db:g} dB  {line}  ({seconds:.1f}s)", file=sys.stderr)

    started = _now()
    try:
        records = run_sweep(config, workers=args.workers, on_point=on_point)
    except CapabilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAPABILITY
    except DecodeFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL

    (out_dir / "results.csv").write_text(records_to_csv(records))
    manifest = {
        "tool": "lattice_tomo",
        "version": __version__,
        "kernel_backend": kernels.BACKEND,
        "workers": args.workers,
        "config": config.to_dict(),
        "started": started,
        "finished": _now(),
        "points": points,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(f"wrote {out_dir / 'results.csv'} and {out_dir / 'manifest.json'}", file=sys.stderr)
    return EXIT_OK


def read_instance(path):
    """Instance file: ``p d`` on the first line, p rows of H, then the x row."""
    rows = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows or len(rows[0]) != 2:
        raise ValueError("first line must be 'p d'")
    p, d = (int(v) for v in rows[0])
    if len(rows) != p + 2:
        raise ValueError(f"expected {p} rows of H and one row of x after the header, got {len(rows) - 1} rows")
    H = np.array([[float(v) for v in r] for r in rows[1 : p + 1]])
    x = np.array([float(v) for v in rows[p + 1]])
    if H.shape != (p, d) or x.shape != (p,):
        raise ValueError(f"shape mismatch: H is {H.shape}, x has {x.size} entries, header says p={p} d={d}")
    return H, x


def _fmt(v):
    return np.array2string(np.asarray(v), precision=6, suppress_small=False, max_line_width=200)


def cmd_decode(args) -> int:
    try:
        H, x = read_instance(args.instance)
        c = make_constellation(args.mod)
        sigma2 = args.sigma2 if args.sigma2 is not None else sigma2_from_snr(args.snr, c, H.shape[1])
        problem = Problem(H, x, sigma2, c)
        cfg = TlsdConfig(args.max_sweeps, args.tol, not args.no_arbitration, args.init)
    except (OSError, ValueError) as exc:
        print(f"error: malformed input: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    detectors = [s.strip() for s in args.detectors.split(",") if s.strip()]
    funcs = {"zf": zf_detect, "mmse": mmse_detect, "mmse-sic": mmse_sic_detect, "ml": ml_detect}
    print(f"p={problem.p} d={problem.d} M={c.m} sigma2={sigma2:.6g}")
    for name in detectors:
        if name == "tlsd":
            continue
        if name not in funcs:
            print(f"error: unknown detector {name!r}", file=sys.stderr)
            return EXIT_CONFIG
        try:
            out = funcs[name](problem)
        except CapabilityError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CAPABILITY
        except DecodeFailure as exc:
            print(f"{name:9s} failed: {exc}")
            continue
        print(f"{name:9s} {_fmt(out.hard.values)}  residual2={out.residual2:.6g}")
    if "tlsd" in detectors:
        res = tlsd_detect(problem, cfg)
        print(f"{'tlsd':9s} {_fmt(res.hard.values)}  winner={res.winner.value} sweeps_used={res.sweeps_used} converged={res.converged}")
        print("tlsd posteriors (rows: coordinates, columns: symbols " + _fmt(c.symbols) + "):")
        print(_fmt(res.posteriors.theta))
        print("tlsd bit LLRs:")
        print(_fmt(res.bit_llrs))
    if args.oracle:
        try:
            marg = exhaustive_marginals(problem)
        except CapabilityError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CAPABILITY
        print("oracle marginals (exhaustive joint posterior):")
        print(_fmt(marg))
    return EXIT_OK


def cmd_selftest(args) -> int:
    t0 = time.perf_counter()
    results = run_selftest(quick=args.quick, fault=args.inject_fault)
    failed = [name for name, ok, _ in results if not ok]
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name:24s} {detail}")
    print(f"{len(results) - len(failed)}/{len(results)} checks passed in {time.perf_counter() - t0:.2f}s")
    if failed:
        print("failed: " + ", ".join(failed))
        return EXIT_FAIL
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lattice-tomo", description="Tomographic MIMO decoding and SER simulation.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run an SER-vs-SNR Monte Carlo sweep")
    sim.add_argument("--config", help="flat key = value config file")
    sim.add_argument("--d", type=int, help="transmit antennas")
    sim.add_argument("--p", type=int, help="receive antennas")
    sim.add_argument("--mod", type=int, help="PAM order M")
    sim.add_argument("--snr", help="SNR grid in dB, start:step:stop or comma list")
    sim.add_argument("--channels", type=int, help="channel realizations per SNR point")
    sim.add_argument("--frame-len", type=int, help="channel uses per realization")
    sim.add_argument("--seed", type=int)
    sim.add_argument("--detectors", help=f"comma list (default {','.join(DEFAULT_DETECTORS)})")
    sim.add_argument("--max-sweeps", type=int)
    sim.add_argument("--tol", type=float)
    sim.add_argument("--no-arbitration", action="store_true", help="report raw TLSD decisions")
    sim.add_argument("--workers", type=int, default=1)
    sim.add_argument("--out", default=".", help="output directory")
    sim.add_argument("--quiet", action="store_true")
    sim.set_defaults(func=cmd_simulate)

    dec = sub.add_parser("decode", help="decode a single instance file")
    dec.add_argument("instance")
    dec.add_argument("--mod", type=int, default=2)
    g = dec.add_mutually_exclusive_group()
    g.add_argument("--sigma2", type=float)
    g.add_argument("--snr", type=float, default=10.0)
    dec.add_argument("--detectors", default="zf,mmse,mmse-sic,tlsd,ml")
    dec.add_argument("--max-sweeps", type=int, default=10)
    dec.add_argument("--tol", type=float, default=1e-6)
    dec.add_argument("--no-arbitration", action="store_true")
    dec.add_argument("--init", choices=("zf", "uniform"), default="zf", help="TLSD prior initialization")
    dec.add_argument("--oracle", action="store_true", help="also print exhaustive posterior marginals")
    dec.set_defaults(func=cmd_decode)

    st = sub.add_parser("selftest", help="run the invariant suite")
    st.add_argument("--quick", action="store_true")
    st.add_argument("--inject-fault", choices=FAULTS)
    st.set_defaults(func=cmd_selftest)
    return ap


def main(argv=None) -> int:
    configure_logging()
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
