"""Command-line front end: ``wgmpair {modes,phasematch,simulate,correlate,report}``.

Exit codes: 0 success, 2 configuration or request error, 3 numerical
failure, 4 I/O failure.  All outputs are written atomically.
"""
from __future__ import annotations

import argparse
import csv
import io
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import correlate as corr
from . import phasematch as pm
from .config import RunConfig, load_config, parse_config, parse_quantity
from .errors import (ConfigError, ContractError, ConvergenceError, DomainError, NotFoundError,
                     UnsupportedScaleError)
from .materials import BUILTIN_MATERIALS, Polarization, constant_index, load_material
from .modes import ModeIndex, ResonatorGeometry, mode_frequency, mode_near_wavelength
from .photonstream import (DetectorModel, PumpSchedule, SourceModel, apply_bandpass,
                           pair_rate_for_mean_photon_number, simulate_pair_stream, split_stream)
from .tagio import atomic_write, read_tags, write_tags

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


class StageError(Exception):
    def __init__(self, stage, exc):
        super().__init__(f"stage '{stage}' failed: {exc}")
        self.stage, self.exc = stage, exc


# -- config helpers ----------------------------------------------------------------

def default_config_text() -> str:
    return resources.files("wgmpair.data").joinpath("default.cfg").read_text()


def _config(args) -> RunConfig:
    if args.config:
        return load_config(args.config)
    return parse_config(default_config_text(), "<built-in default.cfg>")


def _geometry(cfg):
    return ResonatorGeometry(cfg.require("resonator", "major_radius"),
                             cfg.require("resonator", "polar_radius"))


def _material(cfg):
    name, path, n = (cfg.get("material", k) for k in ("name", "file", "constant_index"))
    if sum(v is not None for v in (name, path, n)) != 1:
        raise ConfigError("[material] needs exactly one of name, file, constant_index")
    if n is not None:
        return constant_index(n)
    if path is not None:
        p = Path(path)
        p = p if p.is_absolute() else cfg.base_dir / p
        if not p.exists():
            raise ConfigError(f"material file {p} does not exist")
        return load_material(p)
    if name not in BUILTIN_MATERIALS:
        raise ConfigError(f"unknown material {name!r} (built in: {', '.join(BUILTIN_MATERIALS)})")
    return BUILTIN_MATERIALS[name]()


def _pump(cfg, geom, mat, temperature):
    q = cfg.get("pump", "q", 1)
    p = cfg.get("pump", "p", 0)
    pol = Polarization.parse(cfg.get("pump", "polarization", "e"))
    if cfg.has("pump", "m"):
        return ModeIndex(q, cfg.get("pump", "m"), p, pol)
    return mode_near_wavelength(geom, mat, q, p, pol, cfg.require("pump", "wavelength"),
                                temperature)


def _temperature(cfg, geom, mat, pump):
    """Operating temperature, optionally tuned onto the a=0 phase-matching point."""
    t = cfg.require("operating", "temperature")
    if not cfg.get("phasematch", "tune_temperature", False):
        return t
    lam = cfg.require("phasematch", "tune_signal")
    sig = mode_near_wavelength(geom, mat, 1, 0, Polarization.ORDINARY, lam, t)
    triple = pm.ModeTriple(pump, sig, ModeIndex(1, pump.m - sig.m, 0, Polarization.ORDINARY))
    return pm.phase_match_temperature(triple, geom, mat, (cfg.require("phasematch", "tune_min"),
                                                          cfg.require("phasematch", "tune_max")))


def _source(cfg, clusters_required=False):
    k = cfg.get("source", "modes", 1)
    bw = cfg.require("source", "bandwidth")
    rate, n = cfg.get("source", "pair_rate"), cfg.get("source", "mean_photon_number")
    if (rate is None) == (n is None):
        raise ConfigError("[source] needs exactly one of pair_rate, mean_photon_number")
    if rate is None:
        # <n> is per mode: each mode alone gives g2_si(0) = 2 + 1/<n>.
        rate = k * pair_rate_for_mean_photon_number(n, bw)
    clusters = cfg.get("source", "clusters")
    if clusters is None and clusters_required:
        raise ConfigError("[source] clusters is required for band-pass filtering")
    return SourceModel.equal_modes(k, rate, bw, clusters)


def _schedule(cfg):
    return PumpSchedule(cfg.require("pump_schedule", "pulse_length"),
                        cfg.require("pump_schedule", "repetition_rate"),
                        cfg.get("pump_schedule", "shape", "rectangular"))


def _detector(cfg, section):
    return DetectorModel(efficiency=cfg.get(section, "efficiency", 1.0),
                         dark_rate=cfg.get(section, "dark_rate", 0.0),
                         jitter_fwhm=cfg.get(section, "jitter_fwhm", 0.0),
                         dead_time=cfg.get(section, "dead_time", 0.0))


def _seed(args, cfg):
    seed = args.seed if args.seed is not None else cfg.get("simulation", "seed")
    if seed is None:
        raise ConfigError("a seed is required (--seed or [simulation] seed)")
    return seed


def _write_text(path: Path, text: str):
    with atomic_write(path, "w") as fh:
        fh.write(text)


# -- commands ------------------------------------------------------------------------

def cmd_modes(args) -> int:
    cfg = _config(args)
    geom, mat = _geometry(cfg), _material(cfg)
    t = cfg.require("operating", "temperature")
    pol = Polarization.parse(cfg.get("modes", "polarization", "o"))
    qs = cfg.get("modes", "q", [1])
    ps = cfg.get("modes", "p", [0])
    rows = []
    if cfg.has("modes", "l"):
        pairs = [(l - p, p) for l in cfg.get("modes", "l") for p in ps if l - p >= 1]
    elif cfg.has("modes", "m"):
        pairs = [(m, p) for m in cfg.get("modes", "m") for p in ps]
    else:
        m0 = mode_near_wavelength(geom, mat, 1, 0, pol, cfg.require("pump", "wavelength") * 2, t).m
        pairs = [(m0, p) for p in ps]
    for q in qs:
        for m, p in pairs:
            mode = ModeIndex(q, m, p, pol)
            f = mode_frequency(geom, mat, mode, t)
            rows.append([q, m, p, mode.l, pol.value, f"{f.frequency:.6f}",
                         f"{f.vacuum_wavelength * 1e9:.9f}", f"{f.size_parameter:.9f}",
                         f"{f.index:.12f}"])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["q", "m", "p", "l", "polarization", "frequency_hz", "wavelength_nm",
                "size_parameter", "index"])
    w.writerows(rows)
    _write_text(Path(args.out) / "modes.csv", buf.getvalue())
    return EXIT_OK


def cmd_phasematch(args) -> int:
    cfg = _config(args)
    geom, mat = _geometry(cfg), _material(cfg)
    pump = _pump(cfg, geom, mat, cfg.require("operating", "temperature"))
    t = _temperature(cfg, geom, mat, pump)
    window = (cfg.get("phasematch", "signal_min", 0.9e-6), cfg.get("phasematch", "signal_max", 1.064e-6))
    q_max = cfg.get("phasematch", "q_max", 3)
    sols = pm.enumerate_phase_matches(
        pump, geom, mat, t, window, q_max=q_max, p_max=cfg.get("phasematch", "p_max", 10),
        tolerance=cfg.get("phasematch", "tolerance", pm.DEFAULT_TOLERANCE), threads=args.threads)
    out = Path(args.out)
    texts = {"solutions.csv": pm.solutions_csv(sols)}
    spec = None
    if pump.q == 1 and pump.p == 0:
        spec = pm.cluster_spectrum(pump, geom, mat, t, a_max=cfg.get("phasematch", "a_max", 10),
                                   signal_window=window, threads=args.threads)
        texts["clusters.csv"] = pm.cluster_csv(spec)
    if args.format == "svg" and spec is not None:
        texts["clusters.svg"] = _cluster_svg(spec)
    for name, text in texts.items():
        _write_text(out / name, text)
    print(f"temperature {t:.6f} C, pump m={pump.m}, {len(sols)} solutions")
    return EXIT_OK


def _cluster_svg(spec) -> str:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 3))
    for a, g in sorted(spec.groups.items()):
        lam = np.array(g.crossing_wavelengths) * 1e9
        ax.plot(lam, np.full(lam.size, a), "o", ms=4)
    ax.set_xlabel("signal wavelength (nm)")
    ax.set_ylabel("cluster a")
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buf.getvalue()


def cmd_simulate(args) -> int:
    cfg = _config(args)
    seed = _seed(args, cfg)
    duration = args.duration if args.duration is not None else cfg.require("simulation", "duration")
    s, i = simulate_pair_stream(_source(cfg), _schedule(cfg), _detector(cfg, "detector_signal"),
                                _detector(cfg, "detector_idler"), duration, seed,
                                threads=args.threads)
    fmt = "csv" if args.format == "csv" else "bin"
    out = Path(args.out)
    write_tags(out / f"signal.{fmt}", s, fmt)
    write_tags(out / f"idler.{fmt}", i, fmt)
    print(f"signal {len(s)} tags, idler {len(i)} tags, seed {seed}")
    return EXIT_OK


def _load_single(path):
    streams = read_tags(path)
    if len(streams) != 1:
        raise ContractError(f"{path}: expected one channel, found {len(streams)}")
    return next(iter(streams.values()))


def _analyse(x, y, bin_width, max_lag, repetition_rate, gated, threads):
    hist = corr.coincidence_histogram(x, y, bin_width, max_lag,
                                      repetition_rate=repetition_rate if gated else None,
                                      threads=threads)
    hist = corr.normalize_g2(hist, gated=gated)
    return hist, corr.fit_exponential(hist)


def cmd_correlate(args) -> int:
    bin_width = parse_quantity(args.bin, "time", "--bin")
    max_lag = parse_quantity(args.max_lag, "time", "--max-lag")
    rep = parse_quantity(args.repetition_rate, "frequency", "--repetition-rate") \
        if args.repetition_rate else None
    if args.mode == "cross":
        if len(args.files) != 2:
            raise ConfigError("cross mode needs two tag files")
        x, y = (_load_single(f) for f in args.files)
    else:
        if len(args.files) == 1:
            seed = args.seed if args.seed is not None else 0
            x, y = split_stream(_load_single(args.files[0]), 0.5, seed)
        elif len(args.files) == 2:
            x, y = (_load_single(f) for f in args.files)
        else:
            raise ConfigError("auto mode needs one or two tag files")
    hist, fit = _analyse(x, y, bin_width, max_lag, rep, rep is not None, args.threads)
    out = Path(args.out)
    _write_text(out / f"{args.mode}_histogram.csv", corr.histogram_csv(hist))
    report = corr.fit_report(fit, args.mode, kind=args.mode)
    _write_text(out / f"{args.mode}_fit.txt", report)
    if args.format == "svg":
        _write_text(out / f"{args.mode}_g2.svg", corr.svg_plot(hist, fit, args.mode))
    print(report, end="")
    return EXIT_OK


REFERENCE_TARGETS = {
    "unfiltered": {"g2_ss": 1.49, "k": 2.0, "nu_mhz": 26.8},
    "filtered": {"g2_ss": 2.01, "k": 1.0, "nu_mhz": 26.8, "g2_si": 16.62, "n": 0.07},
    "rate_ratio": 0.5,
}


def run_report(cfg: RunConfig, seed: int, threads: int = 1) -> dict:
    """Unfiltered and cluster-filtered pipelines; returns the numbers of the report."""
    def stage(name, fn):
        try:
            return fn()
        except (DomainError, ConvergenceError, ContractError, NotFoundError) as exc:
            raise StageError(name, exc) from exc

    source = stage("config", lambda: _source(cfg, clusters_required=True))
    sched = stage("config", lambda: _schedule(cfg))
    det_s, det_i = _detector(cfg, "detector_signal"), _detector(cfg, "detector_idler")
    duration = cfg.require("simulation", "duration")
    bw_bin = cfg.get("analysis", "bin_width", corr.DEFAULT_BIN_WIDTH)
    max_lag = cfg.get("analysis", "max_lag", corr.DEFAULT_MAX_LAG)
    gated = cfg.get("analysis", "normalization", "gated") == "gated"
    split_t = cfg.get("analysis", "split_transmission", 0.5)
    keep = cfg.get("report", "bandpass_clusters", [0])
    filt_t = cfg.get("report", "bandpass_transmission", 0.8)
    power_mw = cfg.get("report", "pump_power", 1e-3) * 1e3

    s, i = stage("simulate", lambda: simulate_pair_stream(source, sched, det_s, det_i, duration,
                                                          seed, threads=threads))
    results = {}
    for label in ("unfiltered", "filtered"):
        if label == "unfiltered":
            sig, idl = s, i
        else:
            # The filter sits in the signal arm; the idler partner of another
            # cluster lies far off in wavelength and is selected losslessly.
            sig = stage("bandpass", lambda: apply_bandpass(s, keep, filt_t, seed))
            idl = stage("bandpass", lambda: apply_bandpass(i, keep, 1.0, seed))
        hx, fx = stage(f"cross-correlation ({label})", lambda: _analyse(
            sig, idl, bw_bin, max_lag, sched.repetition_rate, gated, threads))
        a, b = split_stream(sig, split_t, seed + 1, channels=(2, 3))
        ha, fa = stage(f"autocorrelation ({label})", lambda: _analyse(
            a, b, bw_bin, max_lag, sched.repetition_rate, gated, threads))
        rate = corr.pair_detection_rate(hx, fx)
        if label == "filtered":
            rate /= filt_t  # corrected for the filter's insertion loss
        results[label] = {
            "signal_rate": sig.rate(), "pair_rate": rate,
            "g2_si": fx.g2_zero, "nu_mhz": fx.bandwidth / 1e6,
            "n": 1 / (fx.g2_zero - 2) if fx.g2_zero > 2 else float("nan"),
            "n_from_b": 1 / fx.B if fx.B > 0 else float("nan"),
            "g2_ss": fa.g2_zero, "g2_ss_ci": fa.g2_zero_ci,
            "k": corr.effective_modes(fa.g2_zero) if fa.g2_zero > 1 else float("inf"),
            "normalized_rate": corr.normalized_pair_rate(rate, power_mw, fx.bandwidth / 1e6)
            if rate > 0 else float("nan"),
        }
    results["rate_ratio"] = results["filtered"]["pair_rate"] / results["unfiltered"]["pair_rate"]
    results["seed"] = seed
    return results


def format_report(res: dict) -> tuple[str, str]:
    lines = [f"# end-to-end reproduction report (seed {res['seed']})", ""]
    rows = [("scenario", "quantity", "simulated", "target")]
    for label in ("unfiltered", "filtered"):
        r, tgt = res[label], REFERENCE_TARGETS[label]
        for key, name in (("pair_rate", "pair-detection rate (1/s)"),
                          ("normalized_rate", "pairs/s per mW per 20 MHz"),
                          ("g2_si", "g2_si(0)"), ("n", "<n> = 1/(g2_si(0)-2)"),
                          ("n_from_b", "<n> = 1/B"), ("nu_mhz", "bandwidth (MHz)"),
                          ("g2_ss", "g2_ss(0)"), ("k", "effective modes")):
            target = tgt.get({"g2_ss": "g2_ss", "k": "k", "nu_mhz": "nu_mhz",
                              "g2_si": "g2_si", "n": "n"}.get(key, ""), "")
            rows.append((label, name, f"{r[key]:.6g}", f"{target}" if target != "" else ""))
    rows.append(("both", "filtered/unfiltered pair rate", f"{res['rate_ratio']:.4f}",
                 str(REFERENCE_TARGETS["rate_ratio"])))
    width = [max(len(r[c]) for r in rows) for c in range(4)]
    for r in rows:
        lines.append("  ".join(v.ljust(w) for v, w in zip(r, width)).rstrip())
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return "\n".join(lines) + "\n", buf.getvalue()


def cmd_report(args) -> int:
    cfg = _config(args)
    res = run_report(cfg, _seed(args, cfg), args.threads)
    text, table = format_report(res)
    out = Path(args.out)
    _write_text(out / "report.txt", text)
    _write_text(out / "report.csv", table)
    print(text, end="")
    return EXIT_OK


# -- entry point ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration file (default: built-in default.cfg)")
    common.add_argument("--seed", type=int, help="random seed (overrides the config)")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--threads", type=int, default=1, help="maximum worker threads")
    common.add_argument("--format", choices=("csv", "bin", "svg"), default="csv")

    parser = argparse.ArgumentParser(prog="wgmpair", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("modes", parents=[common], help="mode frequency table")
    sub.add_parser("phasematch", parents=[common], help="phase-matching solutions and clusters")
    p = sub.add_parser("simulate", parents=[common], help="simulate signal/idler time tags")
    p.add_argument("--duration", type=lambda s: parse_quantity(s, "time", "--duration"))
    p = sub.add_parser("correlate", parents=[common], help="g2 histogram and exponential fit")
    p.add_argument("files", nargs="+", help="time-tag files")
    p.add_argument("--mode", choices=("cross", "auto"), default="cross")
    p.add_argument("--bin", default="1ns")
    p.add_argument("--max-lag", default="200ns")
    p.add_argument("--repetition-rate", help="pump repetition rate for gated normalization")
    sub.add_parser("report", parents=[common], help="end-to-end reproduction report")
    return parser


COMMANDS = {"modes": cmd_modes, "phasematch": cmd_phasematch, "simulate": cmd_simulate,
            "correlate": cmd_correlate, "report": cmd_report}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        return COMMANDS[args.command](args)
    except StageError as exc:
        print(f"wgmpair: {exc}", file=sys.stderr)
        return EXIT_NUMERIC if isinstance(exc.exc, (ConvergenceError, NotFoundError)) else EXIT_CONFIG
    except (ConfigError, DomainError) as exc:
        print(f"wgmpair: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, NotFoundError, UnsupportedScaleError) as exc:
        print(f"wgmpair: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, ContractError) as exc:
        print(f"wgmpair: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
