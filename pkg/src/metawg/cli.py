"""Command-line interface: ``metawg <command> [options]``.

Commands write plot-ready CSV files into the output directory.  Each CSV starts
with a ``# manifest: config_sha256=... seed=... version=... command=...`` line
(no timestamps, so equal inputs give byte-identical files); timestamps and input
digests go to a ``<command>.manifest.json`` file next to it.  Diverging
quantities are written as the literal token ``inf``.

Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bands import band_edges, dispersion_context, exact_bands, k_grid
from .circuit import bare_dispersion, derive_effective
from .constants import PLANCK
from .config import DEFAULT_CONFIG_TEXT, ConfigError, RunConfig, parse_config
from .disorder import default_frequency_grid, monte_carlo_localization
from .errors import FitError, MetawgError
from .fitting import LumpedFit, fit_fano, fit_lumped_model
from .network import FiniteWaveguide, simulate_s21
from .qubit import CascadeEnvironment, calibrate_cg, josephson_energy, predict, transmon_frequency
from .traceio import TraceFormatError, atomic_write_text, format_report, read_trace, trace_to_csv

__all__ = [
    "main",
    "build_parser",
    "cmd_dispersion",
    "cmd_transmission",
    "cmd_localization",
    "cmd_qubit_sweep",
    "cmd_fano",
    "EXIT_OK",
    "EXIT_CONFIG",
    "EXIT_IO",
    "EXIT_NUMERIC",
]

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4
TWO_PI = 2.0 * math.pi


class Run:
    """Output directory, manifest bookkeeping and provenance for one command."""

    def __init__(self, command: str, cfg: RunConfig, out_dir: Path, seed: int, inputs: dict | None = None):
        self.command = command
        self.cfg = cfg
        self.out_dir = Path(out_dir)
        self.seed = seed
        self.inputs = dict(inputs or {})
        self.outputs: list[str] = []
        self.metadata: dict = {}
        self.started = _dt.datetime.now(_dt.timezone.utc).isoformat()

    @property
    def manifest_line(self) -> str:
        return f"config_sha256={self.cfg.digest} seed={self.seed} version={__version__} command={self.command}"

    def write(self, name: str, text: str) -> Path:
        path = self.out_dir / name
        atomic_write_text(path, text)
        self.outputs.append(name)
        return path

    def finish(self) -> Path:
        doc = {
            "command": self.command,
            "config_sha256": self.cfg.digest,
            "seed": self.seed,
            "version": __version__,
            "started_utc": self.started,
            "finished_utc": _dt.datetime.now(_dt.timezone.utc).isoformat(),
            "inputs": self.inputs,
            "outputs": self.outputs,
            "metadata": self.metadata,
        }
        path = self.out_dir / f"{self.command}.manifest.json"
        atomic_write_text(path, json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n")
        return path


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    value = float(value)
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return repr(value)


def _csv(header, rows, comments=(), manifest_line: str | None = None, footer=()) -> str:
    buf = io.StringIO()
    if manifest_line:
        buf.write(f"# manifest: {manifest_line}\n")
    for line in comments:
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    for line in footer:
        buf.write(f"# {line}\n")
    return buf.getvalue()


def _file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# ---------------------------------------------------------------------------
# commands


def cmd_dispersion(cfg: RunConfig, run: Run) -> list[Path]:
    """Beyond-RWA bands, bare-line overlay and band edges."""
    cfg.require("device")
    cell = cfg.device.cell
    eff = derive_effective(cell)
    k = k_grid(cell.d, cfg.sweeps.k_points)
    plus, minus = exact_bands(k, eff, cell)
    bare = bare_dispersion(k, eff, cell)
    edges = band_edges(eff, cell)
    ghz = TWO_PI * 1e9
    rows = zip(k * cell.d / math.pi, plus / ghz, minus / ghz, bare / ghz)
    lo, hi = edges.omega_c_minus / ghz, edges.omega_c_plus / ghz
    footer = [f"band_edges_ghz: lower={lo:.6f} upper={hi:.6f} mid={0.5 * (lo + hi):.6f} span={hi - lo:.6f}"]
    run.metadata["band_edges_ghz"] = [lo, hi]
    text = _csv(("k_over_pi_d", "omega_plus_ghz", "omega_minus_ghz", "omega_bare_ghz"), rows,
                comments=["frequencies are omega / 2 pi in GHz"], manifest_line=run.manifest_line, footer=footer)
    return [run.write("dispersion.csv", text)]


def _waveguide(cfg: RunConfig) -> FiniteWaveguide:
    dev = cfg.device
    return FiniteWaveguide.uniform(dev.cell, dev.n_cells, gamma_i=dev.gamma_i, port_in=dev.port, port_out=dev.port)


def cmd_transmission(cfg: RunConfig, run: Run, data: str | None = None) -> list[Path]:
    """Simulated S-parameters of the finite device; with ``data``, a lumped-model fit to that trace."""
    cfg.require("device")
    sw = cfg.sweeps
    trace = simulate_s21(_waveguide(cfg), np.linspace(sw.freq_start, sw.freq_stop, sw.freq_points))
    paths = [run.write("transmission.csv", trace_to_csv(trace, run.manifest_line))]
    if data is not None:
        measured = read_trace(data)
        dev = cfg.device
        fit = fit_lumped_model(measured, LumpedFit(dev.cell, dev.gamma_i), n_cells=dev.n_cells,
                               seed=cfg.seeds["fit"], port_in=dev.port, port_out=dev.port)
        values = fit.as_dict()
        values["q_i"] = derive_effective(fit.cell).omega0 / fit.gamma_i if fit.gamma_i > 0 else math.inf
        run.metadata["fit"] = values
        paths.append(run.write("fit_report.txt", format_report(values, run.manifest_line)))
    return paths


def cmd_fano(cfg: RunConfig, run: Run, data: str, window: tuple[float, float]) -> list[Path]:
    """Single-resonance fit of ``data`` inside ``window`` (GHz)."""
    trace = read_trace(data)
    fit = fit_fano(trace, window=(window[0] * 1e9, window[1] * 1e9))
    values = fit.as_dict()
    values["window_ghz"] = f"{window[0]}:{window[1]}"
    run.metadata["fit"] = values
    return [run.write("fano_report.txt", format_report(values, run.manifest_line))]


def cmd_localization(cfg: RunConfig, run: Run, threads: int = 1) -> list[Path]:
    """Monte Carlo localization-length profile across the gap."""
    cfg.require("device", "disorder")
    dev, loc = cfg.device, cfg.localization
    edges, _ = dispersion_context(dev.cell)
    freqs = default_frequency_grid(edges, loc.freq_points)
    gamma_i = dev.gamma_i if loc.include_loss else 0.0
    profile = monte_carlo_localization(dev.cell, loc.disorder, freqs, gamma_i=gamma_i, threads=threads)
    run.metadata["localization"] = profile.meta
    return [run.write("localization.csv", profile.to_csv(run.manifest_line))]


SWEEP_HEADER = ("flux", "freq_ghz", "lamb_shift_mhz", "kappa_mhz", "t_rad_us", "t1_us",
                "lamb_shift_anomalous_mhz", "lamb_shift_referenced_mhz", "flag")


def cmd_qubit_sweep(cfg: RunConfig, run: Run) -> list[Path]:
    """Forward model of the qubit's Lamb shift and lifetime versus flux."""
    cfg.require("device", "qubit")
    dev, qc = cfg.device, cfg.qubit
    env = CascadeEnvironment(FiniteWaveguide.uniform(dev.cell, dev.n_cells, gamma_i=dev.gamma_i), qc.r_load)
    edges, _ = dispersion_context(dev.cell)
    p = qc.transmon
    comments = []
    if qc.calibrate_cg:
        p, info = calibrate_cg(p, env, target=qc.calibration_target)
        run.metadata["cg_calibration"] = info
        comments.append(f"cg_ff={p.cg * 1e15!r} calibrated: mean |referenced shift| at "
                        f"omega_c- + 0.05 Delta and omega_c+ - 0.05 Delta = {qc.calibration_target / TWO_PI / 1e6!r} MHz")
    else:
        comments.append(f"cg_ff={p.cg * 1e15!r}")
    comments.append(f"cq_ff={p.cq * 1e15!r} ec_ghz={p.ec / PLANCK / 1e9!r} reference_ghz={edges.omega_mid / TWO_PI / 1e9!r}")
    comments.append("shifts and kappa are omega / 2 pi in MHz; flag != ok marks rows without a valid transmon")
    rows = []
    mhz = TWO_PI * 1e6
    for flux in np.linspace(cfg.sweeps.flux_start, cfg.sweeps.flux_stop, cfg.sweeps.flux_points):
        q = p.with_(flux=float(flux))
        nan = [math.nan] * 7
        if josephson_energy(q) <= 0:
            rows.append([flux, *nan, "ej_nonpositive"])
            continue
        omega = transmon_frequency(q)
        if omega <= 0:
            rows.append([flux, *nan, "frequency_nonpositive"])
            continue
        pred = predict(q, env, t_int=qc.t_int, reference=edges.omega_mid)
        rows.append([flux, omega / (TWO_PI * 1e9), pred.lamb_shift / mhz, pred.kappa / mhz, pred.t_rad * 1e6,
                     pred.t1_total * 1e6, pred.lamb_shift_anomalous / mhz, pred.lamb_shift_referenced / mhz, "ok"])
    text = _csv(SWEEP_HEADER, rows, comments=comments, manifest_line=run.manifest_line)
    return [run.write("qubit_sweep.csv", text)]


# ---------------------------------------------------------------------------
# entry point


def _window(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError("window must look like F1:F2 (GHz)") from None
    if not 0 < lo < hi:
        raise argparse.ArgumentTypeError("window needs 0 < F1 < F2")
    return lo, hi


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="TOML configuration (default: built-in reference device)")
    common.add_argument("--seed", type=int, metavar="N", help="override every seed in the configuration")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides output_dir)")
    common.add_argument("--threads", type=int, default=1, metavar="N", help="worker threads (results do not depend on it)")
    parser = argparse.ArgumentParser(prog="metawg", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("dispersion", parents=[common], help="band structure and band edges")
    tr = sub.add_parser("transmission", parents=[common], help="simulate S21; optionally fit a measured trace")
    tr.add_argument("--fit", metavar="TRACE", help="CSV or .s2p trace to fit with the lumped model")
    sub.add_parser("localization", parents=[common], help="Monte Carlo localization lengths")
    sub.add_parser("qubit-sweep", parents=[common], help="Lamb shift and lifetime versus flux")
    fa = sub.add_parser("fano", parents=[common], help="single-resonance Fano fit")
    fa.add_argument("--data", metavar="TRACE", required=True, help="CSV or .s2p trace")
    fa.add_argument("--window", type=_window, required=True, metavar="F1:F2", help="fit window in GHz")
    return parser


def _load(args) -> tuple[RunConfig, dict]:
    inputs = {}
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read configuration {args.config}: {exc}") from exc
        inputs[str(args.config)] = hashlib.sha256(text.encode()).hexdigest()
    else:
        text = DEFAULT_CONFIG_TEXT
    cfg = parse_config(text)
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be a non-negative 64-bit integer")
        cfg = cfg.with_seed(args.seed)
    return cfg, inputs


_SEED_KEY = {"transmission": "fit", "fano": "fit"}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg, inputs = _load(args)
        out_dir = Path(args.out) if args.out else cfg.output_dir
        seed = cfg.seeds[_SEED_KEY.get(args.command, "disorder")]
        data = getattr(args, "fit", None) or getattr(args, "data", None)
        if data is not None:
            inputs[str(data)] = _file_digest(data)
        run = Run(args.command, cfg, out_dir, seed, inputs)
        if args.command == "dispersion":
            paths = cmd_dispersion(cfg, run)
        elif args.command == "transmission":
            paths = cmd_transmission(cfg, run, data)
        elif args.command == "localization":
            paths = cmd_localization(cfg, run, threads=args.threads)
        elif args.command == "qubit-sweep":
            paths = cmd_qubit_sweep(cfg, run)
        else:
            paths = cmd_fano(cfg, run, data, args.window)
        run.finish()
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, TraceFormatError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except FitError as exc:
        print(f"fit failed: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (MetawgError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    for path in paths:
        print(path)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
