"""Run configuration: a TOML document with unit-suffixed keys.

Boundary units are GHz (frequencies, ``f/2pi``), MHz for rates (``gamma/2pi``),
fF, pH, um, ohm and us; everything is converted once to SI / angular units
here.  Unknown keys and missing required sections raise :class:`ConfigError`
before any computation starts.

Layout (all sections optional unless a command needs them)::

    output_dir = "out"

    [device]            # one of three forms:
    # (a) line + target band edges        z0_ohm, n, d_um, f_lower_ghz, f_upper_ghz[, cr_ratio]
    # (b) line + resonator elements       z0_ohm, n, d_um, cr_ff, lr_ph, ck_ff
    # (c) explicit cell                   c0_ff, l0_ph, cr_ff, lr_ph, ck_ff, d_um
    q_i = 7.2e4         # or gamma_i_mhz; default lossless
    n_cells = 9
    port_ohm = 50.0

    [disorder]          n_cells, n_realizations, sigma_rel, freq_points, include_loss
    [qubit]             f_ge_ghz + ej_over_ec  |  ej_ghz + ec_ghz [+ cq_ff];
                        cg_ff = <number> | "calibrate"; calibration_target_mhz; t_int_us; r_load_ohm
    [sweeps]            k_points; freq_start_ghz, freq_stop_ghz, freq_points;
                        flux_start, flux_stop, flux_points
    [seeds]             disorder, fit
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import tomli

from .circuit import CapacitiveCell, WaveguideSpec, derive_effective
from .constants import PLANCK
from .device import REFERENCE_EDGES_GHZ, REFERENCE_LINE, REFERENCE_QI, cell_for_edges
from .disorder import DisorderConfig
from .errors import MetawgError
from .qubit import TransmonParams, calibrate_cq, transmon_from_frequency

__all__ = [
    "ConfigError",
    "DeviceConfig",
    "QubitConfig",
    "SweepConfig",
    "LocalizationConfig",
    "RunConfig",
    "DEFAULT_CONFIG_TEXT",
    "load_config",
    "parse_config",
]

TWO_PI = 2.0 * math.pi

DEFAULT_CONFIG_TEXT = f"""\
output_dir = "out"

[device]
z0_ohm = {REFERENCE_LINE.z0}
n = {REFERENCE_LINE.n}
d_um = {REFERENCE_LINE.d * 1e6}
f_lower_ghz = {REFERENCE_EDGES_GHZ[0]}
f_upper_ghz = {REFERENCE_EDGES_GHZ[1]}
cr_ratio = 1.0
q_i = {REFERENCE_QI}
n_cells = 9
port_ohm = 50.0

[disorder]
n_cells = 100
n_realizations = 100000
sigma_rel = 0.005
freq_points = 400
include_loss = true

[qubit]
f_ge_ghz = 7.9
ej_over_ec = 100.0
cg_ff = "calibrate"
calibration_target_mhz = 10.0
r_load_ohm = 50.0

[sweeps]
k_points = 1001
freq_start_ghz = 3.0
freq_stop_ghz = 9.0
freq_points = 601
flux_start = 0.0
flux_stop = 0.25
flux_points = 251

[seeds]
disorder = 0
fit = 0
"""


class ConfigError(MetawgError, ValueError):
    """The configuration document is malformed, incomplete or inconsistent."""


@dataclass(frozen=True)
class DeviceConfig:
    cell: CapacitiveCell
    gamma_i: float
    n_cells: int
    port: float


@dataclass(frozen=True)
class QubitConfig:
    transmon: TransmonParams
    calibrate_cg: bool
    calibration_target: float
    t_int: float
    r_load: float


@dataclass(frozen=True)
class LocalizationConfig:
    disorder: DisorderConfig
    freq_points: int
    include_loss: bool


@dataclass(frozen=True)
class SweepConfig:
    k_points: int = 1001
    freq_start: float = 3e9
    freq_stop: float = 9e9
    freq_points: int = 601
    flux_start: float = 0.0
    flux_stop: float = 0.25
    flux_points: int = 251


@dataclass(frozen=True)
class RunConfig:
    device: DeviceConfig | None
    localization: LocalizationConfig | None
    qubit: QubitConfig | None
    sweeps: SweepConfig
    seeds: dict
    output_dir: Path
    digest: str
    source: dict = field(default_factory=dict)

    def require(self, *sections: str) -> None:
        """Raise :class:`ConfigError` unless every named section is present."""
        names = {"device": self.device, "disorder": self.localization, "qubit": self.qubit}
        missing = [s for s in sections if names[s] is None]
        if missing:
            raise ConfigError(f"missing required section(s): {', '.join('[' + m + ']' for m in missing)}")

    def with_seed(self, seed: int) -> "RunConfig":
        """Copy with every seed replaced by ``seed`` (command-line override)."""
        seeds = {k: seed for k in self.seeds}
        loc = self.localization
        if loc is not None:
            d = loc.disorder
            loc = LocalizationConfig(DisorderConfig(d.n_cells, d.n_realizations, d.sigma_rel, seed, d.distribution),
                                     loc.freq_points, loc.include_loss)
        return RunConfig(self.device, loc, self.qubit, self.sweeps, seeds, self.output_dir, self.digest, self.source)


# ---------------------------------------------------------------------------
# helpers


def _take(section: dict, name: str, allowed: set[str]) -> dict:
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {name}: {', '.join(unknown)}")
    return section


def _num(section: dict, key: str, where: str, default=None, positive=False, nonneg=False) -> float:
    if key not in section:
        if default is None:
            raise ConfigError(f"[{where}] missing required key {key!r}")
        return default
    value = section[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"[{where}] {key} must be a number, got {value!r}")
    value = float(value)
    if math.isnan(value):
        raise ConfigError(f"[{where}] {key} is NaN")
    if positive and not value > 0:
        raise ConfigError(f"[{where}] {key} must be positive, got {value}")
    if nonneg and not value >= 0:
        raise ConfigError(f"[{where}] {key} must be non-negative, got {value}")
    return value


def _int(section: dict, key: str, where: str, default: int | None = None, minimum: int = 0) -> int:
    if key not in section:
        if default is None:
            raise ConfigError(f"[{where}] missing required key {key!r}")
        return default
    value = section[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"[{where}] {key} must be an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(f"[{where}] {key} must be >= {minimum}, got {value}")
    return value


def _bool(section: dict, key: str, where: str, default: bool) -> bool:
    value = section.get(key, default)
    if not isinstance(value, bool):
        raise ConfigError(f"[{where}] {key} must be true or false, got {value!r}")
    return value


def _section(doc: dict, name: str) -> dict | None:
    value = doc.get(name)
    if value is None:
        return None
    if not isinstance(value, dict):
        raise ConfigError(f"{name} must be a section")
    return value


# ---------------------------------------------------------------------------
# sections

_LINE_KEYS = {"z0_ohm", "n", "d_um"}
_EDGE_KEYS = {"f_lower_ghz", "f_upper_ghz", "cr_ratio"}
_ELEMENT_KEYS = {"cr_ff", "lr_ph", "ck_ff"}
_EXPLICIT_KEYS = {"c0_ff", "l0_ph"}
_DEVICE_COMMON = {"q_i", "gamma_i_mhz", "n_cells", "port_ohm"}


def _parse_device(sec: dict) -> DeviceConfig:
    w = "device"
    _take(sec, w, _LINE_KEYS | _EDGE_KEYS | _ELEMENT_KEYS | _EXPLICIT_KEYS | _DEVICE_COMMON)
    keys = set(sec) - _DEVICE_COMMON
    if keys & _EXPLICIT_KEYS:
        if keys & ((_LINE_KEYS - {"d_um"}) | _EDGE_KEYS):
            raise ConfigError("[device] explicit c0_ff/l0_ph cannot be combined with line or band-edge keys")
        cell = CapacitiveCell(c0=_num(sec, "c0_ff", w, positive=True) * 1e-15,
                              l0=_num(sec, "l0_ph", w, positive=True) * 1e-12,
                              cr=_num(sec, "cr_ff", w, positive=True) * 1e-15,
                              lr=_num(sec, "lr_ph", w, positive=True) * 1e-12,
                              ck=_num(sec, "ck_ff", w, positive=True) * 1e-15,
                              d=_num(sec, "d_um", w, positive=True) * 1e-6)
    else:
        line = WaveguideSpec(z0=_num(sec, "z0_ohm", w, positive=True), n=_num(sec, "n", w, positive=True),
                             d=_num(sec, "d_um", w, positive=True) * 1e-6)
        if keys & _EDGE_KEYS:
            if keys & _ELEMENT_KEYS:
                raise ConfigError("[device] give either band edges or resonator elements, not both")
            lo = _num(sec, "f_lower_ghz", w, positive=True) * 1e9
            hi = _num(sec, "f_upper_ghz", w, positive=True) * 1e9
            if not lo < hi:
                raise ConfigError("[device] f_lower_ghz must be below f_upper_ghz")
            cell = cell_for_edges(line, lo, hi, _num(sec, "cr_ratio", w, default=1.0, positive=True))
        else:
            cell = CapacitiveCell.from_spec(line, cr=_num(sec, "cr_ff", w, positive=True) * 1e-15,
                                            lr=_num(sec, "lr_ph", w, positive=True) * 1e-12,
                                            ck=_num(sec, "ck_ff", w, positive=True) * 1e-15)
    if "q_i" in sec and "gamma_i_mhz" in sec:
        raise ConfigError("[device] give q_i or gamma_i_mhz, not both")
    if "q_i" in sec:
        gamma_i = derive_effective(cell).omega0 / _num(sec, "q_i", w, positive=True)
    else:
        gamma_i = TWO_PI * 1e6 * _num(sec, "gamma_i_mhz", w, default=0.0, nonneg=True)
    return DeviceConfig(cell=cell, gamma_i=gamma_i, n_cells=_int(sec, "n_cells", w, default=9),
                        port=_num(sec, "port_ohm", w, default=50.0, positive=True))


def _parse_disorder(sec: dict, seed: int) -> LocalizationConfig:
    w = "disorder"
    _take(sec, w, {"n_cells", "n_realizations", "sigma_rel", "freq_points", "include_loss"})
    disorder = DisorderConfig(n_cells=_int(sec, "n_cells", w, default=100, minimum=1),
                              n_realizations=_int(sec, "n_realizations", w, default=100_000, minimum=1),
                              sigma_rel=_num(sec, "sigma_rel", w, default=0.005, nonneg=True),
                              seed=seed)
    return LocalizationConfig(disorder, _int(sec, "freq_points", w, default=400, minimum=1),
                              _bool(sec, "include_loss", w, True))


def _parse_qubit(sec: dict) -> QubitConfig:
    w = "qubit"
    _take(sec, w, {"f_ge_ghz", "ej_over_ec", "ej_ghz", "ec_ghz", "cq_ff", "cg_ff",
                   "calibration_target_mhz", "t_int_us", "r_load_ohm"})
    cg_raw = sec.get("cg_ff", "calibrate")
    calibrate = cg_raw == "calibrate"
    if calibrate:
        cg = 10e-15  # starting point, replaced by the calibration
    else:
        cg = _num(sec, "cg_ff", w, positive=True) * 1e-15
    if "f_ge_ghz" in sec:
        if {"ej_ghz", "ec_ghz", "cq_ff"} & set(sec):
            raise ConfigError("[qubit] give f_ge_ghz + ej_over_ec or ej_ghz + ec_ghz, not both")
        p = transmon_from_frequency(_num(sec, "f_ge_ghz", w, positive=True) * 1e9,
                                    _num(sec, "ej_over_ec", w, default=100.0, positive=True), cg)
    else:
        ej = _num(sec, "ej_ghz", w, positive=True) * 1e9 * PLANCK
        ec = _num(sec, "ec_ghz", w, positive=True) * 1e9 * PLANCK
        if "cq_ff" in sec:
            p = TransmonParams(ej_max=ej, ec=ec, cq=_num(sec, "cq_ff", w, positive=True) * 1e-15, cg=cg)
        else:
            p = calibrate_cq(TransmonParams(ej_max=ej, ec=ec, cq=1e-13, cg=cg))
    t_int = _num(sec, "t_int_us", w, default=math.inf, positive=True) * 1e-6
    return QubitConfig(p, calibrate, TWO_PI * 1e6 * _num(sec, "calibration_target_mhz", w, default=10.0, positive=True),
                       t_int, _num(sec, "r_load_ohm", w, default=50.0, positive=True))


def _parse_sweeps(sec: dict | None) -> SweepConfig:
    if sec is None:
        return SweepConfig()
    w = "sweeps"
    _take(sec, w, {"k_points", "freq_start_ghz", "freq_stop_ghz", "freq_points", "flux_start", "flux_stop",
                   "flux_points"})
    out = SweepConfig(k_points=_int(sec, "k_points", w, default=1001, minimum=2),
                      freq_start=_num(sec, "freq_start_ghz", w, default=3.0, positive=True) * 1e9,
                      freq_stop=_num(sec, "freq_stop_ghz", w, default=9.0, positive=True) * 1e9,
                      freq_points=_int(sec, "freq_points", w, default=601, minimum=2),
                      flux_start=_num(sec, "flux_start", w, default=0.0),
                      flux_stop=_num(sec, "flux_stop", w, default=0.25),
                      flux_points=_int(sec, "flux_points", w, default=251, minimum=1))
    if not out.freq_start < out.freq_stop:
        raise ConfigError("[sweeps] freq_start_ghz must be below freq_stop_ghz")
    return out


def _parse_seeds(sec: dict | None) -> dict:
    seeds = {"disorder": 0, "fit": 0}
    if sec is None:
        return seeds
    _take(sec, "seeds", set(seeds))
    for key in seeds:
        seeds[key] = _int(sec, key, "seeds", default=0)
        if seeds[key] >= 2**64:
            raise ConfigError(f"[seeds] {key} must fit in 64 bits")
    return seeds


def _digest(doc: dict) -> str:
    canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode()).hexdigest()


def parse_config(text: str, base_dir: Path | None = None) -> RunConfig:
    """Parse and validate a configuration document."""
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"not a valid TOML document: {exc}") from exc
    _take(doc, "the top level", {"output_dir", "device", "disorder", "qubit", "sweeps", "seeds"})
    try:
        seeds = _parse_seeds(_section(doc, "seeds"))
        dev = _section(doc, "device")
        dis = _section(doc, "disorder")
        qub = _section(doc, "qubit")
        device = _parse_device(dev) if dev is not None else None
        localization = _parse_disorder(dis, seeds["disorder"]) if dis is not None else None
        qubit = _parse_qubit(qub) if qub is not None else None
        sweeps = _parse_sweeps(_section(doc, "sweeps"))
    except ConfigError:
        raise
    except (MetawgError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    out = doc.get("output_dir", "out")
    if not isinstance(out, str) or not out:
        raise ConfigError("output_dir must be a non-empty string")
    out_path = Path(out)
    if base_dir is not None and not out_path.is_absolute():
        out_path = base_dir / out_path
    return RunConfig(device, localization, qubit, sweeps, seeds, out_path, _digest(doc), doc)


def load_config(path) -> RunConfig:
    """Read and parse a configuration file (relative ``output_dir`` is resolved against the working directory)."""
    text = Path(path).read_text()
    return parse_config(text)
