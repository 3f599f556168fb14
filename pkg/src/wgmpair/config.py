"""Run configuration files.

Line-based ``key = value`` entries under ``[section]`` headers; ``#`` starts
a comment.  Every physical quantity carries a unit suffix (``1.61mm``,
``532nm``, ``4MHz``, ``40C``); a bare number for a physical key is an error,
as is any key or section not in :data:`SCHEMA`.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError

_UNITS = {
    "length": {"m": 1.0, "mm": 1e-3, "um": 1e-6, "µm": 1e-6, "nm": 1e-9, "pm": 1e-12},
    "frequency": {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9, "THz": 1e12},
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6, "ns": 1e-9, "ps": 1e-12},
    "temperature": {"C": 1.0, "degC": 1.0},
    "power": {"W": 1.0, "mW": 1e-3, "uW": 1e-6, "µW": 1e-6, "nW": 1e-9},
    "rate": {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "/s": 1.0},
}

_NUMBER = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(\S*)\s*$")


def parse_quantity(text: str, kind: str, key: str = "value") -> float:
    """Parse '1.61mm' style input into SI units (Celsius for temperature)."""
    m = _NUMBER.match(text)
    if not m:
        raise ConfigError(f"{key}: cannot parse {text!r} as a {kind}")
    value, unit = float(m.group(1)), m.group(2)
    if not unit:
        raise ConfigError(f"{key}: {text!r} needs a {kind} unit ({', '.join(_UNITS[kind])})")
    try:
        return value * _UNITS[kind][unit]
    except KeyError:
        raise ConfigError(f"{key}: unit {unit!r} is not a {kind} unit") from None


def _int(text, key):
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {text!r}") from None


def _float(text, key):
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {text!r}") from None


def _int_range(text, key):
    """'3' -> [3]; '1..4' -> [1, 2, 3, 4]; '0, 2' -> [0, 2]."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = (_int(s.strip(), key) for s in part.split("..", 1))
            if hi < lo:
                raise ConfigError(f"{key}: empty range {part!r}")
            out.extend(range(lo, hi + 1))
        elif part:
            out.append(_int(part, key))
    if not out:
        raise ConfigError(f"{key}: empty list")
    return out


def _bool(text, key):
    t = text.strip().lower()
    if t in ("yes", "true", "on", "1"):
        return True
    if t in ("no", "false", "off", "0"):
        return False
    raise ConfigError(f"{key}: expected yes/no, got {text!r}")


def _quantity(kind):
    return lambda text, key: parse_quantity(text, kind, key)


def _choice(*options):
    def parse(text, key):
        if text not in options:
            raise ConfigError(f"{key}: expected one of {', '.join(options)}, got {text!r}")
        return text
    return parse


def _string(text, key):
    return text


SCHEMA = {
    "resonator": {
        "major_radius": _quantity("length"),
        "polar_radius": _quantity("length"),
    },
    "material": {
        "name": _string,
        "file": _string,
        "constant_index": _float,
    },
    "operating": {
        "temperature": _quantity("temperature"),
    },
    "pump": {
        "q": _int,
        "p": _int,
        "m": _int,
        "wavelength": _quantity("length"),
        "polarization": _choice("o", "e", "ordinary", "extraordinary"),
    },
    "modes": {
        "q": _int_range,
        "m": _int_range,
        "p": _int_range,
        "l": _int_range,
        "polarization": _choice("o", "e", "ordinary", "extraordinary"),
    },
    "phasematch": {
        "signal_min": _quantity("length"),
        "signal_max": _quantity("length"),
        "q_max": _int,
        "p_max": _int,
        "a_max": _int,
        "tolerance": _quantity("frequency"),
        "tune_temperature": _bool,
        "tune_signal": _quantity("length"),
        "tune_min": _quantity("temperature"),
        "tune_max": _quantity("temperature"),
    },
    "source": {
        "modes": _int,
        "bandwidth": _quantity("frequency"),
        "pair_rate": _quantity("rate"),
        "mean_photon_number": _float,
        "clusters": _int_range,
    },
    "pump_schedule": {
        "pulse_length": _quantity("time"),
        "repetition_rate": _quantity("frequency"),
        "shape": _choice("rectangular", "smoothed"),
    },
    "detector_signal": {
        "efficiency": _float,
        "dark_rate": _quantity("rate"),
        "jitter_fwhm": _quantity("time"),
        "dead_time": _quantity("time"),
    },
    "simulation": {
        "duration": _quantity("time"),
        "seed": _int,
    },
    "analysis": {
        "bin_width": _quantity("time"),
        "max_lag": _quantity("time"),
        "normalization": _choice("gated", "total"),
        "split_transmission": _float,
    },
    "report": {
        "bandpass_clusters": _int_range,
        "bandpass_transmission": _float,
        "pump_power": _quantity("power"),
    },
}
SCHEMA["detector_idler"] = SCHEMA["detector_signal"]


@dataclass
class RunConfig:
    sections: dict[str, dict[str, object]]
    source: str = "<string>"
    base_dir: Path = Path(".")

    def get(self, section: str, key: str, default=None):
        return self.sections.get(section, {}).get(key, default)

    def require(self, section: str, key: str):
        try:
            return self.sections[section][key]
        except KeyError:
            raise ConfigError(f"{self.source}: missing [{section}] {key}") from None

    def has(self, section: str, key: str | None = None) -> bool:
        if key is None:
            return section in self.sections
        return key in self.sections.get(section, {})


def parse_config(text: str, source: str = "<string>", base_dir: Path | None = None) -> RunConfig:
    sections: dict[str, dict[str, object]] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{source}:{lineno}"
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if current not in SCHEMA:
                raise ConfigError(f"{where}: unknown section [{current}]")
            if current in sections:
                raise ConfigError(f"{where}: duplicate section [{current}]")
            sections[current] = {}
            continue
        if current is None:
            raise ConfigError(f"{where}: entry outside of a section")
        if "=" not in line:
            raise ConfigError(f"{where}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        parser = SCHEMA[current].get(key)
        if parser is None:
            raise ConfigError(f"{where}: unknown key {key!r} in [{current}]")
        if key in sections[current]:
            raise ConfigError(f"{where}: duplicate key {key!r}")
        sections[current][key] = parser(value, f"{where}: {key}")
    return RunConfig(sections, source, base_dir or Path("."))


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, str(path), path.parent)
