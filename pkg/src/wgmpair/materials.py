"""Refractive-index models for resonator materials.

A material is a pair of Sellmeier-type coefficient sets (ordinary and
extraordinary) plus the wavelength and temperature window the fit is valid
in.  Models are plain data and can be read from a key=value text file::

    name = MgO:LiNbO3 5% (Gayer 2008)
    formula = gayer
    ordinary = a1, a2, a3, a4, a5, a6, b1, b2, b3, b4
    extraordinary = ...
    wavelength_um = 0.5, 4.0
    temperature_c = 20, 200

Supported formulas are ``gayer`` (temperature-dependent extended Sellmeier
form used for doped lithium niobate) and ``constant`` (a single number per
polarization, handy for analytic checks).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError, DomainError


class Polarization(enum.Enum):
    ORDINARY = "ordinary"
    EXTRAORDINARY = "extraordinary"

    @classmethod
    def parse(cls, text: str) -> "Polarization":
        key = text.strip().lower()
        aliases = {"o": "ordinary", "e": "extraordinary"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise ConfigError(f"unknown polarization {text!r}") from None


_FORMULAS = {"gayer": 10, "constant": 1}


@dataclass(frozen=True)
class MaterialModel:
    name: str
    formula: str
    sellmeier_ordinary: tuple[float, ...]
    sellmeier_extraordinary: tuple[float, ...]
    wavelength_window_um: tuple[float, float]
    temperature_window_c: tuple[float, float]

    def __post_init__(self):
        if self.formula not in _FORMULAS:
            raise ConfigError(f"unknown index formula {self.formula!r}")
        ncoef = _FORMULAS[self.formula]
        for label, coef in (("ordinary", self.sellmeier_ordinary),
                            ("extraordinary", self.sellmeier_extraordinary)):
            if len(coef) != ncoef:
                raise ConfigError(
                    f"{self.formula} formula needs {ncoef} {label} coefficients, got {len(coef)}")
        lo, hi = self.wavelength_window_um
        tlo, thi = self.temperature_window_c
        if not (0 < lo < hi) or not (tlo < thi):
            raise ConfigError("validity window bounds must be increasing")

    def coefficients(self, pol: Polarization) -> tuple[float, ...]:
        if pol is Polarization.ORDINARY:
            return self.sellmeier_ordinary
        return self.sellmeier_extraordinary

    def check_window(self, wavelength_um, temperature_c) -> None:
        lo, hi = self.wavelength_window_um
        tlo, thi = self.temperature_window_c
        w = np.asarray(wavelength_um, dtype=float)
        if w.size and (np.nanmin(w) < lo or np.isnan(w).any()):
            raise DomainError(
                f"wavelength {np.nanmin(w):.6g} um below validity bound {lo} um of {self.name}")
        if w.size and np.nanmax(w) > hi:
            raise DomainError(
                f"wavelength {np.nanmax(w):.6g} um above validity bound {hi} um of {self.name}")
        if not tlo <= temperature_c <= thi:
            side = "below" if temperature_c < tlo else "above"
            bound = tlo if temperature_c < tlo else thi
            raise DomainError(
                f"temperature {temperature_c} C {side} validity bound {bound} C of {self.name}")

    def index(self, pol: Polarization, wavelength_um, temperature_c):
        """Refractive index at vacuum wavelength(s) in um; arrays broadcast."""
        self.check_window(wavelength_um, temperature_c)
        coef = self.coefficients(pol)
        lam = np.asarray(wavelength_um, dtype=float)
        if self.formula == "constant":
            out = np.full_like(lam, coef[0])
        else:
            out = _gayer(lam, temperature_c, coef)
        return float(out) if out.ndim == 0 else out


def _gayer(lam, temperature, c):
    a1, a2, a3, a4, a5, a6, b1, b2, b3, b4 = c
    f = (temperature - 24.5) * (temperature + 570.82)
    lam2 = lam * lam
    n2 = (a1 + b1 * f
          + (a2 + b2 * f) / (lam2 - (a3 + b3 * f) ** 2)
          + (a4 + b4 * f) / (lam2 - a5 ** 2)
          - a6 * lam2)
    return np.sqrt(n2)


def _floats(text: str, key: str) -> tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise ConfigError(f"non-numeric entry in {key!r}: {text!r}") from None


_REQUIRED = ("name", "formula", "ordinary", "extraordinary", "wavelength_um", "temperature_c")


def parse_material(text: str, source: str = "<string>") -> MaterialModel:
    fields: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _REQUIRED:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in fields:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        fields[key] = value
    missing = [k for k in _REQUIRED if k not in fields]
    if missing:
        raise ConfigError(f"{source}: missing keys {', '.join(missing)}")
    wl = _floats(fields["wavelength_um"], "wavelength_um")
    tc = _floats(fields["temperature_c"], "temperature_c")
    if len(wl) != 2 or len(tc) != 2:
        raise ConfigError(f"{source}: validity windows need exactly two bounds")
    return MaterialModel(
        name=fields["name"],
        formula=fields["formula"].lower(),
        sellmeier_ordinary=_floats(fields["ordinary"], "ordinary"),
        sellmeier_extraordinary=_floats(fields["extraordinary"], "extraordinary"),
        wavelength_window_um=(wl[0], wl[1]),
        temperature_window_c=(tc[0], tc[1]),
    )


def load_material(path) -> MaterialModel:
    path = Path(path)
    return parse_material(path.read_text(encoding="utf-8"), source=str(path))


def mgo_linbo3() -> MaterialModel:
    """5% MgO-doped congruent lithium niobate (Gayer et al. 2008)."""
    text = resources.files("wgmpair.data").joinpath("mgo_linbo3_gayer2008.mat").read_text()
    return parse_material(text, source="mgo_linbo3_gayer2008.mat")


def constant_index(n: float, name: str | None = None) -> MaterialModel:
    """Dispersionless material with the same index for both polarizations."""
    if not n > 1 or not math.isfinite(n):
        raise DomainError(f"constant index must exceed 1, got {n}")
    return MaterialModel(
        name=name or f"constant n={n}",
        formula="constant",
        sellmeier_ordinary=(float(n),),
        sellmeier_extraordinary=(float(n),),
        wavelength_window_um=(0.01, 1000.0),
        temperature_window_c=(-273.15, 2000.0),
    )


BUILTIN_MATERIALS = {"mgo_linbo3": mgo_linbo3}
