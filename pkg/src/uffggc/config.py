"""Mission configuration files.

INI grammar (``configparser``), SI units, ``#`` comments::

    [orbit]      altitude, ellipticity, gamma_sign, earth_gm, earth_radius
    [species.A]  name, wavelength, T, mass_u, atoms, contrast
    [species.B]  same keys as species.A
    [control]    delta_r0, delta_v0, offset_r0, offset_v0 (one value or
                 three comma-separated), delta_Omega, delta_gamma,
                 delta_theta, delta_f, delta_T, delta_e, delta_a_indep,
                 cycle_time, cloud_sigma_r, cloud_sigma_v
    [run]        chi_steps, duration_months, budget_chi, curve_points,
                 workers, output_dir, shifts_csv, budget_csv, curve_csv

Every section is optional except that unknown sections and keys are
rejected.  Missing keys take the values of the shipped ``table1`` preset.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from scipy import constants

from .budget import Mission, SpeciesParams, UncertaintyInputs
from .orbitgrav import EARTH_GM, EARTH_RADIUS, OrbitModel

PRESETS = ("table1",)
OUTPUT_ENV = "UFFGGC_OUTPUT_DIR"

_FLOAT = float
_VEC = "vec"
_STR = str
_INT = int

SCHEMA = {
    "orbit": {
        "altitude": _FLOAT, "ellipticity": _FLOAT, "gamma_sign": _INT,
        "earth_gm": _FLOAT, "earth_radius": _FLOAT,
    },
    "species.A": {
        "name": _STR, "wavelength": _FLOAT, "T": _FLOAT, "mass_u": _FLOAT, "atoms": _FLOAT, "contrast": _FLOAT,
    },
    "control": {
        "delta_r0": _VEC, "delta_v0": _VEC, "offset_r0": _VEC, "offset_v0": _VEC,
        "delta_Omega": _FLOAT, "delta_gamma": _FLOAT, "delta_theta": _FLOAT, "delta_f": _FLOAT,
        "delta_T": _FLOAT, "delta_e": _FLOAT, "delta_a_indep": _FLOAT, "cycle_time": _FLOAT,
        "cloud_sigma_r": _FLOAT, "cloud_sigma_v": _FLOAT,
    },
    "run": {
        "chi_steps": _INT, "duration_months": _FLOAT, "budget_chi": _FLOAT, "curve_points": _INT,
        "workers": _INT, "output_dir": _STR, "shifts_csv": _STR, "budget_csv": _STR, "curve_csv": _STR,
    },
}
SCHEMA["species.B"] = SCHEMA["species.A"]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    chi_steps: int = 720
    duration_months: float = 15.0
    budget_chi: float = 0.0
    curve_points: int = 2000
    workers: int = 1
    output_dir: str = "."
    shifts_csv: str = "shifts.csv"
    budget_csv: str = "budget.csv"
    curve_csv: str = "integration.csv"

    def output_path(self, name: str) -> Path:
        base = os.environ.get(OUTPUT_ENV) or self.output_dir
        return Path(base) / name


@dataclass(frozen=True)
class MissionConfig:
    mission: Mission
    run: RunConfig
    cloud_sigma_r: float = 500e-6
    cloud_sigma_v: float = 100e-6


def _parser() -> configparser.ConfigParser:
    p = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    p.optionxform = str  # keys are case sensitive (T, delta_Omega)
    return p


def _read_text(source: str) -> tuple[str, str]:
    if source in PRESETS:
        ref = resources.files("uffggc") / "presets" / f"{source}.ini"
        return ref.read_text(encoding="utf-8"), f"preset {source}"
    try:
        return Path(source).read_text(encoding="utf-8"), source
    except OSError as exc:
        raise ConfigError(f"cannot read config {source!r}: {exc}") from exc


def _convert(kind, raw: str, where: str):
    try:
        if kind is _VEC:
            parts = [float(x) for x in raw.split(",")]
            if len(parts) not in (1, 3):
                raise ValueError("expected 1 or 3 values")
            return parts[0] if len(parts) == 1 else tuple(parts)
        if kind is _INT:
            f = float(raw)
            if f != int(f):
                raise ValueError("expected an integer")
            return int(f)
        return kind(raw.strip())
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _collect(text: str, label: str, into: dict) -> None:
    p = _parser()
    try:
        p.read_string(text, source=label)
    except configparser.Error as exc:
        raise ConfigError(f"{label}: {exc}") from exc
    for section in p.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{label}: unknown section [{section}]")
        for key, raw in p.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"{label}: unknown key {key!r} in [{section}]")
            into.setdefault(section, {})[key] = _convert(SCHEMA[section][key], raw, f"{label} [{section}] {key}")


def _species(d: dict) -> SpeciesParams:
    return SpeciesParams(
        name=d["name"], wavelength=d["wavelength"], T=d["T"],
        mass=d["mass_u"] * constants.atomic_mass, atoms=d["atoms"], contrast=d["contrast"],
    )


def load_config(source: str) -> MissionConfig:
    """Load a config file (or preset name) layered over the ``table1`` preset."""
    values: dict = {}
    _collect(*_read_text("table1"), values)
    if source != "table1":
        _collect(*_read_text(source), values)
    try:
        o = values["orbit"]
        orbit = OrbitModel(
            altitude=o["altitude"], ellipticity=o["ellipticity"], gamma_sign=o["gamma_sign"],
            earth_gm=o.get("earth_gm", EARTH_GM), earth_radius=o.get("earth_radius", EARTH_RADIUS),
        )
        c = dict(values["control"])
        cycle = c.pop("cycle_time")
        sig_r, sig_v = c.pop("cloud_sigma_r"), c.pop("cloud_sigma_v")
        inputs = UncertaintyInputs(**c)
        mission = Mission(orbit, _species(values["species.A"]), _species(values["species.B"]), inputs, cycle)
        mission.noise()  # validates contrast, atoms, cycle time
        run = RunConfig(**values["run"])
        if run.chi_steps < 1 or run.curve_points < 2 or run.duration_months <= 0.0:
            raise ValueError("run block needs chi_steps >= 1, curve_points >= 2, duration_months > 0")
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    return MissionConfig(mission, run, sig_r, sig_v)
