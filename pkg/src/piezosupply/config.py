"""Flat ``section.key = value`` configuration files.

Units are part of each key name (``beam.thickness_mm``, ``storage.input_cap_uf``)
and are converted to SI while parsing.  ``#`` starts a comment.  A file
with no ``preset`` and no ``beam.*`` keys uses the S128 unimorph preset.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

from .harvester import (
    GRAM,
    MM,
    BeamKind,
    BeamSpec,
    DriveSpec,
    LoadSpec,
    LumpedParams,
    natural_frequency,
)
from .power_stage import (
    OUTPUT_SETPOINTS,
    BuckSpec,
    PowerChain,
    RectifierSpec,
    StorageSpec,
    UvloSpec,
)
from .presets import PRESET_NAMES, S128, get_preset
from .transient import SimConfig
from .errors import DataError
from .fitting import FITTABLE


class ConfigError(DataError):
    def __init__(self, message, line=None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class InvalidChoiceError(ConfigError):
    pass


class _BadChoice(ValueError):
    pass


def _float(text):
    value = float(text)
    if not math.isfinite(value):
        raise ValueError("not finite")
    return value


def _positive(text):
    value = _float(text)
    if value <= 0:
        raise ValueError("must be strictly positive")
    return value


def _nonneg(text):
    value = _float(text)
    if value < 0:
        raise ValueError("must be >= 0")
    return value


def _count(text):
    value = int(text)
    if value < 1:
        raise ValueError("must be a positive integer")
    return value


def _float_list(text):
    return [_float(item) for item in text.split(",") if item.strip()]


def _bounds(text):
    values = _float_list(text)
    if len(values) != 2:
        raise ValueError("expected 'lower, upper'")
    return tuple(values)


def _resistance(text):
    if text.strip().lower() == "open":
        return None
    return _positive(text)


def _choice(options):
    def parse(text):
        if text not in options:
            raise _BadChoice(f"expected one of {', '.join(options)}")
        return text
    return parse


# key -> (parser, SI scale factor)
_KEYS = {
    "preset": (_choice(PRESET_NAMES), None),
    "beam.kind": (_choice(tuple(k.value for k in BeamKind)), None),
    "beam.total_length_mm": (_positive, MM),
    "beam.width_mm": (_positive, MM),
    "beam.thickness_mm": (_positive, MM),
    "beam.piezo_length_mm": (_positive, MM),
    "beam.piezo_width_mm": (_positive, MM),
    "beam.piezo_thickness_mm": (_positive, MM),
    "beam.mass_g": (_positive, GRAM),
    "model.m_eff_g": (_positive, GRAM),
    "model.k_eff_n_per_m": (_positive, 1.0),
    "model.zeta": (_positive, 1.0),
    "model.theta_n_per_v": (_nonneg, 1.0),
    "model.c_p_nf": (_positive, 1e-9),
    "model.tip_mass_g": (_nonneg, GRAM),
    "drive.accel_m_s2": (_nonneg, 1.0),
    "drive.frequency_hz": (_positive, 1.0),
    "load.resistance_ohm": (_resistance, None),
    "rectifier.diode_drop_v": (_nonneg, 1.0),
    "uvlo.rising_v": (_positive, 1.0),
    "uvlo.falling_v": (_positive, 1.0),
    "buck.output_setpoint_v": (_float, 1.0),
    "buck.max_output_current_ma": (_positive, 1e-3),
    "buck.input_min_v": (_positive, 1.0),
    "buck.input_max_v": (_positive, 1.0),
    "buck.efficiency": (_positive, 1.0),
    "storage.input_cap_uf": (_positive, 1e-6),
    "storage.output_cap_uf": (_positive, 1e-6),
    "storage.supercap_f": (_nonneg, 1.0),
    "sim.dt_s": (_positive, 1.0),
    "sim.duration_s": (_positive, 1.0),
    "sim.record_stride": (_count, None),
    "sim.steps_per_period": (_count, None),
    "sim.periods": (_count, None),
    "sweep.f_min_hz": (_positive, 1.0),
    "sweep.f_max_hz": (_positive, 1.0),
    "sweep.f_step_hz": (_positive, 1.0),
    "sweep.resistances_ohm": (_float_list, None),
    "sweep.tip_masses_g": (_float_list, None),
    "fit.xtol": (_positive, 1.0),
    "fit.max_evaluations": (_count, None),
}
_KEYS.update({f"fit.bounds.{name}": (_bounds, None) for name in FITTABLE})

DEFAULT_RESISTANCES = tuple(10 ** (3 + 3 * i / 30) for i in range(31))
DEFAULT_TIP_MASSES_G = (0.0, 0.6, 1.0, 1.5)


@dataclass(frozen=True)
class SweepSettings:
    f_min: float = 16.0
    f_max: float = 500.0
    f_step: float = 2.0
    resistances: tuple = DEFAULT_RESISTANCES
    tip_masses: tuple = tuple(m * GRAM for m in DEFAULT_TIP_MASSES_G)


@dataclass(frozen=True)
class SimSettings:
    dt: Optional[float] = None
    duration: Optional[float] = None
    record_stride: int = 1
    steps_per_period: int = 1000
    periods: int = 300

    def sim_config(self, frequency: float) -> SimConfig:
        dt = self.dt if self.dt is not None else 1.0 / (self.steps_per_period * frequency)
        duration = self.duration if self.duration is not None else self.periods / frequency
        return SimConfig(dt=dt, duration=duration, record_stride=self.record_stride)


@dataclass(frozen=True)
class SystemConfig:
    params: LumpedParams
    beam: Optional[BeamSpec] = None
    preset: Optional[str] = None
    accel_amplitude: float = 9.81
    drive_frequency: Optional[float] = None
    load: LoadSpec = LoadSpec()
    rectifier: RectifierSpec = RectifierSpec()
    uvlo: UvloSpec = UvloSpec()
    buck: BuckSpec = BuckSpec()
    storage: Optional[StorageSpec] = None
    sim: SimSettings = SimSettings()
    sweep: SweepSettings = SweepSettings()
    fit_bounds: dict = field(default_factory=dict)
    fit_xtol: float = 1e-6
    fit_max_evaluations: int = 2000

    def drive(self, frequency: Optional[float] = None) -> DriveSpec:
        f = frequency or self.drive_frequency or natural_frequency(self.params)
        return DriveSpec(self.accel_amplitude, f)

    def power_chain(self) -> PowerChain:
        if self.storage is None:
            raise ConfigError("transient runs through the power stage need "
                              "storage.input_cap_uf and storage.output_cap_uf")
        if self.load.resistance is None:
            raise ConfigError("the power stage needs load.resistance_ohm")
        return PowerChain(self.storage, self.load.resistance, self.rectifier,
                          self.uvlo, self.buck)


def _tokenize(text):
    entries = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in entries:
            raise ConfigError(f"duplicate key {key!r} (first set on line {entries[key][1]})", lineno)
        if key == "buck.output_setpoint_v":
            try:
                setpoint = float(value)
            except ValueError:
                raise ConfigError(f"{key}: non-numeric value {value!r}", lineno) from None
            if setpoint not in OUTPUT_SETPOINTS:
                legal = ", ".join(f"{v:g}" for v in OUTPUT_SETPOINTS)
                raise InvalidChoiceError(
                    f"{key}: invalid choice {value!r}; must be one of {legal}", lineno)
        parser, scale = _KEYS[key]
        try:
            parsed = parser(value)
        except _BadChoice as exc:
            raise InvalidChoiceError(f"{key}: invalid choice {value!r}; {exc}", lineno) from None
        except ValueError as exc:
            raise ConfigError(f"{key}: invalid value {value!r} ({exc})", lineno) from None
        if scale is not None:
            parsed = parsed * scale
        entries[key] = (parsed, lineno)
    return entries


def load_config(text: str) -> SystemConfig:
    """Parse configuration text into a validated :class:`SystemConfig`.

    Raises
    ------
    ConfigError
        With the offending line number whenever one can be attributed.
    """
    entries = _tokenize(text)
    values = {k: v for k, (v, _) in entries.items()}

    def section_line(prefix):
        lines = [ln for k, (_, ln) in entries.items() if k.startswith(prefix)]
        return max(lines) if lines else None

    def build(prefix, factory):
        try:
            return factory()
        except ValueError as exc:
            raise ConfigError(str(exc), section_line(prefix)) from None

    preset_name = values.get("preset")
    beam_keys = [k for k in values if k.startswith("beam.")]
    if preset_name is None and not beam_keys:
        preset_name = S128
    preset = get_preset(preset_name) if preset_name else None

    beam = preset.beam if preset else None
    if beam_keys:
        fields = {
            "total_length": "beam.total_length_mm", "width": "beam.width_mm",
            "thickness": "beam.thickness_mm", "piezo_length": "beam.piezo_length_mm",
            "piezo_width": "beam.piezo_width_mm", "piezo_thickness": "beam.piezo_thickness_mm",
            "beam_mass": "beam.mass_g",
        }
        if beam is None:
            missing = [key for key in fields.values() if key not in values]
            if missing:
                raise ConfigError(f"explicit beam needs {', '.join(missing)}",
                                  section_line("beam."))
            beam_kw = {"kind": BeamKind(values.get("beam.kind", "unimorph"))}
        else:
            beam_kw = {"kind": BeamKind(values.get("beam.kind", beam.kind.value))}
        for name, key in fields.items():
            beam_kw[name] = values.get(key, getattr(beam, name) if beam else None)
        beam = build("beam.", lambda: BeamSpec(**beam_kw))

    model_fields = {
        "m_eff": "model.m_eff_g", "k_eff": "model.k_eff_n_per_m", "zeta": "model.zeta",
        "theta": "model.theta_n_per_v", "c_p": "model.c_p_nf", "tip_mass": "model.tip_mass_g",
    }
    overrides = {name: values[key] for name, key in model_fields.items() if key in values}
    if preset is not None and not beam_keys:
        params = build("model.", lambda: replace(preset.params, **overrides))
    else:
        if "k_eff" not in overrides:
            raise ConfigError("model.k_eff_n_per_m is required without a preset",
                              section_line("model.") or section_line("beam."))
        overrides.setdefault("m_eff", beam.effective_mass)
        params = build("model.", lambda: LumpedParams(**overrides))

    def pick(section, mapping, base):
        kw = {name: values[key] for name, key in mapping.items() if key in values}
        return build(section, lambda: replace(base, **kw) if kw else base)

    rectifier = pick("rectifier.", {"diode_drop": "rectifier.diode_drop_v"}, RectifierSpec())
    uvlo = pick("uvlo.", {"rising_threshold": "uvlo.rising_v",
                          "falling_threshold": "uvlo.falling_v"}, UvloSpec())
    buck = pick("buck.", {"output_setpoint": "buck.output_setpoint_v",
                          "max_output_current": "buck.max_output_current_ma",
                          "input_min": "buck.input_min_v", "input_max": "buck.input_max_v",
                          "efficiency": "buck.efficiency"}, BuckSpec())

    storage = None
    if any(k.startswith("storage.") for k in values):
        for key in ("storage.input_cap_uf", "storage.output_cap_uf"):
            if key not in values:
                raise ConfigError(f"{key} is required when storage is configured",
                                  section_line("storage."))
        storage = build("storage.", lambda: StorageSpec(
            values["storage.input_cap_uf"], values["storage.output_cap_uf"],
            values.get("storage.supercap_f", 0.0)))

    sim = SimSettings(
        dt=values.get("sim.dt_s"), duration=values.get("sim.duration_s"),
        record_stride=values.get("sim.record_stride", 1),
        steps_per_period=values.get("sim.steps_per_period", 1000),
        periods=values.get("sim.periods", 300))

    sweep_kw = {}
    for name, key in (("f_min", "sweep.f_min_hz"), ("f_max", "sweep.f_max_hz"),
                      ("f_step", "sweep.f_step_hz")):
        if key in values:
            sweep_kw[name] = values[key]
    if "sweep.resistances_ohm" in values:
        sweep_kw["resistances"] = tuple(values["sweep.resistances_ohm"])
    if "sweep.tip_masses_g" in values:
        sweep_kw["tip_masses"] = tuple(m * GRAM for m in values["sweep.tip_masses_g"])
    sweep = SweepSettings(**sweep_kw)
    if not sweep.f_min < sweep.f_max:
        raise ConfigError("sweep.f_min_hz must be below sweep.f_max_hz", section_line("sweep."))
    if any(r <= 0 for r in sweep.resistances) or any(
            b <= a for a, b in zip(sweep.resistances, sweep.resistances[1:])):
        raise ConfigError("sweep.resistances_ohm must be positive and strictly increasing",
                          entries.get("sweep.resistances_ohm", (None, None))[1])
    if any(m < 0 for m in sweep.tip_masses):
        raise ConfigError("sweep.tip_masses_g must be non-negative",
                          entries.get("sweep.tip_masses_g", (None, None))[1])

    fit_bounds = {k.rsplit(".", 1)[1]: v for k, v in values.items() if k.startswith("fit.bounds.")}
    for name, (lo, hi) in fit_bounds.items():
        if not lo < hi:
            raise ConfigError(f"fit.bounds.{name}: lower must be below upper",
                              entries[f"fit.bounds.{name}"][1])

    return SystemConfig(
        params=params,
        beam=beam,
        preset=preset_name,
        accel_amplitude=values.get("drive.accel_m_s2", 9.81),
        drive_frequency=values.get("drive.frequency_hz"),
        load=LoadSpec(values.get("load.resistance_ohm")),
        rectifier=rectifier,
        uvlo=uvlo,
        buck=buck,
        storage=storage,
        sim=sim,
        sweep=sweep,
        fit_bounds=fit_bounds,
        fit_xtol=values.get("fit.xtol", 1e-6),
        fit_max_evaluations=values.get("fit.max_evaluations", 2000),
    )
