"""Frequency, load and tip-mass sweeps plus resonance location."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .harvester import (
    STANDARD_GRAVITY,
    DriveSpec,
    LoadSpec,
    LumpedParams,
    natural_frequency,
    phasor_arrays,
)


class AbscissaKind(enum.Enum):
    FREQUENCY_HZ = "frequency_hz"
    RESISTANCE_OHM = "resistance_ohm"
    TIP_MASS_KG = "tip_mass_kg"


class ValueKind(enum.Enum):
    VOLT_AMPLITUDE = "volt_amplitude"
    AVG_POWER = "avg_power"
    RESONANT_FREQ = "resonant_freq"


@dataclass(frozen=True, eq=False)
class SweepCurve:
    """Ordered samples of one swept quantity."""

    abscissa_kind: AbscissaKind
    value_kind: ValueKind
    abscissa: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        x = np.array(self.abscissa, dtype=float)
        y = np.array(self.values, dtype=float)
        if x.ndim != 1 or x.shape != y.shape:
            raise ValueError("abscissa and values must be 1-D arrays of equal length")
        if len(x) < 1:
            raise ValueError("a curve needs at least one point")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("curve samples must be finite")
        if np.any(np.diff(x) <= 0):
            raise ValueError("abscissa must be strictly increasing")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "abscissa_kind", AbscissaKind(self.abscissa_kind))
        object.__setattr__(self, "value_kind", ValueKind(self.value_kind))
        object.__setattr__(self, "abscissa", x)
        object.__setattr__(self, "values", y)

    def __len__(self):
        return len(self.abscissa)

    @property
    def points(self):
        return list(zip(self.abscissa.tolist(), self.values.tolist()))

    def scaled(self, factor: float) -> "SweepCurve":
        return SweepCurve(self.abscissa_kind, self.value_kind, self.abscissa, self.values * factor)


class Resonance(NamedTuple):
    frequency: float
    value: float
    at_boundary: bool


class MassRow(NamedTuple):
    tip_mass: float
    resonant_freq: float
    peak_voltage: float


def frequency_grid(f_min: float, f_max: float, step: float) -> np.ndarray:
    """Inclusive grid ``f_min, f_min + step, ... <= f_max``."""
    if not (0 < f_min < f_max) or not step > 0:
        raise ValueError(f"invalid frequency grid: f_min={f_min}, f_max={f_max}, step={step}")
    n = int(math.floor((f_max - f_min) / step + 1e-9)) + 1
    return f_min + step * np.arange(n)


def frequency_sweep(params: LumpedParams, accel_amplitude: float,
                    f_min: float = 16.0, f_max: float = 500.0, step: float = 2.0,
                    load: LoadSpec = LoadSpec()) -> SweepCurve:
    """Voltage amplitude (open circuit) or average power (resistive) versus frequency."""
    freqs = frequency_grid(f_min, f_max, step)
    _, v = phasor_arrays(params, accel_amplitude, freqs, load.conductance)
    volts = np.abs(v)
    if load.is_open:
        return SweepCurve(AbscissaKind.FREQUENCY_HZ, ValueKind.VOLT_AMPLITUDE, freqs, volts)
    power = volts ** 2 / (2.0 * load.resistance)
    return SweepCurve(AbscissaKind.FREQUENCY_HZ, ValueKind.AVG_POWER, freqs, power)


def _vertex(x0, x1, x2, y0, y1, y2):
    d10, d12 = x1 - x0, x1 - x2
    num = d10 * d10 * (y1 - y2) - d12 * d12 * (y1 - y0)
    den = d10 * (y1 - y2) - d12 * (y1 - y0)
    if den == 0:
        return x1, y1
    xv = x1 - 0.5 * num / den
    xv = min(max(xv, x0), x2)
    # value of the interpolating parabola at its vertex
    l0 = (xv - x1) * (xv - x2) / ((x0 - x1) * (x0 - x2))
    l1 = (xv - x0) * (xv - x2) / ((x1 - x0) * (x1 - x2))
    l2 = (xv - x0) * (xv - x1) / ((x2 - x0) * (x2 - x1))
    return xv, y0 * l0 + y1 * l1 + y2 * l2


def find_resonance(curve: SweepCurve) -> Resonance:
    """Peak of a frequency curve, refined by a parabola through its neighbours.

    Ties go to the lowest frequency.  A maximum on the first or last sample
    is returned unrefined with ``at_boundary`` set.
    """
    if curve.value_kind not in (ValueKind.VOLT_AMPLITUDE, ValueKind.AVG_POWER):
        raise ValueError(f"cannot locate a resonance on a {curve.value_kind.value} curve")
    if len(curve) < 3:
        raise ValueError("find_resonance needs at least 3 points")
    x, y = curve.abscissa, curve.values
    i = int(np.argmax(y))
    if i == 0 or i == len(x) - 1:
        return Resonance(float(x[i]), float(y[i]), True)
    xv, yv = _vertex(x[i - 1], x[i], x[i + 1], y[i - 1], y[i], y[i + 1])
    return Resonance(float(xv), float(yv), False)


def load_sweep(params: LumpedParams, drive: DriveSpec,
               resistances: Sequence[float]) -> SweepCurve:
    r = np.asarray(resistances, dtype=float)
    if r.ndim != 1 or len(r) == 0:
        raise ValueError("need a non-empty list of resistances")
    if np.any(r <= 0):
        raise ValueError("resistances must be positive")
    if np.any(np.diff(r) <= 0):
        raise ValueError("resistances must be strictly increasing")
    _, v = phasor_arrays(params, drive.accel_amplitude, drive.frequency, 1.0 / r)
    return SweepCurve(AbscissaKind.RESISTANCE_OHM, ValueKind.AVG_POWER, r,
                      np.abs(v) ** 2 / (2.0 * r))


def tip_mass_study(params: LumpedParams, masses: Sequence[float],
                   accel_amplitude: float = STANDARD_GRAVITY) -> list[MassRow]:
    """Resonant frequency and open-circuit voltage there, per tip mass.

    Rows come back sorted by mass.
    """
    masses = sorted(float(m) for m in masses)
    if any(m < 0 for m in masses):
        raise ValueError("tip masses must be non-negative")
    if len(set(masses)) != len(masses):
        raise ValueError("tip masses must be distinct")
    rows = []
    for m in masses:
        p = params.with_tip_mass(m)
        f = natural_frequency(p)
        _, v = phasor_arrays(p, accel_amplitude, f, 0.0)
        rows.append(MassRow(m, f, float(abs(v))))
    return rows


def mass_frequency_curve(rows: Sequence[MassRow]) -> SweepCurve:
    return SweepCurve(AbscissaKind.TIP_MASS_KG, ValueKind.RESONANT_FREQ,
                      [r.tip_mass for r in rows], [r.resonant_freq for r in rows])
