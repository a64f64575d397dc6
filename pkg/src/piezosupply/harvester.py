"""Lumped single-mode electromechanical model of a base-excited piezo cantilever.

Governing equations (SI units throughout)::

    M x'' + c x' + k x + theta v = -M a(t)
    C_p v' + v / R              = theta x'

with ``M = m_eff + tip_mass`` and ``c = 2 zeta sqrt(k M)``.  The base
acceleration is ``a(t) = A cos(w t)``; all phases are relative to it.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

GRAM = 1e-3
MM = 1e-3
STANDARD_GRAVITY = 9.81

# Fraction of the bare-beam mass acting as modal mass.  Anchored to the
# 1.0 g / 100 Hz and 1.5 g / 90 Hz resonance pair of the S128 unimorph.
EFFECTIVE_MASS_FRACTION = 0.5658

DEFAULT_ZETA = 0.02
DEFAULT_THETA = 1e-4
DEFAULT_CP = 100e-9


class BeamKind(enum.Enum):
    UNIMORPH = "unimorph"
    BIMORPH = "bimorph"


class Wiring(enum.Enum):
    SERIES = "series"
    PARALLEL = "parallel"


class DegenerateInputError(ValueError):
    """Inputs do not determine a unique answer."""


class InfeasibleError(ValueError):
    """Inputs imply a non-physical parameter set."""


@dataclass(frozen=True)
class BeamSpec:
    """Cantilever geometry and mass, stored in SI units (m, kg)."""

    kind: BeamKind
    total_length: float
    width: float
    thickness: float
    piezo_length: float
    piezo_width: float
    piezo_thickness: float
    beam_mass: float

    def __post_init__(self):
        for name in ("total_length", "width", "thickness", "piezo_length",
                     "piezo_width", "piezo_thickness", "beam_mass"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be strictly positive, got {value!r}")
        if self.piezo_length > self.total_length:
            raise ValueError("piezo_length exceeds total_length")
        if self.piezo_width > self.width:
            raise ValueError("piezo_width exceeds width")
        if self.piezo_thickness > self.thickness:
            raise ValueError("piezo_thickness exceeds thickness")

    @property
    def effective_mass(self) -> float:
        return EFFECTIVE_MASS_FRACTION * self.beam_mass


@dataclass(frozen=True)
class LumpedParams:
    """Parameter vector of the single-mode model (SI units).

    ``m_eff`` excludes the tip mass; the moving mass is ``m_eff + tip_mass``.
    """

    m_eff: float
    k_eff: float
    zeta: float = DEFAULT_ZETA
    theta: float = DEFAULT_THETA
    c_p: float = DEFAULT_CP
    tip_mass: float = 0.0

    def __post_init__(self):
        for name in ("m_eff", "k_eff", "c_p"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be strictly positive, got {value!r}")
        if not (math.isfinite(self.theta) and self.theta >= 0):
            raise ValueError(f"theta must be >= 0, got {self.theta!r}")
        if not (math.isfinite(self.tip_mass) and self.tip_mass >= 0):
            raise ValueError(f"tip_mass must be >= 0, got {self.tip_mass!r}")
        if not (0 < self.zeta < 1):
            raise ValueError(f"zeta must lie in (0, 1), got {self.zeta!r}")

    @property
    def total_mass(self) -> float:
        return self.m_eff + self.tip_mass

    @property
    def damping(self) -> float:
        """Viscous damping coefficient c in N s/m."""
        return 2.0 * self.zeta * math.sqrt(self.k_eff * self.total_mass)

    def with_tip_mass(self, tip_mass: float) -> "LumpedParams":
        return replace(self, tip_mass=tip_mass)


@dataclass(frozen=True)
class DriveSpec:
    accel_amplitude: float = STANDARD_GRAVITY
    frequency: float = 100.0

    def __post_init__(self):
        if not (math.isfinite(self.accel_amplitude) and self.accel_amplitude >= 0):
            raise ValueError(f"accel_amplitude must be >= 0, got {self.accel_amplitude!r}")
        if not (math.isfinite(self.frequency) and self.frequency > 0):
            raise ValueError(f"frequency must be > 0, got {self.frequency!r}")

    @property
    def omega(self) -> float:
        return 2.0 * math.pi * self.frequency


@dataclass(frozen=True)
class LoadSpec:
    """Electrical load on the piezo terminals; ``resistance=None`` is open circuit."""

    resistance: Optional[float] = None

    def __post_init__(self):
        if self.resistance is not None and not (
            math.isfinite(self.resistance) and self.resistance > 0
        ):
            raise ValueError(f"resistance must be > 0, got {self.resistance!r}")

    @classmethod
    def open_circuit(cls) -> "LoadSpec":
        return cls(None)

    @classmethod
    def resistive(cls, ohms: float) -> "LoadSpec":
        return cls(float(ohms))

    @property
    def is_open(self) -> bool:
        return self.resistance is None

    @property
    def conductance(self) -> float:
        return 0.0 if self.resistance is None else 1.0 / self.resistance


@dataclass(frozen=True)
class PhasorResponse:
    disp_amplitude: float
    disp_phase: float
    volt_amplitude: float
    volt_phase: float
    avg_power: float


def natural_frequency(params: LumpedParams) -> float:
    """Short-circuit mechanical natural frequency in Hz."""
    return math.sqrt(params.k_eff / params.total_mass) / (2.0 * math.pi)


def lumped_from_resonance_pair(p1, p2):
    """Solve ``m_eff`` and ``k_eff`` from two (tip_mass, frequency) resonances.

    Parameters
    ----------
    p1, p2 : tuple of float
        ``(tip_mass_kg, frequency_hz)`` pairs.

    Returns
    -------
    (m_eff, k_eff) : tuple of float
        In kg and N/m.

    Raises
    ------
    DegenerateInputError
        If both tip masses are equal.
    InfeasibleError
        If the solve gives a non-positive mass or stiffness.
    """
    (m1, f1), (m2, f2) = p1, p2
    if not (f1 > 0 and f2 > 0):
        raise ValueError("resonance frequencies must be positive")
    if m1 < 0 or m2 < 0:
        raise ValueError("tip masses must be non-negative")
    if m1 == m2:
        raise DegenerateInputError("the two tip masses must differ")
    ratio = (f1 / f2) ** 2
    if ratio == 1.0:
        raise InfeasibleError(
            "equal frequencies at different tip masses imply infinite effective mass")
    m_eff = (m2 - ratio * m1) / (ratio - 1.0)
    k_eff = (2.0 * math.pi * f1) ** 2 * (m_eff + m1)
    if not (m_eff > 0 and k_eff > 0):
        raise InfeasibleError(
            f"resonance pair implies m_eff={m_eff:.6g} kg, k_eff={k_eff:.6g} N/m")
    return m_eff, k_eff


def phasor_arrays(params: LumpedParams, accel: float, frequency, conductance):
    """Complex displacement and voltage amplitudes, broadcasting over inputs.

    ``conductance`` is ``1/R`` (0 for open circuit).
    """
    w = 2.0 * np.pi * np.asarray(frequency, dtype=float)
    g = np.asarray(conductance, dtype=float)
    m = params.total_mass
    mech = params.k_eff - w * w * m + 1j * w * params.damping
    # electrical branch reflected into the mechanical impedance
    elec = 1j * w * params.c_p + g
    coupled = mech + params.theta * params.theta * 1j * w / elec
    x = -m * accel / coupled
    v = 1j * w * params.theta * x / elec
    return x, v


def solve_phasor(params: LumpedParams, drive: DriveSpec, load: LoadSpec) -> PhasorResponse:
    """Steady-state sinusoidal response at one frequency and load."""
    x, v = phasor_arrays(params, drive.accel_amplitude, drive.frequency, load.conductance)
    x, v = complex(x), complex(v)
    volt = abs(v)
    power = 0.0 if load.is_open else volt * volt / (2.0 * load.resistance)
    return PhasorResponse(
        disp_amplitude=abs(x),
        disp_phase=math.atan2(x.imag, x.real),
        volt_amplitude=volt,
        volt_phase=math.atan2(v.imag, v.real),
        avg_power=power,
    )


def average_power(resp: PhasorResponse, load: LoadSpec) -> float:
    if load.is_open:
        return 0.0
    return resp.volt_amplitude ** 2 / (2.0 * load.resistance)


def _power_at_log_r(params, frequency, log_r):
    _, v = phasor_arrays(params, 1.0, frequency, math.exp(-log_r))
    return abs(complex(v)) ** 2 * math.exp(-log_r) / 2.0


_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def optimal_load(params: LumpedParams, frequency: float, tol: float = 1e-10) -> float:
    """Resistance maximising average power at ``frequency``.

    Golden-section search over ``ln R`` seeded at ``1/(w C_p)``.  Power
    scales with the square of the drive level, so a unit drive is used.
    With ``theta == 0`` the power vanishes identically and the weak-coupling
    optimum ``1/(w C_p)`` is returned.
    """
    if not frequency > 0:
        raise ValueError("frequency must be positive")
    seed = 1.0 / (2.0 * math.pi * frequency * params.c_p)
    if params.theta == 0:
        return seed
    span = math.log(1e3)
    lo, hi = math.log(seed) - span, math.log(seed) + span
    for _ in range(20):
        a, b = lo, hi
        c = b - _INV_PHI * (b - a)
        d = a + _INV_PHI * (b - a)
        fc = _power_at_log_r(params, frequency, c)
        fd = _power_at_log_r(params, frequency, d)
        while b - a > tol:
            # ties keep the lower-resistance side
            if fc >= fd:
                b, d, fd = d, c, fc
                c = b - _INV_PHI * (b - a)
                fc = _power_at_log_r(params, frequency, c)
            else:
                a, c, fc = c, d, fd
                d = a + _INV_PHI * (b - a)
                fd = _power_at_log_r(params, frequency, d)
        best = 0.5 * (a + b)
        # the optimum sat on a bracket edge: slide the bracket and retry
        if best - lo < 1e-3:
            lo, hi = lo - span, lo + 0.1 * span
        elif hi - best < 1e-3:
            lo, hi = hi - 0.1 * span, hi + span
        else:
            return math.exp(best)
    return math.exp(best)


def bimorph_adjust(single_layer: LumpedParams, wiring: Wiring) -> LumpedParams:
    """Electrical parameters of two identical layers wired in series or parallel.

    Series halves the capacitance and keeps the coupling, doubling the
    open-circuit voltage. Parallel doubles both, so the voltage is unchanged
    and the current doubles.
    """
    wiring = Wiring(wiring)
    if wiring is Wiring.SERIES:
        return replace(single_layer, c_p=single_layer.c_p / 2.0)
    return replace(single_layer, c_p=single_layer.c_p * 2.0, theta=single_layer.theta * 2.0)
