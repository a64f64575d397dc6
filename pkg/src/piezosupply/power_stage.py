"""Behavioural model of the rectifier / UVLO / buck power-conditioning chain.

Every function here is a pure state transition: it takes a
:class:`PowerStageState` and returns a new one.  The buck regulator is an
averaged energy-transfer element; switching ripple is not modelled.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Optional

OUTPUT_SETPOINTS = (1.8, 2.5, 3.3, 3.6)


class Mode(enum.Enum):
    UVLO_SLEEP = "UVLO_SLEEP"
    TRANSFER = "TRANSFER"
    REGULATED_IDLE = "REGULATED_IDLE"


class Conduction(enum.Enum):
    BLOCKED = 0
    POSITIVE = 1
    NEGATIVE = -1

    @property
    def conducting(self) -> bool:
        return self is not Conduction.BLOCKED


@dataclass(frozen=True)
class RectifierSpec:
    diode_drop: float = 0.4

    def __post_init__(self):
        if not (math.isfinite(self.diode_drop) and self.diode_drop >= 0):
            raise ValueError(f"diode_drop must be >= 0, got {self.diode_drop!r}")


@dataclass(frozen=True)
class UvloSpec:
    rising_threshold: float = 4.04
    falling_threshold: float = 3.67

    def __post_init__(self):
        if not (self.rising_threshold > self.falling_threshold > 0):
            raise ValueError(
                "UVLO thresholds need rising > falling > 0, got "
                f"rising={self.rising_threshold!r}, falling={self.falling_threshold!r}")


@dataclass(frozen=True)
class BuckSpec:
    output_setpoint: float = 3.6
    max_output_current: float = 0.1
    input_min: float = 2.7
    input_max: float = 20.0
    efficiency: float = 0.85

    def __post_init__(self):
        if self.output_setpoint not in OUTPUT_SETPOINTS:
            raise ValueError(
                f"output_setpoint must be one of {OUTPUT_SETPOINTS}, got {self.output_setpoint!r}")
        if not (0 < self.efficiency <= 1):
            raise ValueError(f"efficiency must lie in (0, 1], got {self.efficiency!r}")
        if not self.max_output_current > 0:
            raise ValueError("max_output_current must be positive")
        if not (0 < self.input_min < self.input_max):
            raise ValueError("need 0 < input_min < input_max")


@dataclass(frozen=True)
class StorageSpec:
    input_cap: float
    output_cap: float
    supercap: float = 0.0

    def __post_init__(self):
        if not self.input_cap > 0:
            raise ValueError("input_cap must be positive")
        if not self.output_cap > 0:
            raise ValueError("output_cap must be positive")
        if not self.supercap >= 0:
            raise ValueError("supercap must be >= 0")

    @property
    def output_total(self) -> float:
        # supercapacitor sits in parallel with the output capacitor
        return self.output_cap + self.supercap


@dataclass(frozen=True)
class PowerChain:
    """Complete conditioning chain feeding a resistive load."""

    storage: StorageSpec
    load_resistance: float
    rectifier: RectifierSpec = field(default_factory=RectifierSpec)
    uvlo: UvloSpec = field(default_factory=UvloSpec)
    buck: BuckSpec = field(default_factory=BuckSpec)

    def __post_init__(self):
        if not self.load_resistance > 0:
            raise ValueError("load_resistance must be positive")


@dataclass(frozen=True)
class StageLedger:
    """Cumulative energy flows in joules.

    ``stored`` is the energy currently held in the input and output
    capacitors and ``stored_initial`` the amount held when the ledger was
    opened; ``shunt_loss`` is charge dumped by the input over-voltage clamp.
    """

    harvested_in: float = 0.0
    diode_loss: float = 0.0
    converter_loss: float = 0.0
    delivered_to_load: float = 0.0
    shunt_loss: float = 0.0
    stored: float = 0.0
    stored_initial: float = 0.0

    @property
    def residual(self) -> float:
        return self.harvested_in - (
            self.diode_loss + self.converter_loss + self.delivered_to_load
            + self.shunt_loss + self.stored - self.stored_initial)


@dataclass(frozen=True)
class PowerStageState:
    mode: Mode = Mode.UVLO_SLEEP
    v_input_cap: float = 0.0
    v_output: float = 0.0
    energy_ledger: StageLedger = field(default_factory=StageLedger)

    def __post_init__(self):
        if self.v_input_cap < 0 or self.v_output < 0:
            raise ValueError("capacitor voltages must be >= 0")


def initial_state(storage: StorageSpec, v_input_cap=0.0, v_output=0.0,
                  mode=Mode.UVLO_SLEEP) -> PowerStageState:
    """State with a ledger opened at the given capacitor voltages."""
    e = stored_energy(storage, v_input_cap, v_output)
    return PowerStageState(mode, v_input_cap, v_output,
                           StageLedger(stored=e, stored_initial=e))


def stored_energy(storage: StorageSpec, v_input_cap: float, v_output: float) -> float:
    return 0.5 * (storage.input_cap * v_input_cap ** 2
                  + storage.output_total * v_output ** 2)


def rectifier_step(v_piezo: float, v_input_cap: float, spec: RectifierSpec) -> Conduction:
    """Bridge state: conducts only when the source exceeds the cap plus two drops."""
    if v_input_cap < 0:
        raise ValueError("v_input_cap must be >= 0")
    if abs(v_piezo) > v_input_cap + 2.0 * spec.diode_drop:
        return Conduction.POSITIVE if v_piezo > 0 else Conduction.NEGATIVE
    return Conduction.BLOCKED


def uvlo_step(mode: Mode, v_input_cap: float, spec: UvloSpec) -> Mode:
    if mode is Mode.UVLO_SLEEP:
        return Mode.TRANSFER if v_input_cap >= spec.rising_threshold else mode
    if v_input_cap <= spec.falling_threshold:
        return Mode.UVLO_SLEEP
    return mode


def charge_input_cap(i_rect: float, state: PowerStageState, dt: float,
                     storage: StorageSpec, diode_drop: float = 0.0,
                     input_max: Optional[float] = None) -> PowerStageState:
    """Push rectified current ``i_rect`` into the input capacitor for ``dt``.

    The harvested energy is ``(v_avg + 2 diode_drop) i dt`` with the
    trapezoidal average voltage over the step, so the bridge drop is booked
    as ``diode_loss``.  The bridge cannot discharge the capacitor, so
    negative current is clamped to zero.  Above ``input_max`` the surplus
    charge is dumped by the shunt clamp at that voltage.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if i_rect <= 0:
        return state
    c = storage.input_cap
    v0 = state.v_input_cap
    charge = i_rect * dt
    v1 = v0 + charge / c
    shunt_charge = 0.0
    if input_max is not None and v1 > input_max:
        v1 = max(v0, input_max)
        shunt_charge = charge - c * (v1 - v0)
    cap_charge = charge - shunt_charge
    diode = 2.0 * diode_drop * charge
    shunt = shunt_charge * v1
    led = state.energy_ledger
    led = replace(
        led,
        harvested_in=led.harvested_in + cap_charge * 0.5 * (v0 + v1) + shunt + diode,
        diode_loss=led.diode_loss + diode,
        shunt_loss=led.shunt_loss + shunt,
        stored=stored_energy(storage, v1, state.v_output),
    )
    return replace(state, v_input_cap=v1, energy_ledger=led)


def buck_step(state: PowerStageState, chain: PowerChain, dt: float) -> PowerStageState:
    """Advance the averaged buck converter and its load by ``dt``.

    When enabled and the input lies inside its operating range, the
    converter moves just enough energy to bring the output to the setpoint
    at the end of the step, limited by the charge left above ``input_min``
    and by ``max_output_current``.  The load draws ``v_out**2 / R`` in
    backward-Euler form, which keeps the ledger exact per step.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    buck, storage = chain.buck, chain.storage
    c_in, c_out = storage.input_cap, storage.output_total
    r = chain.load_resistance
    v_in, v_out = state.v_input_cap, state.v_output
    e_out = 0.0
    if state.mode is not Mode.UVLO_SLEEP and buck.input_min <= v_in <= buck.input_max:
        target = buck.output_setpoint
        need = 0.5 * (c_out + 2.0 * dt / r) * target ** 2 - 0.5 * c_out * v_out ** 2
        available = buck.efficiency * 0.5 * c_in * (v_in ** 2 - buck.input_min ** 2)
        i_max = buck.max_output_current
        current_cap = i_max * dt * (v_out + 0.5 * i_max * dt / c_out)
        e_out = max(0.0, min(need, available, current_cap))
    e_in = e_out / buck.efficiency
    v_in_new = v_in
    if e_in > 0:
        v_in_new = math.sqrt(max(v_in ** 2 - 2.0 * e_in / c_in, 0.0))
    v_out_sq = (c_out * v_out ** 2 + 2.0 * e_out) / (c_out + 2.0 * dt / r)
    v_out_new = min(math.sqrt(v_out_sq), buck.output_setpoint)
    delivered = dt * v_out_new ** 2 / r

    mode = state.mode
    if mode is not Mode.UVLO_SLEEP:
        in_regulation = v_out_new >= buck.output_setpoint * (1.0 - 1e-12)
        mode = Mode.REGULATED_IDLE if in_regulation else Mode.TRANSFER

    led = state.energy_ledger
    led = replace(
        led,
        converter_loss=led.converter_loss + (e_in - e_out),
        delivered_to_load=led.delivered_to_load + delivered,
        stored=stored_energy(storage, v_in_new, v_out_new),
    )
    return PowerStageState(mode, v_in_new, v_out_new, led)
