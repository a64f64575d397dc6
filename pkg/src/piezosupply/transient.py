"""Fixed-step time-domain co-simulation of the harvester and its load.

The mechanical state is advanced with classical RK4.  The piezo voltage
enters the RK4 stages as a linear ramp from its value at the start of the
step to a predicted end value; the charge actually injected into the
electrical side is then ``theta * (x_end - x_start)``, so the coupling work
seen by both domains agrees.  Capacitor states are updated semi-implicitly
(trapezoidal for a resistive load, exact charge sharing through the bridge).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .harvester import DriveSpec, LoadSpec, LumpedParams
from .power_stage import (
    Conduction,
    Mode,
    PowerChain,
    buck_step,
    charge_input_cap,
    initial_state,
    rectifier_step,
    uvlo_step,
)

MIN_STEPS_PER_PERIOD = 200
DEFAULT_STEPS_PER_PERIOD = 1000
DEFAULT_PERIODS = 300

_MODE_CODES = {Mode.UVLO_SLEEP: 0, Mode.TRANSFER: 1, Mode.REGULATED_IDLE: 2}
_CODE_MODES = {v: k for k, v in _MODE_CODES.items()}

POWER_CHANNELS = ("p_input", "p_mech", "p_diode", "p_converter", "p_shunt", "p_delivered")


class SimConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    dt: float
    duration: float
    record_stride: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise SimConfigError(f"dt must be positive, got {self.dt!r}")
        if not self.duration >= self.dt:
            raise SimConfigError("duration must be at least one step")
        if int(self.record_stride) != self.record_stride or self.record_stride < 1:
            raise SimConfigError("record_stride must be a positive integer")

    @classmethod
    def for_drive(cls, frequency, steps_per_period=DEFAULT_STEPS_PER_PERIOD,
                  periods=DEFAULT_PERIODS, record_stride=1):
        dt = 1.0 / (steps_per_period * frequency)
        return cls(dt=dt, duration=periods / frequency, record_stride=record_stride)

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))


@dataclass
class Trace:
    """Recorded channels of one run, all numpy arrays of equal length.

    Power channels other than ``p_input`` and ``p_mech`` hold the mean power
    over the interval ending at each sample.  ``e_stored`` is the energy held
    in the beam and every capacitor.
    """

    t: np.ndarray
    x: np.ndarray
    xdot: np.ndarray
    v_piezo: np.ndarray
    v_input_cap: np.ndarray
    v_output: np.ndarray
    mode: np.ndarray
    p_input: np.ndarray
    p_mech: np.ndarray
    p_diode: np.ndarray
    p_converter: np.ndarray
    p_shunt: np.ndarray
    p_delivered: np.ndarray
    e_stored: np.ndarray
    kind: str = "resistive"

    def __post_init__(self):
        n = len(self.t)
        for name in ("x", "xdot", "v_piezo", "v_input_cap", "v_output", "mode",
                     "e_stored") + POWER_CHANNELS:
            if len(getattr(self, name)) != n:
                raise ValueError(f"channel {name} has length {len(getattr(self, name))}, expected {n}")
        if n > 1 and not np.all(np.diff(self.t) > 0):
            raise ValueError("trace time must be strictly increasing")

    def __len__(self):
        return len(self.t)

    @property
    def modes(self):
        return [_CODE_MODES[int(c)] for c in self.mode]

    @property
    def v_load(self) -> np.ndarray:
        """Voltage across the load resistor."""
        return self.v_output if self.kind == "chain" else self.v_piezo

    @classmethod
    def from_channels(cls, t, kind="resistive", **channels):
        """Build a trace from whatever channels are given; the rest are zero."""
        t = np.asarray(t, dtype=float)
        fields = {}
        for name in ("x", "xdot", "v_piezo", "v_input_cap", "v_output", "mode",
                     "e_stored") + POWER_CHANNELS:
            fields[name] = np.asarray(channels.pop(name, np.zeros_like(t)), dtype=float)
        if channels:
            raise TypeError(f"unknown channels: {sorted(channels)}")
        fields["mode"] = fields["mode"].astype(np.int8)
        return cls(t=t, kind=kind, **fields)


@dataclass(frozen=True)
class EnergyLedger:
    input_work: float
    mech_dissipated: float
    diode_loss: float
    converter_loss: float
    shunt_loss: float
    delivered: float
    stored_initial: float
    stored_final: float

    @property
    def sinks(self) -> float:
        return (self.mech_dissipated + self.diode_loss + self.converter_loss
                + self.shunt_loss + self.delivered)

    @property
    def residual(self) -> float:
        return self.input_work - self.sinks - (self.stored_final - self.stored_initial)

    @property
    def relative_residual(self) -> float:
        return abs(self.residual) / self.input_work if self.input_work > 0 else abs(self.residual)


@dataclass(frozen=True)
class SteadyState:
    v_rms: float
    p_avg: float


def run_transient(harvester: LumpedParams, chain: Union[PowerChain, LoadSpec],
                  drive: DriveSpec, cfg: SimConfig) -> Trace:
    """Integrate harvester plus load from rest for ``cfg.duration`` seconds.

    ``chain`` is either a full :class:`PowerChain` or a :class:`LoadSpec`
    placed directly across the piezo terminals.
    """
    limit = 1.0 / (MIN_STEPS_PER_PERIOD * drive.frequency)
    if cfg.dt > limit * (1.0 + 1e-9):
        raise SimConfigError(
            f"dt={cfg.dt:.6g} s exceeds the limit 1/(200 f) = {limit:.6g} s "
            f"for drive frequency {drive.frequency:g} Hz")

    m = harvester.total_mass
    k = harvester.k_eff
    c = harvester.damping
    theta = harvester.theta
    cp = harvester.c_p
    amp = drive.accel_amplitude
    w = drive.omega
    dt = cfg.dt
    n_steps = cfg.n_steps
    stride = int(cfg.record_stride)
    n_rec = n_steps // stride + 1

    is_chain = isinstance(chain, PowerChain)
    if is_chain:
        kind = "chain"
        g = 0.0
        storage = chain.storage
        vd2 = 2.0 * chain.rectifier.diode_drop
        vmax = chain.buck.input_max
        c_in = storage.input_cap
        stage = initial_state(storage)
    else:
        kind = "open" if chain.is_open else "resistive"
        g = chain.conductance
        stage = None
    # trapezoidal (Crank-Nicolson) coefficients for C_p v' = i_src - g v
    cn_den = cp + 0.5 * dt * g
    cn_num = cp - 0.5 * dt * g

    def node_update(v, q, v_in):
        """Piezo node voltage after injecting charge q; also the charge sent into the bridge."""
        if not is_chain:
            return (cn_num * v + q) / cn_den, 0.0
        v_try = v + q / cp
        cond = rectifier_step(v_try, v_in, chain.rectifier)
        if cond is Conduction.BLOCKED:
            return v_try, 0.0
        s = cond.value
        q_rest = q - cp * (s * (v_in + vd2) - v)
        v_in_new = v_in + s * q_rest / (cp + c_in)
        if v_in_new > vmax:
            v_in_new = max(v_in, vmax)
        v_new = s * (v_in_new + vd2)
        return v_new, s * (q - cp * (v_new - v))

    out = {name: np.zeros(n_rec) for name in (
        "t", "x", "xdot", "v_piezo", "v_input_cap", "v_output", "e_stored") + POWER_CHANNELS}
    mode_rec = np.zeros(n_rec, dtype=np.int8)

    x = u = v = 0.0
    acc_e = {"diode": 0.0, "converter": 0.0, "shunt": 0.0, "delivered": 0.0}
    last = dict(acc_e)
    rec = 0

    def record(i, t):
        nonlocal last
        if is_chain:
            led = stage.energy_ledger
            acc_e["diode"] = led.diode_loss
            acc_e["converter"] = led.converter_loss
            acc_e["shunt"] = led.shunt_loss
            acc_e["delivered"] = led.delivered_to_load
            e_elec = led.stored
            out["v_input_cap"][i] = stage.v_input_cap
            out["v_output"][i] = stage.v_output
            mode_rec[i] = _MODE_CODES[stage.mode]
        else:
            e_elec = 0.0
        out["t"][i] = t
        out["x"][i] = x
        out["xdot"][i] = u
        out["v_piezo"][i] = v
        out["p_input"][i] = -m * amp * math.cos(w * t) * u
        out["p_mech"][i] = c * u * u
        span = stride * dt
        if i > 0:
            out["p_diode"][i] = (acc_e["diode"] - last["diode"]) / span
            out["p_converter"][i] = (acc_e["converter"] - last["converter"]) / span
            out["p_shunt"][i] = (acc_e["shunt"] - last["shunt"]) / span
            out["p_delivered"][i] = (acc_e["delivered"] - last["delivered"]) / span
        out["e_stored"][i] = 0.5 * (m * u * u + k * x * x + cp * v * v) + e_elec
        last = dict(acc_e)

    record(0, 0.0)
    inv_m = 1.0 / m
    h2 = 0.5 * dt
    for n in range(1, n_steps + 1):
        t0 = (n - 1) * dt
        if is_chain:
            stage = buck_step(stage, chain, dt)
        v_in = stage.v_input_cap if is_chain else 0.0

        # predict the end-of-step piezo voltage from a Taylor estimate of dx
        a0 = (-m * amp * math.cos(w * t0) - c * u - k * x - theta * v) * inv_m
        v_pred, _ = node_update(v, theta * (u * dt + a0 * h2 * dt), v_in)
        dv = v_pred - v

        # RK4 with the piezo voltage ramping linearly across the step
        tm = t0 + h2
        t1 = t0 + dt
        fm = -m * amp * math.cos(w * tm)
        vm = v + 0.5 * dv
        k1x, k1u = u, a0
        x2, u2 = x + h2 * k1x, u + h2 * k1u
        k2x, k2u = u2, (fm - c * u2 - k * x2 - theta * vm) * inv_m
        x3, u3 = x + h2 * k2x, u + h2 * k2u
        k3x, k3u = u3, (fm - c * u3 - k * x3 - theta * vm) * inv_m
        x4, u4 = x + dt * k3x, u + dt * k3u
        k4x = u4
        k4u = (-m * amp * math.cos(w * t1) - c * u4 - k * x4 - theta * (v + dv)) * inv_m
        x_new = x + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        u = u + dt / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)

        q = theta * (x_new - x)
        x = x_new
        v_new, q_bridge = node_update(v, q, v_in)
        if is_chain:
            if q_bridge > 0:
                stage = charge_input_cap(q_bridge / dt, stage, dt, storage,
                                         chain.rectifier.diode_drop, vmax)
            mode = uvlo_step(stage.mode, stage.v_input_cap, chain.uvlo)
            if mode is not stage.mode:
                stage = type(stage)(mode, stage.v_input_cap, stage.v_output, stage.energy_ledger)
        elif g > 0:
            vmid = 0.5 * (v + v_new)
            acc_e["delivered"] += dt * vmid * vmid * g
        v = v_new

        if n % stride == 0:
            rec += 1
            record(rec, n * dt)

    return Trace(t=out["t"], x=out["x"], xdot=out["xdot"], v_piezo=out["v_piezo"],
                 v_input_cap=out["v_input_cap"], v_output=out["v_output"], mode=mode_rec,
                 p_input=out["p_input"], p_mech=out["p_mech"], p_diode=out["p_diode"],
                 p_converter=out["p_converter"], p_shunt=out["p_shunt"],
                 p_delivered=out["p_delivered"], e_stored=out["e_stored"], kind=kind)


def energy_audit(trace: Trace) -> EnergyLedger:
    """Trapezoidal integral of every power channel plus stored-energy change."""
    if len(trace) == 0:
        raise ValueError("cannot audit an empty trace")

    def integrate(p):
        return float(np.trapezoid(p, trace.t)) if len(trace) > 1 else 0.0

    return EnergyLedger(
        input_work=integrate(trace.p_input),
        mech_dissipated=integrate(trace.p_mech),
        diode_loss=integrate(trace.p_diode),
        converter_loss=integrate(trace.p_converter),
        shunt_loss=integrate(trace.p_shunt),
        delivered=integrate(trace.p_delivered),
        stored_initial=float(trace.e_stored[0]),
        stored_final=float(trace.e_stored[-1]),
    )


def steady_state_metrics(trace: Trace, n_cycles: int, drive_freq: float,
                         channel: Optional[str] = None) -> SteadyState:
    """RMS voltage and mean delivered power over the last ``n_cycles`` periods.

    ``channel`` defaults to the load voltage.  The window is a whole number
    of periods ending at the last sample.
    """
    if n_cycles < 1 or int(n_cycles) != n_cycles:
        raise ValueError("n_cycles must be a positive integer")
    if len(trace) < 2:
        raise ValueError("trace too short for steady-state metrics")
    period = 1.0 / drive_freq
    span = trace.t[-1] - trace.t[0]
    required = 2 * n_cycles * period
    if span < required * (1.0 - 1e-9):
        raise ValueError(
            f"trace spans {span:.6g} s but {n_cycles} cycles need at least {required:.6g} s")
    h = (trace.t[-1] - trace.t[0]) / (len(trace) - 1)
    count = int(round(n_cycles * period / h))
    v = trace.v_load if channel is None else getattr(trace, channel)
    window = slice(len(trace) - count, len(trace))
    v_rms = float(np.sqrt(np.mean(np.square(v[window]))))
    p_avg = float(np.mean(trace.p_delivered[window]))
    return SteadyState(v_rms=v_rms, p_avg=p_avg)
