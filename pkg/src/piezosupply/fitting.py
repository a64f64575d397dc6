"""Least-squares fitting of lumped parameters to measured targets.

The objective is the weighted sum of squared *relative* errors, minimised
with a bounded Nelder-Mead simplex.  Strictly positive parameters are
searched in log space, so the simplex size reads directly as a relative
parameter change.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence

import numpy as np

from .harvester import STANDARD_GRAVITY, LumpedParams, natural_frequency, phasor_arrays

FITTABLE = ("m_eff", "k_eff", "zeta", "theta", "c_p", "accel_amplitude")


class TargetKind(enum.Enum):
    RESONANT_FREQ_AT_MASS = "resonant_freq_at_mass"
    PEAK_VOLTAGE_AT_MASS = "peak_voltage_at_mass"
    POWER_AT_LOAD = "power_at_load"


@dataclass(frozen=True)
class FitTarget:
    """One measured value and the conditions it was measured under.

    ``frequency`` only matters for power targets; when omitted the power is
    evaluated at the natural frequency for ``tip_mass``.
    """

    kind: TargetKind
    observed: float
    weight: float = 1.0
    tip_mass: float = 0.0
    resistance: Optional[float] = None
    frequency: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", TargetKind(self.kind))
        if not self.weight > 0:
            raise ValueError("target weights must be positive")
        if not (math.isfinite(self.observed) and self.observed != 0):
            raise ValueError("observed values must be finite and non-zero (relative errors)")
        if self.kind is TargetKind.POWER_AT_LOAD and not (self.resistance and self.resistance > 0):
            raise ValueError("power targets need a positive resistance")


@dataclass(frozen=True)
class FitProblem:
    targets: Sequence[FitTarget]
    free_params: Sequence[str]
    bounds: Mapping[str, tuple]
    accel_amplitude: float = STANDARD_GRAVITY

    def __post_init__(self):
        if not self.targets:
            raise ValueError("a fit needs at least one target")
        if not self.free_params:
            raise ValueError("a fit needs at least one free parameter")
        for name in self.free_params:
            if name not in FITTABLE:
                raise ValueError(f"cannot fit {name!r}; choose from {', '.join(FITTABLE)}")
            if name not in self.bounds:
                raise ValueError(f"missing bounds for free parameter {name!r}")
            lo, hi = self.bounds[name]
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise ValueError(f"bounds for {name!r} must be finite with lower < upper")
        if len(set(self.free_params)) != len(self.free_params):
            raise ValueError("free parameters must be distinct")
        free = set(self.free_params)
        if {"theta", "accel_amplitude"} <= free and not any(
                t.kind is TargetKind.POWER_AT_LOAD for t in self.targets):
            raise ValueError(
                "theta and accel_amplitude cannot both be free with voltage-only data: "
                "open-circuit voltage depends on their product; fix one or add power targets")


@dataclass(frozen=True)
class FitOptions:
    xtol: float = 1e-6
    max_evaluations: int = 2000
    initial_step: float = 0.1


@dataclass(frozen=True)
class FitResult:
    params: LumpedParams
    accel_amplitude: float
    residual: float
    initial_residual: float
    iterations: int
    evaluations: int
    converged: bool
    history: tuple = field(default=(), repr=False)


def predict(target: FitTarget, params: LumpedParams, accel: float) -> float:
    p = params.with_tip_mass(target.tip_mass)
    f_n = natural_frequency(p)
    if target.kind is TargetKind.RESONANT_FREQ_AT_MASS:
        return f_n
    if target.kind is TargetKind.PEAK_VOLTAGE_AT_MASS:
        _, v = phasor_arrays(p, accel, f_n, 0.0)
        return float(abs(v))
    f = f_n if target.frequency is None else target.frequency
    _, v = phasor_arrays(p, accel, f, 1.0 / target.resistance)
    return float(abs(v)) ** 2 / (2.0 * target.resistance)


def weighted_residual(problem: FitProblem, params: LumpedParams, accel: float) -> float:
    """Weighted RMS of relative prediction errors."""
    num = den = 0.0
    for t in problem.targets:
        r = predict(t, params, accel) / t.observed - 1.0
        num += t.weight * r * r
        den += t.weight
    return math.sqrt(num / den)


class _Coordinates:
    """Map free parameters to search coordinates and back."""

    def __init__(self, problem: FitProblem):
        self.names = list(problem.free_params)
        self.log = []
        self.lo = []
        self.hi = []
        for name in self.names:
            lo, hi = problem.bounds[name]
            use_log = lo > 0
            self.log.append(use_log)
            if use_log:
                self.lo.append(math.log(lo))
                self.hi.append(math.log(hi))
            else:
                # linear coordinate normalised by the bound width
                self.lo.append(lo / (hi - lo))
                self.hi.append(hi / (hi - lo))
        self.lo = np.array(self.lo)
        self.hi = np.array(self.hi)
        self.width = {n: problem.bounds[n][1] - problem.bounds[n][0] for n in self.names}

    def to_u(self, values):
        return np.array([math.log(v) if lg else v / self.width[n]
                         for v, lg, n in zip(values, self.log, self.names)])

    def from_u(self, u):
        return [math.exp(x) if lg else x * self.width[n]
                for x, lg, n in zip(u, self.log, self.names)]

    def project(self, u):
        return np.clip(u, self.lo, self.hi)


def _apply(init: LumpedParams, accel: float, names, values):
    fields = dict(zip(names, values))
    accel = fields.pop("accel_amplitude", accel)
    return replace(init, **fields), accel


def fit_params(problem: FitProblem, init: LumpedParams,
               options: FitOptions = FitOptions()) -> FitResult:
    """Minimise the relative-error objective with a box-projected simplex.

    Stops when the simplex diameter (max-norm, in search coordinates) falls
    below ``options.xtol`` or after ``options.max_evaluations`` objective
    calls.
    """
    coords = _Coordinates(problem)
    start = [problem.accel_amplitude if n == "accel_amplitude" else getattr(init, n)
             for n in coords.names]
    for name, value in zip(coords.names, start):
        lo, hi = problem.bounds[name]
        if not lo <= value <= hi:
            raise ValueError(f"initial {name}={value!r} lies outside bounds [{lo}, {hi}]")

    evaluations = 0

    def objective(u):
        nonlocal evaluations
        evaluations += 1
        try:
            p, a = _apply(init, problem.accel_amplitude, coords.names, coords.from_u(u))
        except ValueError:
            return math.inf
        r = weighted_residual(problem, p, a)
        return r * r

    n = len(coords.names)
    history = []
    iterations = 0

    def simplex_search(u0, f0):
        nonlocal iterations
        simplex = [u0]
        for j in range(n):
            u = u0.copy()
            step = options.initial_step if coords.log[j] else options.initial_step * 0.1
            u[j] += step
            if u[j] > coords.hi[j]:
                u[j] = u0[j] - step
            simplex.append(coords.project(u))
        simplex = np.array(simplex)
        fvals = np.array([f0] + [objective(u) for u in simplex[1:]])
        while True:
            order = np.argsort(fvals, kind="stable")
            simplex, fvals = simplex[order], fvals[order]
            history.append(float(fvals[0]))
            if np.max(np.abs(simplex[1:] - simplex[0])) < options.xtol:
                return simplex[0], fvals[0], True
            if evaluations >= options.max_evaluations:
                return simplex[0], fvals[0], False
            iterations += 1
            centroid = simplex[:-1].mean(axis=0)
            worst = simplex[-1]
            xr = coords.project(centroid + (centroid - worst))
            fr = objective(xr)
            if fr < fvals[0]:
                xe = coords.project(centroid + 2.0 * (centroid - worst))
                fe = objective(xe)
                if fe < fr:
                    simplex[-1], fvals[-1] = xe, fe
                else:
                    simplex[-1], fvals[-1] = xr, fr
                continue
            if fr < fvals[-2]:
                simplex[-1], fvals[-1] = xr, fr
                continue
            if fr < fvals[-1]:
                xc = coords.project(centroid + 0.5 * (xr - centroid))
                fc = objective(xc)
                if fc <= fr:
                    simplex[-1], fvals[-1] = xc, fc
                    continue
            else:
                xc = coords.project(centroid + 0.5 * (worst - centroid))
                fc = objective(xc)
                if fc < fvals[-1]:
                    simplex[-1], fvals[-1] = xc, fc
                    continue
            # shrink toward the best vertex
            for i in range(1, n + 1):
                simplex[i] = simplex[0] + 0.5 * (simplex[i] - simplex[0])
                fvals[i] = objective(simplex[i])

    u_best = coords.to_u(start)
    f_best = objective(u_best)
    initial = f_best
    # a collapsed simplex can stall short of the minimum; restart from the
    # best vertex until a fresh simplex no longer moves it
    while True:
        u_new, f_new, converged = simplex_search(u_best, f_best)
        moved = np.max(np.abs(u_new - u_best)) >= options.xtol
        u_best, f_best = u_new, f_new
        if not (converged and moved):
            break

    params, accel = _apply(init, problem.accel_amplitude, coords.names, coords.from_u(u_best))
    return FitResult(
        params=params,
        accel_amplitude=accel,
        residual=math.sqrt(float(f_best)),
        initial_residual=math.sqrt(initial),
        iterations=iterations,
        evaluations=evaluations,
        converged=converged,
        history=tuple(math.sqrt(h) for h in history),
    )


def default_bounds(init: LumpedParams, accel: float = STANDARD_GRAVITY, span: float = 10.0):
    """Bounds a factor ``span`` either side of the initial values."""
    bounds = {}
    for name in FITTABLE:
        value = accel if name == "accel_amplitude" else getattr(init, name)
        if name == "zeta":
            bounds[name] = (max(value / span, 1e-5), min(value * span, 0.99))
        elif value > 0:
            bounds[name] = (value / span, value * span)
        else:
            bounds[name] = (0.0, 1.0)
    return bounds
