import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from piezosupply.harvester import (
    GRAM,
    DriveSpec,
    LoadSpec,
    LumpedParams,
    Wiring,
    bimorph_adjust,
    natural_frequency,
    optimal_load,
)
from piezosupply.presets import S128, S233, get_preset
from piezosupply.sweeps import (
    AbscissaKind,
    SweepCurve,
    ValueKind,
    find_resonance,
    frequency_grid,
    frequency_sweep,
    load_sweep,
    mass_frequency_curve,
    tip_mass_study,
)

from oracles import damped_peak_frequency

S128_PARAMS = get_preset(S128).params


def resonance_curve(f_n, zeta, grid):
    w_n = 2 * np.pi * f_n
    w = 2 * np.pi * grid
    return SweepCurve(AbscissaKind.FREQUENCY_HZ, ValueKind.VOLT_AMPLITUDE, grid,
                      1.0 / np.abs(w_n ** 2 - w ** 2 + 2j * zeta * w_n * w))


class TestFrequencySweep:
    def test_grid_count(self):
        assert len(frequency_grid(16, 500, 2)) == 243
        curve = frequency_sweep(S128_PARAMS, 9.81, 16, 500, 2)
        assert len(curve) == 243
        assert curve.abscissa[-1] == 500

    def test_invalid_grid(self):
        for args in ((0, 500, 2), (500, 16, 2), (16, 500, 0)):
            with pytest.raises(ValueError):
                frequency_grid(*args)

    def test_peak_at_100hz(self):
        curve = frequency_sweep(S128_PARAMS, 9.81, 16, 500, 2)
        assert find_resonance(curve).frequency == pytest.approx(100.0, abs=2.0)

    def test_linear_in_drive(self):
        a = frequency_sweep(S128_PARAMS, 9.81, 16, 500, 2)
        b = frequency_sweep(S128_PARAMS, 19.62, 16, 500, 2)
        np.testing.assert_allclose(b.values, 2 * a.values, rtol=1e-12)

    def test_resistive_gives_power(self):
        curve = frequency_sweep(S128_PARAMS, 9.81, 150, 200, 2, LoadSpec(1e4))
        assert curve.value_kind is ValueKind.AVG_POWER


class TestFindResonance:
    def test_synthetic_176hz(self):
        grid = np.arange(100.0, 260.0, 2.0)
        curve = resonance_curve(176.0, 0.02, grid)
        target = damped_peak_frequency(176.0, 0.02)
        assert find_resonance(curve).frequency == pytest.approx(176.0, abs=2.0)
        assert find_resonance(curve).frequency == pytest.approx(target, abs=2.0)

    @pytest.mark.parametrize("offset", [0.0, 0.5, 1.0, 1.5])
    def test_analytic_peak(self, offset):
        grid = np.arange(50.0 + offset, 150.0, 2.0)
        res = find_resonance(resonance_curve(100.0, 0.02, grid))
        assert res.frequency == pytest.approx(damped_peak_frequency(100.0, 0.02), abs=2.0)
        assert not res.at_boundary

    def test_parabolic_refinement_exact_for_parabola(self):
        x = np.arange(0.0, 10.0, 1.0) + 1.0
        curve = SweepCurve("frequency_hz", "avg_power", x, 10 - (x - 4.3) ** 2)
        assert find_resonance(curve).frequency == pytest.approx(4.3, abs=1e-12)

    def test_boundary(self):
        x = np.arange(10.0, 20.0)
        res = find_resonance(SweepCurve("frequency_hz", "volt_amplitude", x, x))
        assert res == (19.0, 19.0, True)

    def test_tie_goes_low(self):
        x = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
        y = np.array([0.0, 1.0, 0.0, 1.0, 0.0])
        assert find_resonance(SweepCurve("frequency_hz", "avg_power", x, y)).frequency == 2.0

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            find_resonance(SweepCurve("frequency_hz", "avg_power", [1.0, 2.0], [1.0, 2.0]))

    def test_wrong_kind(self):
        with pytest.raises(ValueError):
            find_resonance(SweepCurve("tip_mass_kg", "resonant_freq", [0, 1, 2], [3, 2, 1]))

    @given(scale=st.floats(1e-6, 1e6), f_n=st.floats(40, 400))
    def test_scale_invariant(self, scale, f_n):
        curve = resonance_curve(f_n, 0.03, np.arange(16.0, 500.0, 2.0))
        assert find_resonance(curve.scaled(scale)).frequency == \
            pytest.approx(find_resonance(curve).frequency, rel=1e-9)


class TestLoadSweep:
    GRID = np.logspace(2, 7, 200)

    def test_unimodal_and_matches_optimal_load(self):
        for params in (S128_PARAMS, get_preset(S233).params,
                       bimorph_adjust(S128_PARAMS, Wiring.PARALLEL)):
            f = natural_frequency(params)
            curve = load_sweep(params, DriveSpec(9.81, f), self.GRID)
            signs = np.sign(np.diff(curve.values))
            assert np.count_nonzero(np.diff(signs)) <= 1
            best = self.GRID[int(np.argmax(curve.values))]
            ratio = self.GRID[1] / self.GRID[0]
            assert best / ratio <= optimal_load(params, f) <= best * ratio

    def test_single_point(self):
        curve = load_sweep(S128_PARAMS, DriveSpec(9.81, 100.0), [1e4])
        assert len(curve) == 1

    @pytest.mark.parametrize("rs", [[1e4, 1e3], [0.0, 1e3], [-1.0], [], [1e3, 1e3]])
    def test_rejects_bad_resistances(self, rs):
        with pytest.raises(ValueError):
            load_sweep(S128_PARAMS, DriveSpec(9.81, 100.0), rs)


class TestTipMassStudy:
    MASSES = [0.0, 0.6 * GRAM, 1.0 * GRAM, 1.5 * GRAM]

    def test_measured_frequencies(self):
        rows = tip_mass_study(S128_PARAMS, [1.0 * GRAM, 1.5 * GRAM])
        assert rows[0].resonant_freq == pytest.approx(100.0, rel=0.01)
        assert rows[1].resonant_freq == pytest.approx(90.0, rel=0.01)

    def test_trends(self):
        rows = tip_mass_study(S128_PARAMS, self.MASSES)
        assert all(b.resonant_freq < a.resonant_freq for a, b in zip(rows, rows[1:]))
        assert all(b.peak_voltage > a.peak_voltage for a, b in zip(rows, rows[1:]))

    def test_duplicates(self):
        with pytest.raises(ValueError):
            tip_mass_study(S128_PARAMS, [1e-3, 1e-3])

    def test_sorted_output(self):
        rows = tip_mass_study(S128_PARAMS, [1.5e-3, 0.0, 1e-3])
        assert [r.tip_mass for r in rows] == [0.0, 1e-3, 1.5e-3]
        curve = mass_frequency_curve(rows)
        assert curve.abscissa_kind is AbscissaKind.TIP_MASS_KG

    @settings(max_examples=100, deadline=None)
    @given(m_eff=st.floats(1e-4, 1e-2), k=st.floats(50, 5e3), zeta=st.floats(0.005, 0.3),
           theta=st.one_of(st.just(0.0), st.floats(1e-8, 1e-2)), c_p=st.floats(1e-9, 1e-6))
    def test_trends_hold_for_random_params(self, m_eff, k, zeta, theta, c_p):
        params = LumpedParams(m_eff, k, zeta, theta, c_p)
        rows = tip_mass_study(params, self.MASSES)
        assert all(b.resonant_freq < a.resonant_freq for a, b in zip(rows, rows[1:]))
        if theta > 0:
            assert all(b.peak_voltage > a.peak_voltage for a, b in zip(rows, rows[1:]))


class TestSweepCurve:
    def test_invariants(self):
        with pytest.raises(ValueError):
            SweepCurve("frequency_hz", "avg_power", [], [])
        with pytest.raises(ValueError):
            SweepCurve("frequency_hz", "avg_power", [2.0, 1.0], [1.0, 1.0])
        with pytest.raises(ValueError):
            SweepCurve("frequency_hz", "avg_power", [1.0, 2.0], [1.0, math.nan])

    def test_immutable(self):
        c = SweepCurve("frequency_hz", "avg_power", [1.0, 2.0], [1.0, 2.0])
        with pytest.raises(ValueError):
            c.values[0] = 5.0
