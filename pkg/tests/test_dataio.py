import io
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from piezosupply.dataio import (
    CsvFormatError,
    emit_curve,
    emit_trace,
    parse_sweep_csv,
    svg_plot,
)
from piezosupply.harvester import GRAM, DriveSpec, LoadSpec
from piezosupply.presets import S128, get_preset
from piezosupply.sweeps import AbscissaKind, SweepCurve, ValueKind, frequency_sweep
from piezosupply.transient import SimConfig, run_transient

PARAMS = get_preset(S128).params

# values with at most 9 significant digits survive the CSV format unchanged
nine_digit = st.integers(-999_999_999, 999_999_999).flatmap(
    lambda m: st.integers(-12, 6).map(lambda e: float(f"{m}e{e}")))


class TestParse:
    def test_voltage_curve(self):
        sweep = parse_sweep_csv(io.StringIO("frequency_hz,voltage_v\n100,26.9\n110,20.0"))
        c = sweep.curve
        assert (c.abscissa_kind, c.value_kind) == (AbscissaKind.FREQUENCY_HZ, ValueKind.VOLT_AMPLITUDE)
        assert c.points == [(100.0, 26.9), (110.0, 20.0)]

    def test_single_point_load_curve(self):
        c = parse_sweep_csv("resistance_ohm,power_w\n10000,0.0002").curve
        assert len(c) == 1 and c.abscissa_kind is AbscissaKind.RESISTANCE_OHM

    def test_tip_mass_in_grams(self):
        sweep = parse_sweep_csv("# device: S128\ntip_mass_g,frequency_hz\n1.0,100\n1.5,90\n")
        assert sweep.curve.abscissa.tolist() == [1.0 * GRAM, 1.5 * GRAM]
        assert sweep.device == "S128"

    def test_metadata(self):
        sweep = parse_sweep_csv("# tip_mass_g: 1.5\nfrequency_hz,voltage_v\n90,26.9\n")
        assert sweep.tip_mass == pytest.approx(1.5 * GRAM)

    def test_wrong_header(self):
        with pytest.raises(CsvFormatError, match="header"):
            parse_sweep_csv("freq,volt\n100,1\n")

    def test_missing_header(self):
        with pytest.raises(CsvFormatError):
            parse_sweep_csv("# only a comment\n")

    def test_non_numeric_row_number(self):
        with pytest.raises(CsvFormatError, match="row 3"):
            parse_sweep_csv("frequency_hz,voltage_v\n100,1\n110,abc\n")

    def test_duplicate_abscissa(self):
        with pytest.raises(CsvFormatError, match="duplicate"):
            parse_sweep_csv("frequency_hz,voltage_v\n100,1\n100,2\n")

    def test_unsorted_rows_warn(self):
        with pytest.warns(UserWarning, match="sorted"):
            c = parse_sweep_csv("frequency_hz,voltage_v\n110,2\n100,1\n").curve
        assert c.points == [(100.0, 1.0), (110.0, 2.0)]


class TestEmit:
    CURVE = SweepCurve(AbscissaKind.FREQUENCY_HZ, ValueKind.VOLT_AMPLITUDE,
                       [98.0, 100.0, 102.0], [1.5, 2.25, 1.75])

    def test_three_points_four_lines(self):
        text = emit_curve(self.CURVE)
        assert text.endswith("\n")
        assert text.splitlines() == ["frequency_hz,voltage_v", "98,1.5", "100,2.25", "102,1.75"]

    def test_nine_significant_digits(self):
        c = SweepCurve("frequency_hz", "volt_amplitude", [1.0], [1 / 3])
        assert emit_curve(c).splitlines()[1] == "1,0.333333333"

    def test_metadata_lines(self):
        text = emit_curve(self.CURVE, metadata={"generated_by": "piezosupply 0.1.0"})
        assert text.splitlines()[0] == "# generated_by: piezosupply 0.1.0"
        assert parse_sweep_csv(text).metadata["generated_by"] == "piezosupply 0.1.0"

    def test_unknown_format(self):
        with pytest.raises(ValueError):
            emit_curve(self.CURVE, "png")

    def test_svg_deterministic(self):
        a = emit_curve(self.CURVE, "svg")
        b = emit_curve(SweepCurve(AbscissaKind.FREQUENCY_HZ, ValueKind.VOLT_AMPLITUDE,
                                  [98.0, 100.0, 102.0], [1.5, 2.25, 1.75]), "svg")
        assert a.encode() == b.encode()
        assert a.count("<polyline") == 1
        assert 'viewBox="0 0 800 600"' in a
        assert "Frequency [Hz]" in a and "Voltage amplitude [V]" in a

    def test_svg_flat_and_single_point(self):
        assert "<polyline" in svg_plot([1.0], [2.0], "x", "y")
        assert "<polyline" in svg_plot([1.0, 2.0, 3.0], [5.0, 5.0, 5.0], "x", "y")

    def test_svg_escapes_labels(self):
        assert "a &lt; b" in svg_plot([1.0, 2.0], [1.0, 2.0], "a < b", "y")

    def test_trace_csv(self):
        trace = run_transient(PARAMS, LoadSpec(1e4), DriveSpec(9.81, 100.0),
                              SimConfig.for_drive(100.0, 200, 2))
        text = emit_trace(trace)
        assert len(text.splitlines()) == len(trace) + 1
        assert emit_trace(trace, "svg") == emit_trace(trace, "svg")


class TestRoundTrip:
    @pytest.mark.parametrize("kinds", [
        (AbscissaKind.FREQUENCY_HZ, ValueKind.VOLT_AMPLITUDE),
        (AbscissaKind.FREQUENCY_HZ, ValueKind.AVG_POWER),
        (AbscissaKind.RESISTANCE_OHM, ValueKind.AVG_POWER),
        (AbscissaKind.TIP_MASS_KG, ValueKind.RESONANT_FREQ),
    ])
    @given(data=st.data())
    def test_identity(self, kinds, data):
        xs = sorted(set(data.draw(st.lists(nine_digit.filter(lambda v: v > 0), min_size=1, max_size=30))))
        ys = data.draw(st.lists(nine_digit, min_size=len(xs), max_size=len(xs)))
        if kinds[0] is AbscissaKind.TIP_MASS_KG:
            xs = [x / 1000.0 for x in xs]
        curve = SweepCurve(kinds[0], kinds[1], xs, ys)
        back = parse_sweep_csv(emit_curve(curve)).curve
        assert back.abscissa_kind is curve.abscissa_kind and back.value_kind is curve.value_kind
        assert np.array_equal(back.abscissa, curve.abscissa)
        assert np.array_equal(back.values, curve.values)

    def test_computed_sweep_is_stable_after_one_pass(self):
        curve = frequency_sweep(PARAMS, 9.81)
        once = emit_curve(curve)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            again = emit_curve(parse_sweep_csv(once).curve)
        assert once == again
        back = parse_sweep_csv(once).curve
        np.testing.assert_allclose(back.values, curve.values, rtol=1e-8)
