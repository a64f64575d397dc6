import pytest
from hypothesis import given
from hypothesis import strategies as st

from piezosupply.config import ConfigError, InvalidChoiceError, SystemConfig, load_config
from piezosupply.harvester import GRAM, MM, BeamKind, natural_frequency
from piezosupply.presets import S128, S233

S128_DIMS_MM = {
    "total_length": 53.0, "width": 20.8, "thickness": 0.71,
    "piezo_length": 27.8, "piezo_width": 18.0, "piezo_thickness": 0.19,
}


class TestPresets:
    def test_s128_dimensions_exact(self):
        beam = load_config(f"preset = {S128}\n").beam
        for name, mm in S128_DIMS_MM.items():
            assert getattr(beam, name) == mm * MM
        assert beam.beam_mass == 2.0 * GRAM
        assert beam.kind is BeamKind.UNIMORPH

    def test_s233_is_bimorph(self):
        cfg = load_config(f"preset = {S233}")
        assert cfg.beam.kind is BeamKind.BIMORPH
        assert cfg.beam.total_length == 53.0 * MM

    def test_empty_defaults_to_s128(self):
        cfg = load_config("")
        assert cfg.preset == S128
        assert natural_frequency(cfg.params) == pytest.approx(100.0, rel=1e-9)

    def test_unknown_preset(self):
        with pytest.raises(InvalidChoiceError):
            load_config("preset = S999")


class TestParsing:
    def test_units_converted(self):
        cfg = load_config(
            "# device\n"
            "preset = S128-H5FR-1107YB\n"
            "model.tip_mass_g = 1.5  # trailing comment\n"
            "model.c_p_nf = 47\n"
            "storage.input_cap_uf = 10\n"
            "storage.output_cap_uf = 22\n"
            "buck.max_output_current_ma = 50\n"
        )
        assert cfg.params.tip_mass == 1.5 * GRAM
        assert cfg.params.c_p == pytest.approx(47e-9)
        assert cfg.storage.input_cap == pytest.approx(10e-6)
        assert cfg.buck.max_output_current == pytest.approx(50e-3)
        assert natural_frequency(cfg.params) == pytest.approx(90.0, rel=1e-9)

    def test_setpoint_accepted(self):
        assert load_config("buck.output_setpoint_v = 3.6").buck.output_setpoint == 3.6

    def test_setpoint_invalid_choice(self):
        with pytest.raises(InvalidChoiceError) as info:
            load_config("\nbuck.output_setpoint_v = 3.0\n")
        assert "1.8, 2.5, 3.3, 3.6" in str(info.value)
        assert info.value.line == 2

    def test_negative_thickness(self):
        with pytest.raises(ConfigError) as info:
            load_config("preset = S128-H5FR-1107YB\nbeam.thickness_mm = -1\n")
        assert info.value.line == 2
        assert str(info.value).startswith("line 2:")

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="line 1:.*unknown"):
            load_config("beam.colour = red")

    def test_non_numeric(self):
        with pytest.raises(ConfigError) as info:
            load_config("drive.accel_m_s2 = 9.81\ndrive.frequency_hz = fast\n")
        assert info.value.line == 2

    def test_duplicate_key(self):
        with pytest.raises(ConfigError) as info:
            load_config("model.zeta = 0.02\nmodel.zeta = 0.03\n")
        assert info.value.line == 2

    def test_cross_field_error_has_line(self):
        with pytest.raises(ConfigError) as info:
            load_config("uvlo.rising_v = 3.0\nuvlo.falling_v = 3.5\n")
        assert info.value.line == 2

    def test_open_load(self):
        assert load_config("load.resistance_ohm = open").load.is_open
        assert load_config("load.resistance_ohm = 22000").load.resistance == 22000.0

    def test_sweep_and_fit_settings(self):
        cfg = load_config("sweep.tip_masses_g = 0, 1, 2\nfit.bounds.m_eff = 0.0005, 0.005\n")
        assert cfg.sweep.tip_masses == (0.0, 1.0 * GRAM, 2.0 * GRAM)
        assert cfg.fit_bounds["m_eff"] == (0.0005, 0.005)

    def test_power_chain_needs_storage(self):
        with pytest.raises(ConfigError):
            load_config("load.resistance_ohm = 22000").power_chain()

    @given(st.text(max_size=200))
    def test_total(self, text):
        # every input yields a config or a located diagnostic
        try:
            cfg = load_config(text)
        except ConfigError:
            return
        assert isinstance(cfg, SystemConfig)
