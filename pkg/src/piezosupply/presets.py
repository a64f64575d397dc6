"""Built-in device presets for the two tested Mide cantilevers."""
from __future__ import annotations

from dataclasses import dataclass

from .harvester import (
    GRAM,
    MM,
    BeamKind,
    BeamSpec,
    LumpedParams,
    Wiring,
    bimorph_adjust,
    lumped_from_resonance_pair,
)

S128 = "S128-H5FR-1107YB"
S233 = "S233-H5FR-1107XB"

# resonance pair measured on the S128 unimorph: 1.0 g -> 100 Hz, 1.5 g -> 90 Hz
S128_RESONANCES = ((1.0 * GRAM, 100.0), (1.5 * GRAM, 90.0))


@dataclass(frozen=True)
class Preset:
    name: str
    beam: BeamSpec
    params: LumpedParams


def _s128_beam(kind=BeamKind.UNIMORPH):
    return BeamSpec(
        kind=kind,
        total_length=53.0 * MM,
        width=20.8 * MM,
        thickness=0.71 * MM,
        piezo_length=27.8 * MM,
        piezo_width=18.0 * MM,
        piezo_thickness=0.19 * MM,
        beam_mass=2.0 * GRAM,
    )


def _s128_params():
    m_eff, k_eff = lumped_from_resonance_pair(*S128_RESONANCES)
    return LumpedParams(m_eff=m_eff, k_eff=k_eff, tip_mass=1.0 * GRAM)


def get_preset(name: str) -> Preset:
    """Return the named preset.

    The S233 bimorph has no published geometry beyond its layer count, so it
    reuses the S128 outline and mechanics with two series-wired layers.
    """
    if name == S128:
        return Preset(S128, _s128_beam(), _s128_params())
    if name == S233:
        return Preset(S233, _s128_beam(BeamKind.BIMORPH),
                      bimorph_adjust(_s128_params(), Wiring.SERIES))
    raise KeyError(f"unknown preset {name!r}; known: {S128}, {S233}")


PRESET_NAMES = (S128, S233)
