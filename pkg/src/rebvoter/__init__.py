"""Simulation and analysis of the rebellious voter model and its interface particle systems."""
from .models import (
    Family,
    FlipEvent,
    ModelSpec,
    ParticleMenu,
    Representation,
    RingConfig,
    apply_flip,
    dual_of,
    interface_of,
    particle_menu,
    spin_flip_rate,
    transitions_at,
)
from .observables import Curve, CurvePoint, Pattern, g_block

__version__ = "0.1.0"

__all__ = [
    "Curve", "CurvePoint", "Family", "FlipEvent", "ModelSpec", "ParticleMenu", "Pattern",
    "Representation", "RingConfig", "apply_flip", "dual_of", "g_block", "interface_of",
    "particle_menu", "spin_flip_rate", "transitions_at",
]
