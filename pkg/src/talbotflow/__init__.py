"""Decoherence in matter-wave Talbot interference with Gaussian slits.

Closed-form propagation of a finite Gaussian-slit grating, off-diagonal
damping of the inter-slit coherences, the resulting density, current and
drift fields, probability-flow streamlines, independent numerical oracles
and scalar diagnostics.
"""

__version__ = "0.1.0"

from .decoherence import (
    FieldGrid,
    FieldSample,
    current,
    density,
    drift_velocity,
    evaluate_grid,
    field_sample,
    transverse_momentum,
)
from .diagnostics import (
    coherence_crossing,
    detect_momentum_plateaus,
    diffraction_order_positions,
    multislit_reference,
    onaxis_profile,
    revival_correlation,
)
from .flow import integrate_ensemble, integrate_streamline, ordering_check, seed_ensemble
from .model import (
    BeamParams,
    DecoherenceParams,
    GratingSpec,
    SimulationGrid,
    TalbotSetup,
    reference_setup,
)
from .wavefield import coherent_density, coherent_wave, mode_amplitude

__all__ = [
    "__version__",
    "BeamParams",
    "GratingSpec",
    "DecoherenceParams",
    "SimulationGrid",
    "TalbotSetup",
    "reference_setup",
    "mode_amplitude",
    "coherent_wave",
    "coherent_density",
    "density",
    "current",
    "drift_velocity",
    "transverse_momentum",
    "field_sample",
    "evaluate_grid",
    "FieldGrid",
    "FieldSample",
    "seed_ensemble",
    "integrate_ensemble",
    "integrate_streamline",
    "ordering_check",
    "coherence_crossing",
    "revival_correlation",
    "diffraction_order_positions",
    "detect_momentum_plateaus",
    "multislit_reference",
    "onaxis_profile",
]
