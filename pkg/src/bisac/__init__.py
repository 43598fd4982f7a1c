"""Joint AoA/AoD estimation for bistatic OFDM sensing.

Modules: ``model`` (scenario and channel simulation), ``csi`` (LS estimation
and coarse timing), ``pencil`` (matrix-pencil estimator), ``cvnn`` (complex
MLP), ``crb`` (Fisher information), ``mle`` (grid-search oracle),
``complexity`` (operation counts) and ``experiments``/``cli`` (harness).
"""
from .errors import BisacError
from .model import ScenarioConfig, TargetPath, generate_pilots, simulate_rx
from .pencil import EstimateSet, PencilConfig, estimate_2d, sense

__all__ = [
    "BisacError", "EstimateSet", "PencilConfig", "ScenarioConfig", "TargetPath",
    "estimate_2d", "generate_pilots", "sense", "simulate_rx",
]
__version__ = "0.1.0"
