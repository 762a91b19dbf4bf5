"""Noisy three-qubit interference circuits and topological invariants
for a chiral p-wave superconductor on a torus mesh."""

__version__ = "0.1.0"

from . import backend, circuit, invariants, measure, model, sim  # noqa: E402
from .invariants import MeshGrid, OverlapField, chern, egp, zak_phase, \
    zak_winding  # noqa: E402
from .model import Band, ModelParams  # noqa: E402

__all__ = [
    "__version__", "backend", "circuit", "invariants", "measure", "model",
    "sim", "MeshGrid", "OverlapField", "chern", "egp", "zak_phase",
    "zak_winding", "Band", "ModelParams",
]
