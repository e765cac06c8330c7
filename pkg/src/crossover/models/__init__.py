"""Concrete RG models and the exact toy-flow oracle."""
from .base import NullModel, RgModel, audit_contract, null_model
from .hier import HierGrid, HierModel, HierPotential, hier_linearization, hier_model, hier_step
from .oracle import ToyFlowParams, compare_orbit, hyper_2f1, smoothness_probe, toy_orbit_mu, toy_orbit_rk4
from .toy import PolyToyModel, poly_toy_model

MODELS = ("null", "toy", "hier")

__all__ = [
    "RgModel",
    "NullModel",
    "null_model",
    "audit_contract",
    "PolyToyModel",
    "poly_toy_model",
    "HierGrid",
    "HierModel",
    "HierPotential",
    "hier_step",
    "hier_linearization",
    "hier_model",
    "ToyFlowParams",
    "hyper_2f1",
    "toy_orbit_mu",
    "toy_orbit_rk4",
    "compare_orbit",
    "smoothness_probe",
    "MODELS",
]
