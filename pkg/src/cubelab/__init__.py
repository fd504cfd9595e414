"""Dynamical cubes on concrete minimal flows: cube spaces, face and total actions,
RP^[d] witness search, orbit-closure sampling and finite semigroup audits."""

__version__ = "0.1.0"

from .cube_index import CubePoint, StarPoint, SubsetIndex, make_diagonal, split, join
from .actions import FaceElement, TotalElement, face_apply, diag_apply, total_apply, recursion_check
from .systems import FinitePerm, SkewProduct, Sturmian, TorusRotation, cyclic, system_from_config
from .semigroup import closure, minimal_left_ideals, idempotents, check_uv_identity
from .rp_search import SearchBudget, WitnessRecord, rp_witness, rp_witness_strengthened

__all__ = [
    "CubePoint",
    "StarPoint",
    "SubsetIndex",
    "make_diagonal",
    "split",
    "join",
    "FaceElement",
    "TotalElement",
    "face_apply",
    "diag_apply",
    "total_apply",
    "recursion_check",
    "FinitePerm",
    "SkewProduct",
    "Sturmian",
    "TorusRotation",
    "cyclic",
    "system_from_config",
    "closure",
    "minimal_left_ideals",
    "idempotents",
    "check_uv_identity",
    "SearchBudget",
    "WitnessRecord",
    "rp_witness",
    "rp_witness_strengthened",
]
