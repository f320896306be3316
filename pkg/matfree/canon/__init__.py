"""Canonicalization of DCP problems into matrix-free cone programs."""

from .affine import CanonicalizationError, constant_part, evaluate_constant, linear_part
from .conic import DcpError, conic_form
from .feasibility import constraint_violation, evaluate_expr, max_violation, objective_value
from .graph import graph_repr
from .matrix import coefficient_maps, matrix_coeff, matrix_repr
from .program import ConeProgram, canonicalize, manifest

__all__ = [
    "CanonicalizationError",
    "ConeProgram",
    "DcpError",
    "canonicalize",
    "coefficient_maps",
    "conic_form",
    "constant_part",
    "constraint_violation",
    "evaluate_constant",
    "evaluate_expr",
    "graph_repr",
    "linear_part",
    "manifest",
    "matrix_coeff",
    "matrix_repr",
    "max_violation",
    "objective_value",
]
