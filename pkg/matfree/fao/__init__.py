"""Forward-adjoint oracles and the DAGs built from them."""

from .atoms import (
    Copy,
    DenseMatrix,
    Identity,
    LowRankMatrix,
    Mat,
    MatrixProduct,
    PrngMatrix,
    ScalarMult,
    SingularMatrixError,
    SparseMatrix,
    Split,
    Sum,
    SumEntries,
    TriangularSolve,
    Vec,
    VStack,
    ZeroMap,
    make_copy,
    make_matrix_mult,
    make_matrix_product,
    make_prng_matrix,
    make_split,
    make_sum,
    make_tri_solve,
    make_vec_mat,
    make_vstack,
)
from .base import AdjointFao, Fao, apply_adjoint, apply_forward
from .dag import (
    DagValidationError,
    FaoDag,
    ValidationReport,
    adjoint,
    ready_order,
    structurally_equal,
    to_dot,
    validate,
)
from .evaluate import DagEvaluator, DagOperator, PlanMismatchError, evaluate, materialize
from .memory import MemoryPlan, conflict_pairs, plan_memory, verify_plan
from .rewrite import optimize
from .shapes import DimensionError, Shape
from .transforms import (
    Convolution,
    Dft,
    Dwt,
    UnsupportedLengthError,
    make_conv,
    make_dft,
    make_dwt,
)

__all__ = [
    "AdjointFao",
    "Convolution",
    "Copy",
    "DagEvaluator",
    "DagOperator",
    "DagValidationError",
    "DenseMatrix",
    "Dft",
    "DimensionError",
    "Dwt",
    "Fao",
    "FaoDag",
    "Identity",
    "LowRankMatrix",
    "Mat",
    "MatrixProduct",
    "MemoryPlan",
    "PlanMismatchError",
    "PrngMatrix",
    "ScalarMult",
    "Shape",
    "SingularMatrixError",
    "SparseMatrix",
    "Split",
    "Sum",
    "SumEntries",
    "TriangularSolve",
    "UnsupportedLengthError",
    "ValidationReport",
    "Vec",
    "VStack",
    "ZeroMap",
    "adjoint",
    "apply_adjoint",
    "apply_forward",
    "conflict_pairs",
    "evaluate",
    "make_conv",
    "make_copy",
    "make_dft",
    "make_dwt",
    "make_matrix_mult",
    "make_matrix_product",
    "make_prng_matrix",
    "make_split",
    "make_sum",
    "make_tri_solve",
    "make_vec_mat",
    "make_vstack",
    "materialize",
    "optimize",
    "plan_memory",
    "ready_order",
    "structurally_equal",
    "to_dot",
    "validate",
    "verify_plan",
]
