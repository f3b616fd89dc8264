"""Structured least squares for Vandermonde-Khatri-Rao matrices.

Solves ``min ||(W x I)(g - S alpha)||`` where block row ``i`` of ``S`` is
``R diag(lam)**i``, by normal equations, a conditioning-driven decision
tree, corrected semi-normal equations or a recursive structured QR
factorization, and provides a DMD front-end that produces such problems
from snapshot data.
"""

from .dense import (
    PivotedQR,
    QFactors,
    apply_q,
    apply_q_adjoint,
    cholesky_upper,
    cond2,
    eig_small,
    equilibrate_columns,
    equilibrate_rows,
    givens,
    householder_qr,
    jacobi_svd,
    pivoted_qr,
    tri_solve,
)
from .dmd import (
    RitzOutput,
    SnapshotPair,
    amplitudes_full,
    build_polish_inputs,
    ddmd_rrr,
    dmd,
    reconstruct,
)
from .errors import (
    ConvergenceError,
    DimensionError,
    NonpositiveDiagonalError,
    NotConjugateClosedError,
    NotPositiveDefiniteError,
    RankDeficientBasisError,
    SingularTriangularError,
    VkrlsError,
    ZeroColumnError,
    ZeroRowError,
)
from .kernels import BACKEND
from .normal import (
    DEFAULT_TOL,
    condition_report,
    decision_tree_solve,
    polish,
    scaled_condition,
    solve_ne,
)
from .qrkr import (
    OpCounter,
    RecursiveQRTrace,
    real_recursive_qr,
    real_recursive_qr_with_rhs,
    recursive_qr_general,
    recursive_qr_general_with_rhs,
    recursive_qr_pow2,
    recursive_qr_pow2_with_rhs,
    stacked_qr,
    stacked_qr_blocked,
    stacked_qr_givens,
    stacked_qr_householder,
)
from .report import ConditionReport, Method, SolveReport
from .solvers import (
    corrected_seminormal,
    objective,
    qr_solve,
    rank_revealing_solve,
    real_qr_solve,
    seminormal_solve,
)
from .structure import (
    LSProblem,
    RealSpectralForm,
    SpectralModel,
    build_S,
    gram_C,
    khatri_rao,
    kr_permutation,
    real_transform,
    rhs_vector,
    vandermonde,
)

__version__ = "0.1.0"
