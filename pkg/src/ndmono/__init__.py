"""Exact Neumann-to-Dirichlet matrices for ball inclusions in the unit disk,
and linear vs non-linear monotonicity reconstructions built on them."""
from .compare import DiffReport, diff
from .engine import (
    HexTiling,
    MonotonicityReconstructor,
    ReconConfig,
    ReconResult,
    beta_values,
    hex_tiling,
    reconstruct,
    reg_alpha,
    test_cell_linear,
    test_cell_nonlinear,
)
from .fem import mesh_disk, nd_matrix_fem, nd_matrix_fem_corrected, solve_neumann
from .mobius import (
    Ball,
    MobiusParams,
    ball_to_concentric,
    boundary_angle_map,
    boundary_jacobian,
    concentric_to_ball,
    mobius_apply,
)
from .noise import NoiseSpec, make_noise, operator_norm
from .phantom import BallShape, Phantom, PolygonShape, builtin_phantom, load_phantom
from .spectral import (
    SpectralMatrix,
    TruncationPlan,
    assemble_h_plus,
    assemble_h_quadrature,
    background_nd,
    concentric_eigenvalues,
    frechet_ball,
    involution_residual,
    nd_ball,
)

__version__ = "0.1.0"
