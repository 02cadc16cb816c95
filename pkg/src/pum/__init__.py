"""Meshfree radial-basis-function partition-of-unity solver for the Poisson
problem, with collocation and least-squares formulations and a benchmark
harness for convergence, stability-norm, oversampling, and timing studies."""

from . import backend
from .cover import (CoverageError, PatchCover, WeightEval, build_cover,
                    shepard_weights, wendland)
from .geometry import (Ball3D, BoundarySample, Box, Domain, PolarStar2D,
                       Polygon2D, RadialStar3D, load_polygon, save_polygon,
                       standard_domain)
from .kernels import (ConditioningError, DiffMatrix, Kernel,
                      LocalFactorization, diff_matrix, factorize_local,
                      kernel_derivative, kernel_matrix)
from .problems import (DEFAULT_EPS, PROBLEM_IDS, ManufacturedProblem,
                       fd_laplacian, manufactured)
from .sampling import (NodeSet, OversamplingPlan, cartesian_nodes,
                       fill_distance, halton, halton_in_domain, halton_nodes,
                       load_nodes, ls_eval_points, packed_ball_nodes,
                       plan_oversampling, save_nodes, vogel_nodes)
from .system import (GlobalSystem, Layout, LocalOperator, SolveReport,
                     SolverError, assemble, collocation_layout,
                     evaluate_solution, export_matrix, greedy_patch_order,
                     local_blocks, ls_layout, operator_rows, orthogonality,
                     solve, stability_norm)

__version__ = "0.1.0"
