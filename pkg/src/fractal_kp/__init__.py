"""KP/KdV solutions from spectral data supported on Cantor and Sierpinski
node families.

The pipeline: build a fractal node family with uniform weights, solve the
nonlocal pole-condition (or limiting singular integral) system for the
dressing densities, reconstruct u(x, y, t) from the far-field coefficient,
and verify through PDE residuals and reduction probes.
"""

__version__ = "0.1.0"

from .amplitudes import AmplitudeSpec, sample
from .cauchy_core import (
    DenseFactorization,
    KernelMatrix,
    SolveReport,
    assemble_kernel,
    cauchy_eval,
    solve_dense,
)
from .config import ExperimentConfig, parse_config
from .errors import (
    AmplitudeSignError,
    CoincidentNodesError,
    ConfigError,
    DisjointnessError,
    FractalKPError,
    GridTooSmallError,
    NodeBudgetError,
    PoleEvaluationError,
    SingularSystemError,
)
from .experiment import converge_study, run_experiment
from .finite_dbar import (
    IsometrySpec,
    OneComponentSolution,
    TwoComponentSolution,
    eval_chi,
    nonlocal_residual,
    solve_one_component,
    solve_two_component,
)
from .fractal_geometry import (
    FractalSpec,
    IntervalList,
    PointSet,
    cantor_endpoints,
    cantor_intervals,
    cantor_midpoints,
    cantor_moment_oracle,
    embed,
    empirical_moment,
    generate_nodes,
    generate_partner_nodes,
    min_pairwise_separation,
    sierpinski_face_centers,
    sierpinski_vertices,
)
from .kp_engine import (
    RECONSTRUCTION_SIGN,
    DressingSpec,
    FieldGrid,
    GridAxes,
    PhasePoint,
    compute_field,
    dressed_amplitudes,
    kdv_probe,
    kp_residual,
    phase,
    reality_probe_kp,
    schrodinger_spectrum_probe,
)
from .singular_ieq import (
    IEQSolution,
    Ieq23System,
    chi_tilde_eval,
    ieq_residual,
    solve_ieq1,
    solve_ieq23,
)

__all__ = [name for name in dir() if not name.startswith("_")]
