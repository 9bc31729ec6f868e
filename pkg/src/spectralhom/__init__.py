"""Spectral homogenization of periodic linear elasticity on integer-lattice patterns."""

from .elasticity import (
    GreenTable,
    green_coeff,
    green_coeff_batch,
    iso_stiffness,
    mandel_dim,
    periodized_green,
    sym_grad_hat,
)
from .errors import SpectralHomError
from .geometry import (
    HashinEllipses,
    Inclusion,
    IsoPhase,
    Laminate,
    ReferenceSolution,
    VoxelMap,
    laminate_reference,
    load_reference_values,
    read_field,
    sample_stiffness,
    write_field,
)
from .lattice import (
    GeneratingSet,
    Pattern,
    PatternMatrix,
    SmithDecomposition,
    canonical_residue,
    frequency_set,
    generating_set,
    pattern,
    smith_normal_form,
)
from .pfft import FftPlan, fft, fourier_matrix, ifft, plan
from .solver import (
    ErrorMetrics,
    SolveReport,
    SolverConfig,
    dense_oracle,
    effective_stiffness,
    error_metrics,
    ls_fixed_point,
    ve_krylov,
)
from .translates import (
    CoefficientRule,
    GeneratorSpec,
    bracket_sum,
    bspline_rule,
    dirichlet_rule,
    dlvp_rule,
    fundamental_interpolant,
    make_rule,
    nodal_synthesis,
    orthonormalize,
    synthesize,
)

__version__ = "0.1.0"
