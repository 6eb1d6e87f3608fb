"""Two-loop renormalization-group flow of metrics with density.

Reduced geometry classes (constant curvature, left-invariant metrics on
unimodular 3-groups, warped tori), curvature and weighted calculus, the
coupled metric/drift/measure flows, entropy functionals and eigenvalue
problems, and a scenario runner.
"""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .geometry import (  # noqa: F401
    ConstantCurvature,
    Homogeneous3,
    WarpedTorus,
    build_geometry,
    rescale_metric,
)
from .fields import DriftField, SymmetricTensorField, VectorField  # noqa: F401
from .curvature import (  # noqa: F401
    bakry_emery_ricci,
    curvature_package,
    divdiv_riemann,
    drift_modified_rm2,
    rm_norm_variation,
)
from .density import (  # noqa: F401
    alpha_g,
    fokker_planck_step,
    gauge_transform_measure,
    helmholtz_otto,
    total_mass,
)
from .flow import (  # noqa: F401
    FlowState,
    Trajectory,
    constant_curvature_implicit_sigma,
    deturck_run,
    deturck_step,
    integrate_rg2,
    parabolicity_margin,
    rg2_rhs,
    seesaw_solve,
    verify_scale_symmetry,
    xi_evolution_step,
)
from .variational import (  # noqa: F401
    EigenResult,
    EntropyRecord,
    capital_lambda,
    extended_F,
    f2_energy,
    futaki_bound,
    monotonicity_report,
    nash_entropy,
    perelman_F,
    perelman_lambda,
    weighted_lambda2,
)
