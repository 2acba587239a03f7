"""Hierarchical equations of motion for Drude dissipation.

The package turns a Drude bath into a finite exponential basis through the
[N/N] pole decomposition of the Bose function, quantifies what the finite
basis leaves out (white-noise residue strength, half-width, Kubo
narrowing), and propagates the resulting hierarchy of auxiliary density
operators with fixed-step RK4 and on-the-fly filtering.  The accuracy
criteria let the minimal order N be chosen before any propagation.
"""

from .bath import (
    BathExpansion,
    DrudeBath,
    correlation_exact,
    correlation_tail_bound,
    expand,
    residue_hwhm,
    residue_spectrum,
    spectrum_table,
)
from .criteria import (
    AccuracyReport,
    Tier,
    accuracy_report,
    criteria_curves,
    gamma_approx,
    kappa,
    minimum_order,
)
from .errors import (
    ArgumentError,
    CapabilityError,
    DegeneracyError,
    DivergenceError,
    DomainError,
    DrudeHeomError,
    InternalError,
    ResourceError,
    StructuralError,
)
from .hierarchy import (
    AdoIndex,
    AdoStore,
    HierarchySpec,
    damping,
    enumerate_indices,
    enumeration_size,
    heom_rhs,
    wnr_apply,
)
from .propagator import (
    PropagationConfig,
    PropagationResult,
    RunStats,
    filter_step,
    propagate,
    steady_state_probe,
)
from .psd import (
    MAX_ORDER,
    PadeDecomposition,
    bernoulli_numbers,
    bose_exact,
    compute_psd,
    eval_bose_approx,
    moment_residuals,
)
from .systems import (
    DimerModel,
    DrivenHamiltonian,
    GaussianPulse,
    SpinBosonModel,
    SystemModel,
    build_dimer,
    build_spin_boson,
    characteristic_frequency,
    drive_rwa,
    fs_to_unit_cm,
    kelvin_to_beta_cm,
)

__version__ = "0.1.0"
