"""Fixed-domain simulator for two-phase melting with surface tension.

The moving interface is flattened onto the grid line z = 0 by a cutoff
vertical shift, the bulk heat problem is solved implicitly per tangential
Fourier mode, and the interface moves by the regularized curvature jump
relation.  A diagnostics layer evaluates the weighted energy/dissipation
functionals of the underlying well-posedness theory and checks their
structural properties (conservation, monotone decay, identity residuals,
norm equivalence) at run time.
"""
from .errors import (
    ConfigError,
    DegenerateTransformError,
    FixedPointError,
    LinearSolveError,
    NonFiniteFieldError,
    StefanSimError,
)
from .grids import (
    Grids,
    NormalGrid,
    TangentialGrid,
    band_limited,
    d_normal,
    d_normal2,
    d_tangential,
    integrate_bulk,
    integrate_interface,
)
from .transform import Cutoff, TransformCoefficients, coefficients, curvature
from .functionals import (
    DerivativeStack,
    EnergyReport,
    conservation_residual,
    decay_fit,
    dissipation_D,
    dissipation_eps,
    energy_E,
    energy_eps,
    equivalence_constant,
    i_psi,
    sobolev_norms,
    state_energy_k0,
    steady_mean,
)
from .identity import IdentityReport, identity_residual_k0, model_energy
from .stepper import (
    SolverConfig,
    State,
    compatible_initial_temperature,
    fixed_point_step,
    interface_step,
    run,
    run_epsilon_schedule,
    solve_regularized,
    temperature_step,
)
from .oracles import (
    LinearizedMode,
    ManufacturedProblem,
    curvature_closed_form,
    dispersion_leading_root,
    linearized_spectrum,
)
from .config import Scenario, build_initial_data, parse_config

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
