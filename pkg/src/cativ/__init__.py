"""cativ: categorical potential-outcome distributions from a binary
instrument.

The library recovers the full distribution of categorical potential outcomes
from (outcome, treatment, instrument) microdata: closed-form point
identification when selection covariance is equal across treatment arms,
interval bounds under weaker restrictions (assumption-free, monotonic, or
magnitude-bounded selection), a testable implication, percentile bootstrap
inference, and a latent-type simulation oracle with closed-form moments for
validating every estimator against known truth.
"""

from .bootstrap import BootstrapConfig, BootstrapResult, Estimand, bootstrap
from .bounds import (
    IntervalBounds,
    bounds_bounded,
    bounds_monotonic,
    bounds_none,
    breakdown_kappa,
    kappa_sweep,
)
from .data import (
    Dataset,
    EstimandConfig,
    Record,
    SupportDiagnostic,
    load_dataset,
    save_dataset,
    validate_support,
)
from .dgp import (
    DgpDiagnostics,
    DgpSpec,
    diagnostics,
    exact_moments,
    sample,
    sharpness_spec,
    spec_grid,
)
from .effects import EffectEstimates, effects_bounds, effects_point
from .errors import CativError, DataError, WeakInstrumentError
from .identify import (
    PotentialDistributions,
    identify_point,
    omega_fit_residual,
    plug_back_residual,
    test_implication,
)
from .moments import (
    DEFAULT_WEAK_IV_TOL,
    ObservedMoments,
    check_relevance,
    estimate_moments,
    orient_instrument,
    swap_instrument,
)
from .selfcheck import run_selfcheck

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "BootstrapConfig",
    "BootstrapResult",
    "CativError",
    "DataError",
    "Dataset",
    "DEFAULT_WEAK_IV_TOL",
    "DgpDiagnostics",
    "DgpSpec",
    "EffectEstimates",
    "Estimand",
    "EstimandConfig",
    "IntervalBounds",
    "ObservedMoments",
    "PotentialDistributions",
    "Record",
    "SupportDiagnostic",
    "WeakInstrumentError",
    "bootstrap",
    "bounds_bounded",
    "bounds_monotonic",
    "bounds_none",
    "breakdown_kappa",
    "check_relevance",
    "diagnostics",
    "effects_bounds",
    "effects_point",
    "estimate_moments",
    "exact_moments",
    "identify_point",
    "kappa_sweep",
    "load_dataset",
    "omega_fit_residual",
    "orient_instrument",
    "plug_back_residual",
    "run_selfcheck",
    "sample",
    "save_dataset",
    "sharpness_spec",
    "spec_grid",
    "swap_instrument",
    "test_implication",
    "validate_support",
]
