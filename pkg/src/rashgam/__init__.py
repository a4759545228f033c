"""Rashomon sets for sparse binned logistic GAMs.

Fit a GAM, approximate its Rashomon set (all near-optimal coefficient
vectors) with an inscribed ellipsoid, derive ellipsoids for merged support
sets analytically, and query the set: variable-importance ranges, monotone
models, projections of user edits, and jump prevalence.
"""

from .binning import BinnedDataset, BinningSpec, RawDataset, bin_dataset, make_quantile_spec, read_csv
from .ellipsoid import EigenFactors, Ellipsoid, slice_fix_coords
from .errors import (
    ConvergenceError,
    DataError,
    DimensionMismatchError,
    EmptyRashomonError,
    EnumerationGuardError,
    OutOfRangeError,
    PlanError,
    RashgamError,
)
from .gam import (
    GamModel,
    LossBreakdown,
    SupportSet,
    SupportView,
    classification_loss,
    expand_support,
    fit_erm,
    gradient,
    hessian,
    penalty_l2,
    penalty_steps,
    reduce_support,
    total_loss,
    total_loss_many,
)
from .rsetfit import FitTrace, GamObjective, RashomonConfig, approximate, axis_calibrate, hessian_init, optimize
from .blocking import MergePlan, SlicedRashomon, count_subsets, enumerate_plans, explore, intersect, merge_linear, merge_quadratic
from .boxoracle import CoordInterval, box_volume, bracketing_center_search, coord_intervals, get_bounds, segment_ends
from .apps import (
    CoordLayout,
    JumpReport,
    VariableImportanceRange,
    jump_analysis,
    monotone_fit,
    project_edit,
    vi_lower,
    vi_point,
    vi_range,
    vi_upper,
)
from .evaluation import (
    BaselineKind,
    PrecisionEstimate,
    TotalLossEvaluator,
    bootstrap_models,
    estimate_precision,
    fork_rng,
    method_ratio_report,
    mvee_fit,
    recall_proxy,
    sphere_baseline,
    tradeoff_curve,
)

__version__ = "0.1.0"
