"""Exact stationary analysis of lattice-valued stochastic recursions.

The package solves recursions of the form "tomorrow's state is a sample
dependent function of today's state" over a finite cyclic base, without
assuming the per-sample maps are monotone.  A backwards sweep shrinks a
family of candidate sets to its limit, whose structure (constant cardinal,
bijective transitions, uniform extension measure, period permutation)
determines every stationary solution on the lattice.  Queueing front ends
build the maps for a single-server pure-loss system and for one whose
customers abandon after a deadline; a coupling-from-the-past sampler gives
an independent statistical cross-check.
"""

from .backwards import (
    BackwardsRun,
    ExtensionMeasure,
    InvariantFamilies,
    PeriodPermutation,
    StructureReport,
    backwards_run,
    extension_measure,
    invariant_sets,
    period_permutation,
    stationary_solutions,
    verify_structure,
)
from .cftp import (
    CftpConfig,
    CftpEstimate,
    CftpSample,
    cftp_estimate,
    cftp_sample,
    forward_simulate,
    ks_distance,
)
from .config import ConfigError, build_job, load_config, load_job
from .core import (
    DrivingMap,
    FiniteCyclicSystem,
    ModelError,
    NotStabilizedError,
    RandomSet,
    StartSetError,
    StateLattice,
    as_fraction,
    format_exact,
    fraction_gcd,
)
from .monotone import (
    ConditionReport,
    MonotoneSolveResult,
    OrderReport,
    dominates,
    loynes_solve,
    order_checks,
    verify_condition_v,
)
from .queueing import (
    CardinalBounds,
    ComparisonMaps,
    ImpatienceModel,
    ImpatienceParams,
    IndexSchemeRun,
    LoadCheck,
    LossModel,
    LossParams,
    build_impatience,
    build_loss,
    comparison_maps,
    index_scheme_compare,
    lattice_step,
    lower_envelope,
    patience_load_check,
    upper_envelope,
)

__version__ = "0.1.0"

__all__ = [
    "BackwardsRun",
    "CardinalBounds",
    "CftpConfig",
    "CftpEstimate",
    "CftpSample",
    "ComparisonMaps",
    "ConditionReport",
    "ConfigError",
    "DrivingMap",
    "ExtensionMeasure",
    "FiniteCyclicSystem",
    "ImpatienceModel",
    "ImpatienceParams",
    "IndexSchemeRun",
    "InvariantFamilies",
    "LoadCheck",
    "LossModel",
    "LossParams",
    "ModelError",
    "MonotoneSolveResult",
    "NotStabilizedError",
    "OrderReport",
    "PeriodPermutation",
    "RandomSet",
    "StartSetError",
    "StateLattice",
    "StructureReport",
    "as_fraction",
    "backwards_run",
    "build_impatience",
    "build_job",
    "build_loss",
    "cftp_estimate",
    "cftp_sample",
    "comparison_maps",
    "dominates",
    "extension_measure",
    "format_exact",
    "forward_simulate",
    "fraction_gcd",
    "index_scheme_compare",
    "invariant_sets",
    "ks_distance",
    "lattice_step",
    "load_config",
    "load_job",
    "lower_envelope",
    "loynes_solve",
    "order_checks",
    "patience_load_check",
    "period_permutation",
    "stationary_solutions",
    "upper_envelope",
    "verify_condition_v",
    "verify_structure",
]
