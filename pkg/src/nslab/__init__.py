"""nslab: a desk-scale numerical laboratory for a triple-regularized
compressible heat-conducting flow system.

The package provides finite-volume operators on boxes (grids), material
law bundles with hypothesis checking (constitutive), initial-data
regularization (initdata), a Lie-split time stepper with an energy
ledger (solver), weak-form and inequality diagnostics (diagnostics), an
iterative lower-bound certificate for the temperature (degiorgi), and
parameter-continuation studies (continuation).
"""

from .artifacts import (
    load_degiorgi_csv,
    load_ledger_csv,
    load_report_json,
    load_sweep_csv,
    load_trajectory,
    write_degiorgi_csv,
    write_ledger_csv,
    write_report_json,
    write_snapshots,
    write_sweep_csv,
)
from .config import ConfigError, RunConfig, load_config
from .constitutive import (
    ConstitutiveSet,
    PRESETS,
    Renormalizer,
    ValidationReport,
    elastic_potential,
    kappa_primitive,
    make_renormalizer,
    pe_decomposition,
    power_law_set,
    preset_set,
    validate_hypotheses,
)
from .grids import (
    GridSpec,
    ScalarField,
    VectorField,
    div,
    grad,
    integrate,
    laplacian,
    load_field,
    save_field,
    scalar_field,
    sym_gradient,
    vector_field,
)
from .continuation import (
    LevelResult,
    SweepReport,
    cutoff_Tk,
    low_density_weight,
    parameter_sweep,
    temperature_integrability_probe,
)
from .degiorgi import (
    DeGiorgiConfig,
    DeGiorgiReport,
    RecursionResult,
    Truncation,
    level_energy_U,
    level_sequence,
    recursion_lemma,
    truncation_phi,
    verify_recursion,
)
from .diagnostics import (
    InequalityReport,
    PoincareBatch,
    TestFunction,
    bank_renorm,
    effective_viscous_pressure,
    energy_inequality_check,
    poincare_batch,
    renorm_temperature_residual,
    weighted_poincare_check,
)
from .initdata import (
    InitialData,
    initial_energy,
    make_initial_data,
    mollify,
    regularize_initial_data,
)
from .solver import (
    EnergyLedger,
    FluidState,
    RegularizationParams,
    SolverError,
    Trajectory,
    simulate,
    step_continuity,
    step_momentum,
    step_temperature,
    suggest_dt,
    total_energy,
)

__version__ = "0.1.0"

__all__ = [
    "load_degiorgi_csv",
    "load_ledger_csv",
    "load_report_json",
    "load_sweep_csv",
    "load_trajectory",
    "write_degiorgi_csv",
    "write_ledger_csv",
    "write_report_json",
    "write_snapshots",
    "write_sweep_csv",
    "ConfigError",
    "RunConfig",
    "load_config",
    "ConstitutiveSet",
    "PRESETS",
    "Renormalizer",
    "ValidationReport",
    "elastic_potential",
    "kappa_primitive",
    "make_renormalizer",
    "pe_decomposition",
    "power_law_set",
    "preset_set",
    "validate_hypotheses",
    "GridSpec",
    "ScalarField",
    "VectorField",
    "div",
    "grad",
    "integrate",
    "laplacian",
    "load_field",
    "save_field",
    "scalar_field",
    "sym_gradient",
    "vector_field",
    "LevelResult",
    "SweepReport",
    "cutoff_Tk",
    "low_density_weight",
    "parameter_sweep",
    "temperature_integrability_probe",
    "DeGiorgiConfig",
    "DeGiorgiReport",
    "RecursionResult",
    "Truncation",
    "level_energy_U",
    "level_sequence",
    "recursion_lemma",
    "truncation_phi",
    "verify_recursion",
    "InequalityReport",
    "PoincareBatch",
    "TestFunction",
    "bank_renorm",
    "effective_viscous_pressure",
    "energy_inequality_check",
    "poincare_batch",
    "renorm_temperature_residual",
    "weighted_poincare_check",
    "InitialData",
    "initial_energy",
    "make_initial_data",
    "mollify",
    "regularize_initial_data",
    "EnergyLedger",
    "FluidState",
    "RegularizationParams",
    "SolverError",
    "Trajectory",
    "simulate",
    "step_continuity",
    "step_momentum",
    "step_temperature",
    "suggest_dt",
    "total_energy",
    "__version__",
]
