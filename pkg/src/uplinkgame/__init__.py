"""Joint AP selection and multi-channel power allocation games.

Core objects: immutable NetworkScenario descriptions, the water-filling
best-response primitive, fixed-association equilibrium solvers (a_iwf,
s_iwf), the joint-selection dynamics (jaspa, se_jaspa, si_jaspa, j_jaspa),
equilibrium verifiers, and comparison baselines.
"""

from .baselines import (
    InnerConfig,
    closest_ap,
    exhaustive_search,
    virtual_ap_bound,
    virtual_scenario,
)
from .errors import ResourceError, ScenarioParseError, ValidationError
from .game import (
    EquilibriumReport,
    best_ap_set,
    best_response_rate,
    interference_at,
    per_ap_potential,
    potential_gradient,
    rate,
    residual,
    residual_norms,
    sum_rate,
    system_potential,
    uniform_powers,
    verify_jep,
    verify_power_ne,
)
from .inner import StepsizeSchedule, a_iwf, convergence_diagnostics, s_iwf
from .jaspa import JaspaConfig, RunResult, jaspa, se_jaspa, si_jaspa, update_beta
from .jjaspa import ap_memory_update, j_jaspa, sample_mu_memory
from .scenario import (
    NetworkScenario,
    ScenarioGenParams,
    generate_scenario,
    load_scenario,
    partition_channels,
    save_scenario,
)
from .waterfill import WaterFillResult, water_fill, wf_operator

__all__ = [
    "EquilibriumReport",
    "InnerConfig",
    "JaspaConfig",
    "NetworkScenario",
    "ResourceError",
    "RunResult",
    "ScenarioGenParams",
    "ScenarioParseError",
    "StepsizeSchedule",
    "ValidationError",
    "WaterFillResult",
    "a_iwf",
    "ap_memory_update",
    "best_ap_set",
    "best_response_rate",
    "closest_ap",
    "convergence_diagnostics",
    "exhaustive_search",
    "generate_scenario",
    "interference_at",
    "j_jaspa",
    "jaspa",
    "load_scenario",
    "partition_channels",
    "per_ap_potential",
    "potential_gradient",
    "rate",
    "residual",
    "residual_norms",
    "s_iwf",
    "sample_mu_memory",
    "save_scenario",
    "se_jaspa",
    "si_jaspa",
    "sum_rate",
    "system_potential",
    "uniform_powers",
    "update_beta",
    "verify_jep",
    "verify_power_ne",
    "virtual_ap_bound",
    "virtual_scenario",
    "water_fill",
    "wf_operator",
]
