"""Approximation policies for perishable inventory with forecast-driven
demand: marginal-cost dual balancing, truncated balancing, exact dynamic
programming benchmarks and FIFO-optimality checks."""

from .demand import (CompoundPoissonDemand, CompoundPoissonSpec, ContinuousDemand,
                     DemandModel, DiscreteDist, ForecastCompoundPoissonDemand,
                     IndependentDemand, InfoSet, conditional_pmf,
                     exponential_demand, iid_demand, inverse_cdf, point_mass_demand,
                     sample_path, uniform_demand)
from .dp import (DPInstance, TablePolicy, ValueTable, bellman_residual,
                 brute_force_policy_eval, cost_to_go_differences, exact_base_stock,
                 solve_opt, solve_opt_wof)
from .errors import (CapabilityError, ConfigurationError, ConsistencyError,
                     PerishableError, ResourceError, SearchBoundError,
                     ValidationError)
from .fifo import (FifoReport, check_cost_condition, check_fractile_monotone,
                   check_mixed_condition, chao_guarantee, guarantee_report)
from .harness import (EvaluationResult, error_metric, evaluate, impr_metric,
                      run_platelet_experiment)
from .inventory import (CostParams, PeriodOutcome, SamplePath,
                        TransformedCostParams, lemma1_residual, period_cost_original,
                        period_cost_transformed, total_cost_original,
                        total_cost_transformed, transform_costs, transition)
from .marginal import (MarginalCostTriple, marginal_holding, marginal_outdating,
                       marginal_shortage, marginal_triple, mc_marginal_triple,
                       outdate_prob_table)
from .policies import (BaseStockPolicy, DualBalancingPolicy, MyopicPolicy,
                       OrderingPolicy, PolicyDecision, TruncatedBalancingPolicy,
                       base_stock_policy, default_upper_bound, dual_balancing_quantity,
                       myopic_lower_bound, optimal_base_stock,
                       truncated_balancing_quantity)

__version__ = "0.1.0"
