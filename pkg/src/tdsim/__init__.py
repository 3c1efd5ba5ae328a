"""Simulation of time-dependent k-local Hamiltonians with certified error bounds."""

from .counting import CountingParams, census, crossover, gate_counts, volume_fraction
from .hamiltonian import (HamiltonianModel, ModelError, TimeDependentTerm, check_model, evaluate,
                          integrate_term, load_model, model_from_dict, model_norm_bound, save_model)
from .operators import embed, expm, ordered_product, pauli, spectral_norm
from .propagator import ConvergenceError, exact_evolve, exact_evolve_term
from .randomized import (GatePlan, McConfig, average_step, mc_average_step, randomized_product_formula,
                         replay_gate_plan, verify_avg_bound)
from .scenarios import builtin_model, random_2local
from .signals import Constant, PiecewiseConstant, Sinusoid, Tabulated, Telegraph, TimeSignal
from .smoothing import SmoothedModel, ac_stark_scenario, smooth, verify_decoupling
from .trotter import (DecompositionPlan, PlanningError, evolve_plan, hd_recursive_decompose,
                      hd_split_step, piecewise_constant_evolve, plan_decomposition)

__version__ = "0.1.0"
