"""Control of media streaming from cost-heterogeneous servers.

Library surface: interruption exponents and feasibility regions (core),
association-policy design formulas and cost bounds (policies), exact
event-driven Monte Carlo for the Poisson model (mc_poisson), the expanded
state candidate value function for its Bellman equation (poisson_hjb), the
Brownian fluid model's closed forms and optimal controls (fluid), the
discretized SDE validation (mc_fluid), random linear network coding and the
merged-arrival experiment (rlnc), and a CSV-emitting CLI (cli).
"""

from .core import (Exponents, QoETarget, Rates, RegionClass, classify_region,
                   fluid_exponent, gamma, interruption_exponent,
                   region_boundaries)
from .errors import (BranchDomainError, DomainError, InfeasibleState,
                     InfeasibleTarget, LengthMismatch, QStreamError,
                     SimulationOverrun, StencilOutOfRegion, StepOverrun)
from .fluid import (ExitStats, FluidControls, FluidState, fluid_cost,
                    fluid_design_threshold, fluid_exit_statistics,
                    fluid_hjb_residual, fluid_interruption_probability,
                    fluid_optimal_controls, fluid_p_at_threshold, fluid_value,
                    manifold_p)
from .kernels import BACKEND
from .mc_fluid import (estimate_fluid, manifold_invariance_check,
                       simulate_fluid_path)
from .mc_poisson import (Cap, Estimate, PathOutcome, SimConfig, estimate,
                         simulate_path, stopping_identity_check, wald_check)
from .poisson_hjb import (poisson_candidate_value, poisson_hjb_residual,
                          poisson_threshold_state)
from .policies import (AlwaysBoth, AlwaysFree, CostInterval, Offline,
                       OfflineDesign, PolicySpec, PolicyState, Risky,
                       RiskyDesign, Safe, decide, design_offline, design_risky,
                       design_safe, new_state, risky_cost_bound,
                       safe_cost_bounds)
from .rlnc import (CodedPacket, DecoderState, Field, encode,
                   expected_redundancy_per_block, full_rank_probability,
                   merge_experiment)
from .rngstream import Stream

__version__ = "0.1.0"
