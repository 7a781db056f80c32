"""Optimal signalling and robustness auditing for finite Bayesian persuasion."""

from __future__ import annotations

from .core import (Belief, PersuasionInstance, PolicyViolation, ReceiverType, SignalPolicy, Tolerances,
                   UtilityBox, belief_from_p, best_replies, corner_type, expected_receiver_utility,
                   indirect_sender_value, make_belief, policy_value, validate_policy)
from .errors import (DomainError, InstanceFileError, InternalConsistencyError, InvalidInputError,
                     NoAdjustmentError, PersuasionError, UnsupportedDimensionError)
from .geometry import (HalfspaceSystem, RegionPolytope, best_reply_region, containing_fulldim_region,
                       directed_max_min_distance, enumerate_vertices, max_ball_radius, reduce_region,
                       region_dimension)
from .solver import ScoredPosterior, Solution, extreme_point_pool, make_basic, solve_optimal
from .robustness import (AdjustmentResult, RobustnessReport, SearchResult, StabilityFlags, TypeEvaluation,
                         Verdict, action_stability_flags, adjust_to_type, build_adjustment, check_U1S, classify,
                         evaluate_policy_over_types, fragile_witness_type, loss_bound, pseudo_optimal_value,
                         search_robust_policy, witness_type_set)
from .genericity import GenericityOutcome, check_lrs_property, genericity_trial
from .curves import CurveRow, emit_indirect_utility_curve
from .instance_file import LoadedInstance, dumps_instance, load_instance, loads_instance

__version__ = "0.1.0"
