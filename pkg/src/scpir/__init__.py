"""Storage-constrained private information retrieval with uncoded placement.

The scheme, its privacy audit, and the matching converse bounds, all in
exact arithmetic.
"""

from .bounds import (alpha, corner_points, dtilde, gamma, hull_achievable, lambda_from_x, line_bound,
                     lower_bound, lp_lower_bound, replicated_lambda, s_function, theorem1_general)
from .core import Parameters, ParameterError, make_params, placement_fractions, submessage_labels
from .harness import TrialConfig, TrialReport, run_memory_sharing, run_trial, sweep
from .placement import place, split_messages, storage_usage
from .privacy import exact_query_distribution, verify_privacy_exact, verify_privacy_sampled
from .protocol import answer, build_query_plan, decode, download_cost, sample_permutations

__all__ = [
    "Parameters", "ParameterError", "make_params", "submessage_labels", "placement_fractions",
    "split_messages", "place", "storage_usage",
    "sample_permutations", "build_query_plan", "answer", "decode", "download_cost",
    "exact_query_distribution", "verify_privacy_exact", "verify_privacy_sampled",
    "dtilde", "s_function", "alpha", "gamma", "line_bound", "lower_bound", "corner_points",
    "hull_achievable", "lp_lower_bound", "lambda_from_x", "replicated_lambda", "theorem1_general",
    "TrialConfig", "TrialReport", "run_trial", "run_memory_sharing", "sweep",
]
