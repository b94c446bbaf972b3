"""Checkers for the gradient, Harnack, Hessian and Liouville estimates."""
from .core import (CHECK_NAMES, DEFAULT_TOL, FAIL, K45, PASS, PASS_FLAGS, SQRT2, CheckReport, EstimateParams,
                   ParameterError, Snapshot, Tolerance, hamilton_eta, hamilton_xi, hessian_AB,
                   hessian_lambda, hessian_omega, lambda_alpha_eps, li_yau_local_A, li_yau_source_sup,
                   reversed_harnack_exponents, snapshots, window_K, window_K1)
from .gradient import (cd_condition, hamilton_bound, hamilton_ceiling, harnack_bound, li_yau_compact,
                       li_yau_global, li_yau_local, liouville_assess, window_bounds)
from .hessian import (hamilton_hessian, hessian_global, hessian_local, ly_hessian, required_C,
                      reversed_harnack)

__all__ = [
    "CHECK_NAMES", "DEFAULT_TOL", "FAIL", "K45", "PASS", "PASS_FLAGS", "SQRT2", "CheckReport", "EstimateParams",
    "ParameterError", "Snapshot", "Tolerance", "cd_condition", "hamilton_bound", "hamilton_ceiling",
    "hamilton_eta", "hamilton_hessian", "hamilton_xi", "harnack_bound", "hessian_AB", "hessian_global",
    "hessian_lambda", "hessian_local", "hessian_omega", "lambda_alpha_eps", "li_yau_compact",
    "li_yau_global", "li_yau_local", "li_yau_local_A", "li_yau_source_sup", "liouville_assess",
    "ly_hessian", "required_C", "reversed_harnack", "reversed_harnack_exponents", "snapshots",
    "window_K", "window_K1", "window_bounds",
]
