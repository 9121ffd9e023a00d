"""Semiparametric kernel Stein discrepancy goodness-of-fit testing."""
from .baselines import (anderson_darling_statistic, ks_statistic, lilliefors_statistic,
                        mmd_v_statistic, w1_model_statistic, w1_statistic)
from .bootstrap import TestReport, bootstrap_calibrate, p_value, sksd_test
from .estimators import (EstimationError, EstimatorSpec, min_ksd_closed_form, min_ksd_numeric,
                         mle_gaussian, project_to_domain, score_matching_closed_form)
from .kernels import KernelSpec, kernel_eval, kernel_grads, median_heuristic
from .models import (ConditionalGaussianFamily, GaussianFamily, GaussianLocationFamily,
                     KernelExpFamily, affine_score_decomposition, cond_gauss_score,
                     gaussian_score, kef_score)
from .neyman import NeymanKernelHandle, neyman_orthogonal_kernel, neyman_sksd_test
from .samplers import ChainConfig, DgpSpec, dgp_sample, gibbs_conditional_gaussian, mala_sample
from .stein import stein_kernel_h, u_statistic, v_statistic, v_statistic_linear_fast

__version__ = "0.1.0"

__all__ = [
    "anderson_darling_statistic", "ks_statistic", "lilliefors_statistic", "mmd_v_statistic",
    "w1_model_statistic", "w1_statistic", "TestReport", "bootstrap_calibrate", "p_value",
    "sksd_test", "EstimationError", "EstimatorSpec", "min_ksd_closed_form", "min_ksd_numeric",
    "mle_gaussian", "project_to_domain", "score_matching_closed_form", "KernelSpec",
    "kernel_eval", "kernel_grads", "median_heuristic", "ConditionalGaussianFamily",
    "GaussianFamily", "GaussianLocationFamily", "KernelExpFamily", "affine_score_decomposition",
    "cond_gauss_score", "gaussian_score", "kef_score", "NeymanKernelHandle",
    "neyman_orthogonal_kernel", "neyman_sksd_test", "ChainConfig", "DgpSpec", "dgp_sample",
    "gibbs_conditional_gaussian", "mala_sample", "stein_kernel_h", "u_statistic", "v_statistic",
    "v_statistic_linear_fast",
]
