"""Estimation in multivariate regression with measurement errors under linear
restrictions: corrected and restricted estimators, their joint asymptotic laws,
asymptotic risk comparisons, and a Monte Carlo verification harness."""

from .asymptotics import (AsymptoticLaw, PopulationModel, ScoreCov,
                          estimate_score_cov, joint_law, limit_map, mean_shift,
                          named_weight_limit, population)
from .config import RunConfig, load_config, parse_config
from .estimators import (Attenuation, EstimateSet, build_kx, corrected_lse,
                         corrected_objective, estimate_all, lse, restricted)
from .linalg import (AffineTransform, MatrixNormal, eig_extremes, kron, rvec,
                     sample_matrix_normal, transform_cov_block, unrvec, unvec,
                     vec)
from .model import (Dataset, DesignRule, ModelConfig, Restriction, generate,
                    make_restricted_b)
from .montecarlo import (EmpiricalSummary, SimulationPlan, affine_limit_suite,
                         compare_law, empirical_adr, run_plan,
                         summary_from_law_draws)
from .risk import (ADRReport, CurveRow, adr_from_law, adr_restricted,
                   adr_unrestricted, bias_form, dominance_report,
                   efficiency_curve, named_dominance_report)

__version__ = "0.1.0"

__all__ = [
    "ADRReport", "AffineTransform", "AsymptoticLaw", "Attenuation",
    "CurveRow", "Dataset", "DesignRule", "EmpiricalSummary", "EstimateSet",
    "MatrixNormal", "ModelConfig", "PopulationModel", "Restriction",
    "RunConfig", "ScoreCov", "SimulationPlan", "adr_from_law",
    "adr_restricted", "adr_unrestricted", "affine_limit_suite", "bias_form",
    "build_kx", "compare_law", "corrected_lse", "corrected_objective",
    "dominance_report", "efficiency_curve", "eig_extremes", "empirical_adr",
    "estimate_all", "estimate_score_cov", "generate", "joint_law", "kron",
    "limit_map", "load_config", "lse", "make_restricted_b", "mean_shift",
    "named_dominance_report", "named_weight_limit", "parse_config",
    "population", "restricted", "run_plan", "rvec", "sample_matrix_normal",
    "summary_from_law_draws", "transform_cov_block", "unrvec", "unvec", "vec",
]
