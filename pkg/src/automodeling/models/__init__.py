from .normal_means import (
    ManyNormalMeansModel,
    from_eta_alpha,
    mnm_grad,
    mnm_initial_theta,
    mnm_log_density,
    mnm_loss,
    mnm_posterior_mean,
    mnm_sample_predictive,
    project_simplex,
    to_eta_alpha,
)
from .regression import (
    LinearRegressionModel,
    Standardizer,
    active_counts,
    classify,
    reg_grad,
    reg_loss,
    reg_predict,
    t_score_screen,
)
from .simple import SimpleMeanModel, exact_simple_expectation, simple_closed_form

__all__ = [
    "ManyNormalMeansModel", "LinearRegressionModel", "SimpleMeanModel", "Standardizer",
    "active_counts", "classify", "exact_simple_expectation", "from_eta_alpha",
    "mnm_grad", "mnm_initial_theta", "mnm_log_density", "mnm_loss", "mnm_posterior_mean",
    "mnm_sample_predictive", "project_simplex", "reg_grad", "reg_loss", "reg_predict",
    "simple_closed_form", "t_score_screen", "to_eta_alpha",
]
