"""Robust confidence intervals for linear-regression coefficients under noise contamination."""
from .model import Dataset, DesignSpec, Interval, NoiseSpec, generate_dataset, split
from .estimators import huber_regression, ols
from .interval import ThresholdRule, confidence_interval, decorrelate, invert_score
from .univariate import location_interval, median_reg_interval, smooth_univariate_interval
from .baselines import BootstrapSpec, ols_t_interval, residual_bootstrap_interval

__version__ = "0.1.0"
