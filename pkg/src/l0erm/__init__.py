"""Sparse binary classification by exact l0-penalized 0-1 loss minimisation."""

from .core import (
    SELECTION_TOL,
    Dataset,
    LinearClassifier,
    ParameterBox,
    empirical_risk,
    l0_norm,
    predict,
    read_csv,
    selected_indices,
    write_csv,
)
from .erm import FitError, FitResult, fit_constrained, fit_intercept_only, fit_penalized
from .dgp import DgpSpec, bayes_classifier, generate
from .lasso import cross_validate, fit_logit_lasso_path, normalize_to_classifier
from .metrics import MetricsReport, RepetitionRecord, aggregate, relative_risk, selection_metrics
from .theory import TheoryInputs, TheoryReport, lemma1_bound, theory_report
from .tuning import TuningSpec, heuristic_v, lambda_condition2, lambda_heuristic

__version__ = "0.1.0"
