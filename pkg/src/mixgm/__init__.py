"""Sparse mixed graphical models over continuous and categorical data."""

from .core import compute_penalty_weights, neg_pseudo_loglik, pseudo_loglik_gradient
from .data import Dataset, Variable, VariableSchema, load_dataset, preprocess, split_train_test
from .errors import DataError, NumericalError
from .graph import MixedGraph, aggregate, neighborhood
from .optimizer import SolverConfig, fit
from .selection import SelectionConfig, ebic, lambda_grid, select_model
from .theta import Theta

__version__ = "0.1.0"

__all__ = [
    "DataError", "Dataset", "MixedGraph", "NumericalError", "SelectionConfig", "SolverConfig", "Theta",
    "Variable", "VariableSchema", "aggregate", "compute_penalty_weights", "ebic", "fit", "lambda_grid",
    "load_dataset", "neg_pseudo_loglik", "neighborhood", "preprocess", "pseudo_loglik_gradient",
    "select_model", "split_train_test",
]
