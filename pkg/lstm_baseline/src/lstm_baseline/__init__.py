"""Windowed LSTM forecaster producing prediction files for the pricing engine."""

from .errors import BaselineError, DivergenceError, ValidationError
from .model import (
    DEFAULT_WINDOW,
    FEATURE_NAMES,
    FeatureTable,
    LstmConfig,
    LstmModel,
    LstmWeights,
    WindowedDataset,
    build_windows,
    init_model,
    load_features,
    lstm_cell_step,
    predict_to_file,
    sigmoid,
    train,
)

__all__ = [
    "BaselineError",
    "DivergenceError",
    "ValidationError",
    "DEFAULT_WINDOW",
    "FEATURE_NAMES",
    "FeatureTable",
    "LstmConfig",
    "LstmModel",
    "LstmWeights",
    "WindowedDataset",
    "build_windows",
    "init_model",
    "load_features",
    "lstm_cell_step",
    "predict_to_file",
    "sigmoid",
    "train",
]
