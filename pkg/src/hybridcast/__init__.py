"""Forecasting toolkit for daily epidemic case counts.

Combines a linear autoregression and a small from-scratch LSTM into a single
jointly trained model whose mixing weight alpha is itself learned, and ships
the full evaluation pipeline around it: smoothing, differencing, scaling,
rolling trial windows, seeded multi-run scoring and aggregation tables.
"""

from .ar import ArModel, bic, fit_ols, predict, select_lag_bic
from .errors import (
    AlignmentError,
    ComputationError,
    DataFormatError,
    DateLookupError,
    DegenerateRangeError,
    DimensionError,
    HybridcastError,
    InputDataError,
    LengthError,
    RowParseError,
    SingularDesignError,
    StationarityError,
    TrainingDivergenceError,
)
from .evaluation import (
    ModelKind,
    SweepResult,
    SweepTable,
    TrialResult,
    TrialSpec,
    aggregate,
    mape,
    prepare_trial,
    run_sweep,
    run_trial,
    slice_trials,
    traces_csv_text,
)
from .hybrid import (
    HybridModel,
    coefficient_report,
    decompose,
    hybrid_forward,
    init_hybrid,
    train_hybrid,
    train_hybrid_seeds,
)
from .ingest import AlignedPanel, TimeSeries, align_regions, parse_csv
from .nn import AdamConfig, LstmRegressor, TrainConfig, init_regressor, train_lstm, train_lstm_seeds
from .preprocess import (
    ScalerParams,
    SupervisedMatrix,
    adf_test,
    difference,
    fit_scaler,
    reshape_supervised,
    scale,
    smooth,
    smooth_series,
    undifference,
    unscale,
)

__version__ = "0.1.0"

__all__ = [
    "AdamConfig",
    "AlignedPanel",
    "AlignmentError",
    "ArModel",
    "ComputationError",
    "DataFormatError",
    "DateLookupError",
    "DegenerateRangeError",
    "DimensionError",
    "HybridcastError",
    "HybridModel",
    "InputDataError",
    "LengthError",
    "LstmRegressor",
    "ModelKind",
    "RowParseError",
    "ScalerParams",
    "SingularDesignError",
    "StationarityError",
    "SupervisedMatrix",
    "SweepResult",
    "SweepTable",
    "TimeSeries",
    "TrainConfig",
    "TrainingDivergenceError",
    "TrialResult",
    "TrialSpec",
    "adf_test",
    "aggregate",
    "align_regions",
    "bic",
    "coefficient_report",
    "decompose",
    "difference",
    "fit_ols",
    "fit_scaler",
    "hybrid_forward",
    "init_hybrid",
    "init_regressor",
    "mape",
    "parse_csv",
    "predict",
    "prepare_trial",
    "reshape_supervised",
    "run_sweep",
    "run_trial",
    "scale",
    "select_lag_bic",
    "slice_trials",
    "smooth",
    "smooth_series",
    "traces_csv_text",
    "train_hybrid",
    "train_hybrid_seeds",
    "train_lstm",
    "train_lstm_seeds",
    "undifference",
    "unscale",
]
