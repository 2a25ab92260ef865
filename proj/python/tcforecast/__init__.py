"""Traffic forecasting with a periodic data bank and attention compensation."""

from ._core import (
    PERIOD,
    Model,
    PeriodicDataBank,
    SeriesFrame,
    SyntheticSpec,
    TrainResult,
    bench_attention,
    build_bank,
    compute_metrics,
    count_zeros,
    format_timestamp,
    generate_synthetic,
    impute_zeros,
    input_entropy,
    load_bank,
    load_checkpoint,
    load_csv,
    parse_timestamp,
    ppmcc,
    predict_mae,
    save_bank,
    save_checkpoint,
    slot_of,
    split,
    train,
    write_csv,
)

__all__ = [
    "PERIOD",
    "Model",
    "PeriodicDataBank",
    "SeriesFrame",
    "SyntheticSpec",
    "TrainResult",
    "bench_attention",
    "build_bank",
    "compute_metrics",
    "count_zeros",
    "format_timestamp",
    "generate_synthetic",
    "impute_zeros",
    "input_entropy",
    "load_bank",
    "load_checkpoint",
    "load_csv",
    "parse_timestamp",
    "ppmcc",
    "predict_mae",
    "save_bank",
    "save_checkpoint",
    "slot_of",
    "split",
    "train",
    "write_csv",
]
