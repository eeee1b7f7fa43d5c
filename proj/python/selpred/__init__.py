"""Selective-prediction confidence signals, metrics and report tables."""

from ._selpred import (
    ConfigError,
    DegenerateInputError,
    DomainError,
    IntegrityError,
    IoError,
    ParseError,
    SelpredError,
    StatisticsError,
    ValidationError,
    aurc,
    aurc_bruteforce,
    auroc,
    auroc_bruteforce,
    bootstrap_delta_auroc,
    brier,
    cov_at_error,
    ece,
    err_at_coverage,
    evaluate,
    fit_temperature,
    generate_run,
    load_run,
    risk_coverage_curve,
    run_cli,
    self_verify_confidence,
    sigmoid,
    signal_names,
    softmax,
    split_calibration,
    temperature_nll,
    write_run,
)

__all__ = [name for name in dir() if not name.startswith("_")]
