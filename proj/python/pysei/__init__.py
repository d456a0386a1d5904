"""Bispectrum features and sequential voting for emitter identification."""

from ._core import (  # noqa: F401
    ConfigError,
    IoError,
    NumericError,
    bagging_comparison,
    bispectrum,
    bispectrum_lag_oracle,
    confusion_accuracy_sweep,
    decide,
    favored_certainty,
    featurize,
    generate,
    identify,
    linear_fit,
    preponderance_certainty,
    reg_incomplete_beta,
    report,
    sweep_accuracy,
    sweep_certainty,
    synthesize,
    train,
    validate_config,
    version,
)

__version__ = "0.1.0"
