"""Counterfactual span-drop augmentation with exact distributional analytics."""

from .analytics import (
    analytic_report,
    beta_binomial_pmf,
    binomial_pmf,
    keep_count_distribution,
    log_gamma,
    monte_carlo_report,
    per_span_entropy,
    prob_full_length,
    prob_noise_free,
)
from .core import (
    ConfigError,
    DropConfig,
    DropMask,
    SequenceExample,
    Span,
    derive_stream,
    stream_id_for,
    validate_example,
)
from .sampler import AugmentOutcome, RetriesExhausted, apply_mask, augment

__version__ = "0.1.0"
