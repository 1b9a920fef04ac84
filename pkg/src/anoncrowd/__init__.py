"""anoncrowd: a desk-scale simulator for an anonymity-preserving
crowdsourcing protocol with verifiable Beta-posterior quality updates.

The crypto layer (contexts, commitments, relations) and the policy layer
are importable on their own; the harness subpackage adds scenarios, the
deterministic runner and the log audit behind the `anoncrowd` CLI.
"""

from .context import CryptoContext, production_context, tiny_context
from .policy import (
    AVERAGE,
    MAJORITY,
    FinalAnswer,
    QualityState,
    TaskPolicy,
    ans_calc,
    clears_threshold,
    is_correct,
    paym_calc,
    qual_update,
    quality_mean,
)

__version__ = "0.1.0"

__all__ = [
    "AVERAGE",
    "CryptoContext",
    "FinalAnswer",
    "MAJORITY",
    "QualityState",
    "TaskPolicy",
    "__version__",
    "ans_calc",
    "clears_threshold",
    "is_correct",
    "paym_calc",
    "production_context",
    "qual_update",
    "quality_mean",
    "tiny_context",
]
