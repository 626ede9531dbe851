"""Python bindings over the kfvqa C++ core.

Exposes the pipeline's main operations: answer normalization, the VQA
accuracy metric, confidence scoring and gating, low-noise query assembly,
segment selection, and the exact top-r retrieval index.
"""

from ._kfvqa import (
    Index,
    KfvqaError,
    build_low_noise_query,
    confidence_score,
    decide_gate,
    normalize_answer,
    select_h,
    vqa_accuracy,
    vqa_match_count,
)

__all__ = [
    "Index",
    "KfvqaError",
    "build_low_noise_query",
    "confidence_score",
    "decide_gate",
    "normalize_answer",
    "select_h",
    "vqa_accuracy",
    "vqa_match_count",
]
