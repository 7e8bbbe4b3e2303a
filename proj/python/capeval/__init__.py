"""Caption evaluation with a vision-language model and meta-evaluation tools."""

from ._capeval import (
    CapevalError,
    bleu4,
    cider_d,
    digest_bytes,
    heatmap,
    kendall_tau,
    load_dataset,
    parse_score,
    parse_visual_context,
    pascal_accuracy,
    pearson,
    render_description_step1,
    render_reference,
    render_step2,
    render_vanilla,
    render_visce_step1,
    rouge_l,
    run_pipeline,
    tokenize,
)

__all__ = [
    "CapevalError",
    "bleu4",
    "cider_d",
    "digest_bytes",
    "heatmap",
    "kendall_tau",
    "load_dataset",
    "parse_score",
    "parse_visual_context",
    "pascal_accuracy",
    "pearson",
    "render_description_step1",
    "render_reference",
    "render_step2",
    "render_vanilla",
    "render_visce_step1",
    "rouge_l",
    "run_pipeline",
    "tokenize",
]
