from .evaluation import (
    ABLATION_AXES,
    BASELINES,
    MissingChannelConfig,
    ablation_suite,
    ablation_variants,
    activation_csv,
    activation_maps,
    channel_sweep,
    draw_masks,
    evaluate,
    export_triplets,
    missing_channel_experiment,
    rate_sweep,
    run_baselines,
    score,
)
from .pipeline import (
    PipelineConfig,
    load_pairs,
    record_to_pairs,
    run_preprocessing,
    save_pairs,
    select,
    write_synthetic_dataset,
)
from .reference import REFERENCE_TARGETS, ReferenceTarget, target
from .report import ExperimentReport, aggregate, fingerprint

__all__ = [
    "PipelineConfig", "run_preprocessing", "write_synthetic_dataset", "save_pairs", "load_pairs", "select",
    "record_to_pairs",
    "ExperimentReport", "aggregate", "fingerprint",
    "REFERENCE_TARGETS", "ReferenceTarget", "target",
    "evaluate", "score", "run_baselines", "BASELINES",
    "MissingChannelConfig", "draw_masks", "missing_channel_experiment", "channel_sweep", "rate_sweep",
    "ABLATION_AXES", "ablation_variants", "ablation_suite",
    "activation_maps", "activation_csv", "export_triplets",
]
