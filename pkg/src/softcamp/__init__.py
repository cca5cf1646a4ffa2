"""softcamp: plan, serve, simulate, and post-process multi-annotator
soft-label image classification campaigns."""

from .config import CampaignConfig
from .gating import AnnotatorLedger, AnnotatorStatus, GateConfig, GateMetric
from .labels import (
    AnnotationRecord,
    ClassDistribution,
    ConfusionMatrix,
    ImageLabelSet,
    aggregate,
    kl_divergence,
    macro_accuracy,
    macro_f1,
    majority_vote,
    uncertainty,
)
from .planning import (
    ConfidenceQuery,
    PlatformHint,
    PostProcessing,
    StrategyInputs,
    StrategyRecommendation,
    WorkloadInputs,
    estimate_workload,
    near_one_interval,
    recommend_strategy,
    required_annotations,
    wald_interval,
)
from .postprocessing import (
    BiasModel,
    DeltaPair,
    Method,
    PostprocessConfig,
    bias_correct,
    blend_only,
    class_blend,
    cleverlabel,
    estimate_confusion,
    estimate_delta,
    simulate_acceptance,
)
from .simulation import (
    AnnotatorProfile,
    CampaignReport,
    SyntheticDataset,
    SyntheticImage,
    annotate_image,
    generate_dataset,
    run_campaign,
    sample_annotation,
    simulate_delta_pairs,
    strategy_sweep,
)

__version__ = "0.1.0"
