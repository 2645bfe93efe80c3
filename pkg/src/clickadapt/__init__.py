"""Online-adaptive interactive segmentation with click-centred losses."""

from .core import (
    AdaptationConfig,
    Click,
    ClickSet,
    Image,
    LabelMask,
    ProbMap,
    validate_pair,
)
from .encoding import GuidanceStack, assemble_input, encode_clicks
from .engine import SessionState, StreamReport, mi_step, pi_adapt, pretrain, run_stream
from .losses import LossValue, ccg_loss, ccg_weight, df_loss, dice_loss, focal_loss, total_loss
from .metrics import MetricRecord, clicks_to_target, dice, union_region_dice
from .model import AdamUpdater, ClickSegmenter, ModelSpec, load_checkpoint, save_checkpoint
from .simulator import (
    CorruptionMode,
    ErrorComponent,
    SimulatedClicker,
    correction_click,
    corrupt_clicks,
    error_components,
    localization_click,
    pi_artificial_clicks,
    sample_k,
    training_clicks,
)
from .synthetic import Sample, ShiftTransform, SyntheticDomainSpec, generate_domain

__version__ = "0.1.0"

__all__ = [
    "AdaptationConfig",
    "AdamUpdater",
    "Click",
    "ClickSegmenter",
    "ClickSet",
    "CorruptionMode",
    "ErrorComponent",
    "GuidanceStack",
    "Image",
    "LabelMask",
    "LossValue",
    "MetricRecord",
    "ModelSpec",
    "ProbMap",
    "Sample",
    "SessionState",
    "ShiftTransform",
    "SimulatedClicker",
    "StreamReport",
    "SyntheticDomainSpec",
    "assemble_input",
    "ccg_loss",
    "ccg_weight",
    "clicks_to_target",
    "correction_click",
    "corrupt_clicks",
    "df_loss",
    "dice",
    "dice_loss",
    "encode_clicks",
    "error_components",
    "focal_loss",
    "generate_domain",
    "load_checkpoint",
    "localization_click",
    "mi_step",
    "pi_adapt",
    "pi_artificial_clicks",
    "pretrain",
    "run_stream",
    "sample_k",
    "save_checkpoint",
    "total_loss",
    "training_clicks",
    "union_region_dice",
    "validate_pair",
]
