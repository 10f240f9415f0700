from .ablation import AblationRow, run_ablation_table1, write_ablation
from .config import ConfigError, DataConfig, TrainConfig, load_config, parse_config_text
from .inference import (
    Distributions,
    VocabularyMismatch,
    baseline_distributions,
    decode,
    decode_actions,
    infer,
    marginal_distributions,
    predict_distributions,
    truths_of,
)
from .losses import action_targets, compute_loss
from .model import ModelOutput, QueryMamba
from .train import Checkpoint, TrainingDiverged, TrainResult, build_model, collate, train, write_loss_curve
