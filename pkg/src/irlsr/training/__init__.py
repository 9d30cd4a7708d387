"""Stage-wise training, validation, checkpoints and ablations."""
from .ablation import AblationRow, format_csv, format_markdown, run_ablation
from .checkpoint import (
    Checkpoint,
    CheckpointError,
    CorruptCheckpointError,
    TrainState,
    VersionMismatchError,
    load_checkpoint,
    save_checkpoint,
)
from .train import (
    Metrics,
    NumericalError,
    StageError,
    TrainConfig,
    infer,
    initial_stage_loss,
    train_stage,
    validate,
)

__all__ = [
    "AblationRow", "Checkpoint", "CheckpointError", "CorruptCheckpointError", "Metrics",
    "NumericalError", "StageError", "TrainConfig", "TrainState", "VersionMismatchError",
    "format_csv", "format_markdown", "infer", "initial_stage_loss", "load_checkpoint", "run_ablation",
    "save_checkpoint", "train_stage", "validate",
]
