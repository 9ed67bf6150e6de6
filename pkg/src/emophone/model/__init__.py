from .network import (
    Example,
    ForwardTrace,
    attention,
    backward,
    batch_loss,
    conv_keys,
    encode,
    encode_corpus,
    forward,
    gradients,
    loss,
    lstm_forward,
    softmax,
)
from .optim import AdamState, adam_step, clip_by_global_norm, global_norm
from .params import (
    ModelConfig, ModelParams, init_params, load_checkpoint,
    load_token_vectors, save_checkpoint,
)
from .training import EpochLog, EvalResult, TrainConfig, TrainingError, TrainResult, evaluate, train

__all__ = [
    "AdamState", "EpochLog", "EvalResult", "Example", "ForwardTrace", "ModelConfig",
    "ModelParams", "TrainConfig", "TrainResult", "TrainingError", "adam_step", "attention",
    "backward", "batch_loss", "clip_by_global_norm", "conv_keys", "encode", "encode_corpus",
    "evaluate", "forward", "global_norm", "gradients", "init_params", "load_checkpoint",
    "load_token_vectors", "loss", "lstm_forward", "save_checkpoint", "softmax", "train",
]
