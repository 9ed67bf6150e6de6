"""Seeded training loop and evaluation."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ..corpus import EMOTIONS
from .network import forward, gradients
from .optim import AdamState, adam_step
from .params import ModelConfig, init_params


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 16
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip_norm: float = 5.0
    seed: int = 42

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if not (self.learning_rate > 0 and self.eps > 0 and self.clip_norm > 0):
            raise ValueError("learning_rate, eps and clip_norm must be positive")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("adam betas must lie in (0, 1)")

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class EpochLog:
    epoch: int
    loss: float
    train_acc: float


@dataclass
class TrainResult:
    params: object
    log: list

    def log_csv(self):
        lines = ["epoch,loss,train_acc"]
        lines += [f"{e.epoch},{e.loss:.9g},{e.train_acc:.9g}" for e in self.log]
        return "\n".join(lines) + "\n"


@dataclass
class EvalResult:
    accuracy: float
    confusion: np.ndarray  # rows = true label, cols = predicted

    def per_class_counts(self):
        return self.confusion.sum(axis=1)


def weight_vector(class_weights):
    if isinstance(class_weights, dict):
        return np.array([class_weights[e] for e in EMOTIONS], dtype=np.float64)
    return np.asarray(class_weights, dtype=np.float64)


def predict(trace):
    # argmax picks the lowest label index on ties
    return int(np.argmax(trace.logits))


def train(
    train_set, config, class_weights, model_config=None, vocab_size=None,
    dtype=np.float32, pretrained=None,
):
    """Train from scratch on a list of ``Example``.

    Parameter init and the per-epoch shuffle both draw from
    ``np.random.default_rng(config.seed)``. ``pretrained`` maps embedding
    rows to vectors that overwrite their random init (they stay trainable).
    """
    if not train_set:
        raise TrainingError("empty training set")
    if model_config is None:
        if vocab_size is None:
            raise ValueError("need model_config or vocab_size")
        model_config = ModelConfig(vocab_size=vocab_size, n_mels=train_set[0].features.shape[1])
    rng = np.random.default_rng(config.seed)
    params = init_params(model_config, rng, dtype=dtype)
    for row, vec in (pretrained or {}).items():
        params["embeddings"][row] = vec
    state = AdamState.zeros(params)
    weights = weight_vector(class_weights)
    log = []
    n = len(train_set)
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        total_loss = 0.0
        correct = 0
        for b, start in enumerate(range(0, n, config.batch_size)):
            batch = [train_set[i] for i in order[start:start + config.batch_size]]
            batch_loss, grads, traces = gradients(batch, params, weights)
            if not math.isfinite(batch_loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {b}")
            total_loss += batch_loss * len(batch)
            correct += sum(predict(tr) == ex.label for tr, ex in zip(traces, batch))
            adam_step(
                params, grads, state,
                lr=config.learning_rate, beta1=config.beta1, beta2=config.beta2,
                eps=config.eps, clip_norm=config.clip_norm,
            )
            if not all(np.all(np.isfinite(p)) for p in params.values()):
                raise TrainingError(f"non-finite parameters after epoch {epoch}, batch {b}")
        log.append(EpochLog(epoch, total_loss / n, correct / n))
    return TrainResult(params, log)


def evaluate(test_set, params):
    if not test_set:
        raise ValueError("empty test set")
    k = params.config.n_classes
    confusion = np.zeros((k, k), dtype=np.int64)
    for ex in test_set:
        confusion[ex.label, predict(forward(ex, params))] += 1
    return EvalResult(float(np.trace(confusion)) / len(test_set), confusion)
