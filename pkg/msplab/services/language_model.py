"""
Byte-level residual MLP language model.

Forward:  x = concat(E[c_1..c_k]);  z = relu(W_in x);  z <- z + relu(W_b z) per block;
          logits = W_out z;  loss = mean NLL of the target byte.
Gradients are exact reverse-mode, written out by hand.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from pydantic import ValidationError
from scipy.special import log_softmax

from msplab.core.config import settings
from msplab.core.errors import ConfigurationError, InputError, NumericalError
from msplab.models import (
    CalibrationSet,
    GradientSet,
    ModelParams,
    NmMaskSet,
    TokenWindowBatch,
    as_tokens,
)
from msplab.models.batch import TokenSource
from msplab.schemas.model import VOCAB_SIZE, ModelConfig, TrainHyper

logger = logging.getLogger(__name__)


def validate_config(config: ModelConfig) -> ModelConfig:
    """Re-check every ModelConfig invariant (also for model_construct'ed configs)."""
    try:
        return ModelConfig.model_validate(config.model_dump())
    except ValidationError as e:
        raise ConfigurationError("; ".join(err["msg"] for err in e.errors())) from e


def init_model(config: ModelConfig, seed: int) -> ModelParams:
    """Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights, Uniform(-0.1, 0.1) embedding."""
    config = validate_config(config)
    rng = np.random.default_rng(seed)
    d, h, k = config.embed_dim, config.hidden_dim, config.window

    def draw(rows: int, cols: int) -> np.ndarray:
        bound = 1.0 / math.sqrt(cols)
        return rng.uniform(-bound, bound, size=(rows, cols))

    embedding = rng.uniform(-0.1, 0.1, size=(VOCAB_SIZE, d))
    W_in = draw(h, k * d)
    hidden = tuple(draw(h, h) for _ in range(config.num_hidden_blocks))
    W_out = draw(VOCAB_SIZE, h)
    return ModelParams(config=config, embedding=embedding, W_in=W_in, hidden=hidden, W_out=W_out)


def zero_model(config: ModelConfig) -> ModelParams:
    """All-zero parameters: uniform next-byte distribution."""
    config = validate_config(config)
    d, h, k = config.embed_dim, config.hidden_dim, config.window
    return ModelParams(
        config=config,
        embedding=np.zeros((VOCAB_SIZE, d)),
        W_in=np.zeros((h, k * d)),
        hidden=tuple(np.zeros((h, h)) for _ in range(config.num_hidden_blocks)),
        W_out=np.zeros((VOCAB_SIZE, h)),
    )


@dataclass
class ForwardPass:
    """Intermediate values of one batched forward pass."""

    contexts: np.ndarray
    x: np.ndarray  # (B, k*d) concatenated embeddings
    pre_in: np.ndarray  # W_in x
    pre_hidden: List[np.ndarray]  # W_b z_b per block
    z: List[np.ndarray]  # z_0 .. z_{L_h}
    log_probs: np.ndarray  # (B, 256)

    @property
    def layer_inputs(self) -> List[np.ndarray]:
        """Input of every prunable layer, in prunable-layer order."""
        return [self.x, *self.z]


def _forward(params: ModelParams, contexts: np.ndarray) -> ForwardPass:
    batch_size = contexts.shape[0]
    x = params.embedding[contexts].reshape(batch_size, -1)
    pre_in = x @ params.W_in.T
    z = np.maximum(pre_in, 0.0)
    zs = [z]
    pre_hidden = []
    for W in params.hidden:
        pre = z @ W.T
        z = z + np.maximum(pre, 0.0)
        pre_hidden.append(pre)
        zs.append(z)
    logits = z @ params.W_out.T
    return ForwardPass(
        contexts=contexts,
        x=x,
        pre_in=pre_in,
        pre_hidden=pre_hidden,
        z=zs,
        log_probs=log_softmax(logits, axis=1),
    )


def run_forward(params: ModelParams, batch: TokenWindowBatch) -> ForwardPass:
    batch.check(params.config.window)
    return _forward(params, batch.contexts)


def _nll(forward: ForwardPass, targets: np.ndarray) -> np.ndarray:
    return -forward.log_probs[np.arange(targets.shape[0]), targets]


def forward_loss(params: ModelParams, batch: TokenWindowBatch) -> float:
    """Mean next-token negative log-likelihood over the batch."""
    forward = run_forward(params, batch)
    loss = float(np.mean(_nll(forward, batch.targets)))
    if not math.isfinite(loss):
        raise NumericalError("non-finite loss")
    return loss


def per_sample_losses(params: ModelParams, batch: TokenWindowBatch) -> np.ndarray:
    return _nll(run_forward(params, batch), batch.targets)


def layer_signals(
    params: ModelParams, forward: ForwardPass, targets: np.ndarray, scale: float
) -> Tuple[List[Tuple[np.ndarray, np.ndarray]], np.ndarray]:
    """Backward pass.

    Returns, per prunable layer, (delta, input) with delta = dLoss/d(pre-activation)
    so that the layer gradient is delta.T @ input, plus dLoss/dx for the embedding.
    Row n of every delta depends only on sample n; with scale=1 the rows are the
    per-sample signals of the unaveraged sample losses.
    """
    batch_size = targets.shape[0]
    delta_out = np.exp(forward.log_probs)
    delta_out[np.arange(batch_size), targets] -= 1.0
    delta_out *= scale

    signals: List[Tuple[np.ndarray, np.ndarray]] = [(delta_out, forward.z[-1])]
    dz = delta_out @ params.W_out
    for b in range(len(params.hidden) - 1, -1, -1):
        delta = dz * (forward.pre_hidden[b] > 0.0)
        signals.append((delta, forward.z[b]))
        dz = dz + delta @ params.hidden[b]
    delta_in = dz * (forward.pre_in > 0.0)
    signals.append((delta_in, forward.x))
    signals.reverse()
    dx = delta_in @ params.W_in
    return signals, dx


def gradient(params: ModelParams, batch: TokenWindowBatch) -> GradientSet:
    """Exact gradient of forward_loss with respect to every parameter tensor."""
    forward = run_forward(params, batch)
    signals, dx = layer_signals(params, forward, batch.targets, 1.0 / len(batch))
    matrices = [delta.T @ inputs for delta, inputs in signals]

    d = params.config.embed_dim
    d_embedding = np.zeros_like(params.embedding)
    np.add.at(d_embedding, batch.contexts.reshape(-1), dx.reshape(-1, d))
    return GradientSet(
        config=params.config,
        embedding=d_embedding,
        W_in=matrices[0],
        hidden=tuple(matrices[1:-1]),
        W_out=matrices[-1],
    )


def train_model(
    params: ModelParams, corpus_tokens: TokenSource, hyper: TrainHyper
) -> Tuple[ModelParams, List[float]]:
    """Plain SGD over seeded-shuffled windows; returns params and per-epoch mean loss."""
    tokens = as_tokens(corpus_tokens)
    window = params.config.window
    if tokens.shape[0] <= window + 1:
        raise InputError(f"corpus of {tokens.shape[0]} bytes too short for window {window}")

    windows = TokenWindowBatch.from_tokens(tokens, window)
    windows.check(window)
    rng = np.random.default_rng(hyper.seed)
    count = len(windows)
    loss_curve: List[float] = []

    for epoch in range(hyper.epochs):
        order = rng.permutation(count)
        total = 0.0
        for start in range(0, count, hyper.batch_size):
            idx = order[start:start + hyper.batch_size]
            batch = TokenWindowBatch(windows.contexts[idx], windows.targets[idx])
            forward = _forward(params, batch.contexts)
            total += float(np.sum(_nll(forward, batch.targets)))
            if hyper.lr > 0:
                signals, dx = layer_signals(params, forward, batch.targets, 1.0 / len(batch))
                params = _sgd_step(params, batch, signals, dx, hyper.lr)
        epoch_loss = total / count
        if not math.isfinite(epoch_loss):
            raise NumericalError(f"training diverged at epoch {epoch}")
        loss_curve.append(epoch_loss)
        logger.info(f"epoch {epoch + 1}/{hyper.epochs}: mean loss {epoch_loss:.4f}")

    return params, loss_curve


def _sgd_step(
    params: ModelParams,
    batch: TokenWindowBatch,
    signals: List[Tuple[np.ndarray, np.ndarray]],
    dx: np.ndarray,
    lr: float,
) -> ModelParams:
    updated = [W - lr * (delta.T @ inputs) for W, (delta, inputs) in zip(params.prunable(), signals)]
    d_embedding = np.zeros_like(params.embedding)
    np.add.at(d_embedding, batch.contexts.reshape(-1), dx.reshape(-1, params.config.embed_dim))
    stepped = params.with_prunable(updated)
    return stepped.with_tensor("embedding", params.embedding - lr * d_embedding)


def apply_masks(params: ModelParams, masks: NmMaskSet) -> ModelParams:
    """New params with pruned positions zeroed; the input is left untouched."""
    prunable = params.prunable()
    if len(masks) != len(prunable):
        raise InputError(f"mask set has {len(masks)} layers, model has {len(prunable)}")
    masked = []
    for name, W, keep in zip(params.config.layer_names, prunable, masks.keep):
        if keep.shape != W.shape:
            raise InputError(f"mask shape {keep.shape} != weight shape {W.shape} for {name}")
        masked.append(np.where(keep, W, 0.0))
    return params.with_prunable(masked)


def perplexity(
    params: ModelParams,
    tokens: TokenSource,
    masks: Optional[NmMaskSet] = None,
    chunk: Optional[int] = None,
) -> float:
    """exp(mean NLL) over every window of the sequence, in order."""
    stream = as_tokens(tokens)
    window = params.config.window
    if stream.shape[0] <= window:
        raise InputError(f"sequence of {stream.shape[0]} tokens too short for window {window}")

    effective = apply_masks(params, masks) if masks is not None else params
    windows = TokenWindowBatch.from_tokens(stream, window)
    windows.check(window)
    step = chunk or settings.MSP_EVAL_CHUNK
    nll = [
        _nll(_forward(effective, windows.contexts[s:s + step]), windows.targets[s:s + step])
        for s in range(0, len(windows), step)
    ]
    mean_nll = math.fsum(np.concatenate(nll).tolist()) / len(windows)
    ppl = math.exp(mean_nll)
    if not math.isfinite(ppl):
        raise NumericalError("non-finite perplexity")
    return ppl


def calibration_loss(params: ModelParams, calib: CalibrationSet) -> float:
    """L(theta) = mean of the per-sample calibration losses."""
    return forward_loss(params, calib.as_batch())
