"""Plain SGD training loop: per-epoch shuffled mini-batches, per-token
loss normalization, global gradient-norm clipping, and a stepwise learning
rate decay that kicks in after a configured epoch."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import nmt
from . import tensor as T
from .corpus import BOS_ID, EOS_ID, PAD_ID, ParallelCorpus
from .nmt import ModelConfig, ModelParams
from .tensor import Rng

# rng stream tags so init / dropout / shuffling never collide
_STREAM_INIT = 1
_STREAM_DROPOUT = 2
_STREAM_SHUFFLE = 3


class TrainingDiverged(RuntimeError):
    """Raised when the loss goes NaN or infinite."""


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 18
    batch_size: int = 64
    lr0: float = 1.0
    decay: float = 0.5
    decay_start_epoch: int = 10
    grad_clip: float = 5.0
    seed: int = 1
    length_bucketing: bool = False

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if not 0.0 < self.decay <= 1.0:
            raise ValueError("decay must be in (0, 1]")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


def lr_schedule(epoch: int, cfg: TrainConfig) -> float:
    """Learning rate for a 1-based epoch: lr0 until decay_start_epoch,
    then multiplied by the decay factor once per later epoch."""
    if epoch < 1:
        raise ValueError("epoch is 1-based")
    if epoch <= cfg.decay_start_epoch:
        return cfg.lr0
    return cfg.lr0 * cfg.decay ** (epoch - cfg.decay_start_epoch)


@dataclass
class Batch:
    """Padded id matrices for one mini-batch.  Masks are 1.0 on real
    tokens and 0.0 on padding; target masks count the closing EOS."""

    src: np.ndarray        # (B, Jmax) int64
    src_mask: np.ndarray   # (B, Jmax) float64
    tgt_in: np.ndarray     # (B, Imax+1) int64, starts with BOS
    tgt_out: np.ndarray    # (B, Imax+1) int64, ends with EOS
    tgt_mask: np.ndarray   # (B, Imax+1) float64

    def __len__(self) -> int:
        return self.src.shape[0]

    @property
    def token_count(self) -> float:
        return float(self.tgt_mask.sum())


def _pad_batch(pairs) -> Batch:
    b = len(pairs)
    jmax = max(len(s) for s, _ in pairs)
    tmax = max(len(t) for _, t in pairs) + 1  # room for EOS / BOS shift
    src = np.full((b, jmax), PAD_ID, dtype=np.int64)
    src_mask = np.zeros((b, jmax))
    tgt_in = np.full((b, tmax), PAD_ID, dtype=np.int64)
    tgt_out = np.full((b, tmax), PAD_ID, dtype=np.int64)
    tgt_mask = np.zeros((b, tmax))
    for r, (s, t) in enumerate(pairs):
        src[r, :len(s)] = s.ids
        src_mask[r, :len(s)] = 1.0
        tgt_in[r, 0] = BOS_ID
        tgt_in[r, 1:len(t) + 1] = t.ids
        tgt_out[r, :len(t)] = t.ids
        tgt_out[r, len(t)] = EOS_ID
        tgt_mask[r, :len(t) + 1] = 1.0
    return Batch(src, src_mask, tgt_in, tgt_out, tgt_mask)


def make_batches(corpus: ParallelCorpus, batch_size: int, seed: int,
                 epoch: int, length_bucketing: bool = False) -> list[Batch]:
    """Deterministic epoch-dependent shuffle, then fixed-size chunks.
    Every pair appears in exactly one batch."""
    if len(corpus) == 0:
        raise ValueError("cannot batch an empty corpus")
    rng = Rng(seed, (_STREAM_SHUFFLE, epoch))
    order = rng.permutation(len(corpus)).tolist()
    if length_bucketing:
        order.sort(key=lambda i: len(corpus.pairs[i][0]))
    chunks = [order[i:i + batch_size]
              for i in range(0, len(order), batch_size)]
    if length_bucketing:
        chunk_order = rng.permutation(len(chunks)).tolist()
        chunks = [chunks[i] for i in chunk_order]
    return [_pad_batch([corpus.pairs[i] for i in chunk]) for chunk in chunks]


@dataclass
class EpochRecord:
    epoch: int
    lr: float
    train_nll: float
    valid_nll: float
    valid_bleu: float | None = None


@dataclass
class TrainHistory:
    records: list[EpochRecord] = field(default_factory=list)

    def to_tsv(self) -> str:
        lines = []
        for r in self.records:
            lines.append(f"{r.epoch}\t{r.lr:.6g}\t{r.train_nll:.6f}\t"
                         f"{r.valid_nll:.6f}")
        return "".join(line + "\n" for line in lines)


def clip_gradients(params: ModelParams, max_norm: float) -> float:
    """Scale all gradients so their global L2 norm is at most max_norm.
    Returns the pre-clip norm."""
    total = 0.0
    for _, node in params.items():
        if node.grad is not None:
            total += float((node.grad * node.grad).sum())
    norm = math.sqrt(total)
    if norm > max_norm and norm > 0.0:
        factor = max_norm / norm
        for _, node in params.items():
            if node.grad is not None:
                node.grad = node.grad * factor
    return norm


def sgd_step(params: ModelParams, lr: float) -> None:
    for _, node in params.items():
        if node.grad is not None:
            node.value = node.value - lr * node.grad
    params.zero_grads()


def corpus_nll(corpus: ParallelCorpus, params: ModelParams,
               batch_size: int = 64) -> float:
    """Per-token NLL of a corpus in evaluation mode (no dropout)."""
    total = 0.0
    tokens = 0.0
    with T.no_grad():
        for i in range(0, len(corpus), batch_size):
            batch = _pad_batch(corpus.pairs[i:i + batch_size])
            loss, count = nmt.batch_nll(batch.src, batch.src_mask,
                                        batch.tgt_in, batch.tgt_out,
                                        batch.tgt_mask, params,
                                        params.config, None, False)
            total += float(loss.value)
            tokens += count
    return total / tokens


def train(corpus: ParallelCorpus, valid: ParallelCorpus | None,
          model_config: ModelConfig, cfg: TrainConfig,
          out_dir=None, init: ModelParams | None = None,
          log=None) -> tuple[ModelParams, TrainHistory]:
    """Train a model from scratch (or from ``init``) with SGD.

    Per batch: mean per-token NLL, backward, clip the global gradient norm,
    apply the scheduled learning rate.  The final-epoch parameters are
    returned; the best-validation checkpoint is additionally saved when
    ``out_dir`` is given.
    """
    if init is None:
        params = ModelParams.init(model_config, Rng(cfg.seed, (_STREAM_INIT,)))
    else:
        params = init
    history = TrainHistory()
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    best_valid = math.inf
    dropout_rng = Rng(cfg.seed, (_STREAM_DROPOUT,))

    for epoch in range(1, cfg.epochs + 1):
        lr = lr_schedule(epoch, cfg)
        batches = make_batches(corpus, cfg.batch_size, cfg.seed, epoch,
                               cfg.length_bucketing)
        epoch_loss = 0.0
        epoch_tokens = 0.0
        for b, batch in enumerate(batches):
            loss, count = nmt.batch_nll(batch.src, batch.src_mask,
                                        batch.tgt_in, batch.tgt_out,
                                        batch.tgt_mask, params, model_config,
                                        dropout_rng, True)
            value = float(loss.value)
            if not math.isfinite(value):
                raise TrainingDiverged(f"non-finite loss {value} at epoch "
                                       f"{epoch}, batch {b}")
            mean = T.scale(loss, 1.0 / count)
            T.backward(mean)
            clip_gradients(params, cfg.grad_clip)
            sgd_step(params, lr)
            epoch_loss += value
            epoch_tokens += count
        train_nll = epoch_loss / epoch_tokens
        valid_nll = corpus_nll(valid, params, cfg.batch_size) \
            if valid is not None and len(valid) else float("nan")
        history.records.append(EpochRecord(epoch, lr, train_nll, valid_nll))
        if log is not None:
            log(f"epoch {epoch}: lr={lr:.4g} train_nll={train_nll:.4f} "
                f"valid_nll={valid_nll:.4f}")
        if out_dir is not None:
            params.save(out_dir / f"epoch_{epoch:03d}.params")
            if math.isfinite(valid_nll) and valid_nll < best_valid:
                best_valid = valid_nll
                params.save(out_dir / "best.params")
            from . import fileio
            fileio.write_text_atomic(out_dir / "history.tsv", history.to_tsv())
    return params, history
