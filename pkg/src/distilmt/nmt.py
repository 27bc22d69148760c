"""Attentional encoder-decoder: multi-layer bidirectional LSTM encoder,
LSTM decoder with a bilinear attention context and input feeding.

Two execution paths share the same parameters and formulas: the public
single-sequence operations (encode / attention / decode_step /
sequence_nll), and a padded-batch loss used by the trainer where each row
carries its own source, so attention keys are built per position.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .corpus import BOS_ID, EOS_ID, PAD_ID, TokenSequence
from .tensor import Node, Rng


@dataclass(frozen=True)
class ModelConfig:
    layers: int
    hidden_size: int
    embed_size: int
    src_vocab: int
    tgt_vocab: int
    dropout_p: float = 0.0

    def __post_init__(self):
        for name in ("layers", "hidden_size", "embed_size", "src_vocab",
                     "tgt_vocab"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ValueError("dropout_p must be in [0, 1)")


_CONFIG_PREFIX = "__config__/"
_CONFIG_FIELDS = ("layers", "hidden_size", "embed_size", "src_vocab",
                  "tgt_vocab", "dropout_p")


def param_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Every learnable block and its shape, derived from the config."""
    h, e = cfg.hidden_size, cfg.embed_size
    shapes: dict[str, tuple[int, ...]] = {
        "src_embed": (cfg.src_vocab, e),
        "tgt_embed": (cfg.tgt_vocab, e),
    }
    for layer in range(cfg.layers):
        enc_in = e if layer == 0 else 2 * h
        for direction in ("fwd", "bwd"):
            shapes[f"enc{layer}_{direction}_W"] = (enc_in + h, 4 * h)
            shapes[f"enc{layer}_{direction}_b"] = (4 * h,)
        dec_in = e + h if layer == 0 else h
        shapes[f"dec{layer}_W"] = (dec_in + h, 4 * h)
        shapes[f"dec{layer}_b"] = (4 * h,)
    shapes["attn_W"] = (h, 2 * h)
    shapes["attn_out_W"] = (3 * h, h)
    shapes["out_W"] = (h, cfg.tgt_vocab)
    shapes["out_b"] = (cfg.tgt_vocab,)
    return shapes


class ModelParams:
    """All learnable weights, as graph parameter nodes keyed by name."""

    def __init__(self, config: ModelConfig, values: dict[str, np.ndarray]):
        self.config = config
        expected = param_shapes(config)
        if set(values) != set(expected):
            missing = set(expected) - set(values)
            extra = set(values) - set(expected)
            raise ValueError(f"parameter set mismatch: missing={sorted(missing)}"
                             f" extra={sorted(extra)}")
        self.blocks: dict[str, Node] = {}
        for name, shape in expected.items():
            arr = np.asarray(values[name], dtype=np.float64)
            if arr.shape != shape:
                raise ValueError(f"{name}: expected shape {shape}, got "
                                 f"{arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name}: non-finite values")
            self.blocks[name] = T.parameter(arr)

    @classmethod
    def init(cls, config: ModelConfig, rng: Rng) -> "ModelParams":
        """Uniform(-0.1, 0.1) initialization for every block, seeded."""
        values = {name: rng.uniform(-0.1, 0.1, shape)
                  for name, shape in param_shapes(config).items()}
        return cls(config, values)

    def __getitem__(self, name: str) -> Node:
        return self.blocks[name]

    def items(self):
        return self.blocks.items()

    def zero_grads(self) -> None:
        for node in self.blocks.values():
            node.zero_grad()

    def to_arrays(self) -> dict[str, np.ndarray]:
        return {name: node.value for name, node in self.blocks.items()}

    def serialize(self) -> bytes:
        records: dict[str, np.ndarray] = {}
        for name in _CONFIG_FIELDS:
            records[_CONFIG_PREFIX + name] = np.asarray(
                float(getattr(self.config, name)))
        records.update(self.to_arrays())
        return T.pack_params(records)

    def fingerprint(self) -> str:
        from . import fileio
        return fileio.sha256_bytes(self.serialize())

    def save(self, path) -> None:
        from . import fileio
        fileio.write_bytes_atomic(path, self.serialize())

    @classmethod
    def deserialize(cls, data: bytes) -> "ModelParams":
        records = T.unpack_params(data)
        kwargs = {}
        for name in _CONFIG_FIELDS:
            key = _CONFIG_PREFIX + name
            if key not in records:
                raise ValueError(f"model file missing config record {name}")
            raw = float(records.pop(key))
            kwargs[name] = raw if name == "dropout_p" else int(raw)
        return cls(ModelConfig(**kwargs), records)

    @classmethod
    def load(cls, path) -> "ModelParams":
        with open(path, "rb") as f:
            return cls.deserialize(f.read())


# ---------------------------------------------------------------------------
# recurrent pieces

def _split_hc(stacked: Node, hidden: int) -> tuple[Node, Node]:
    h = T.slice_(stacked, (slice(None), slice(0, hidden)))
    c = T.slice_(stacked, (slice(None), slice(hidden, 2 * hidden)))
    return h, c


def lstm_cell(x: Node, state: tuple[Node, Node],
              weights: tuple[Node, Node],
              mask_col: np.ndarray | None = None) -> tuple[Node, Node]:
    """One LSTM step: fused affine over [x; h] gives the [input, forget,
    output, candidate] preactivations, then the standard gating
    c' = f.c + i.g, h' = o.tanh(c')."""
    h, c = state
    hidden = c.value.shape[1]
    z = T.affine(T.concat([x, h], axis=1), weights[0], weights[1])
    return _split_hc(T.lstm_step(z, h, c, mask_col), hidden)


def _zeros(rows: int, width: int) -> Node:
    return T.constant(np.zeros((rows, width)))


def _sweep(inputs: list[Node], mask: np.ndarray | None, W: Node, b: Node,
           hidden: int, reverse: bool) -> tuple[list[Node], Node, Node]:
    """Run one LSTM direction over per-position input rows.

    Rows with mask 0 keep their previous state, so the final (h, c) sit at
    each row's last real token.  Returns per-position hidden states
    (aligned with input order) plus that final state.
    """
    rows = inputs[0].value.shape[0]
    h, c = _zeros(rows, hidden), _zeros(rows, hidden)
    order = range(len(inputs) - 1, -1, -1) if reverse else range(len(inputs))
    states: list[Node | None] = [None] * len(inputs)
    for t in order:
        col = mask[:, t:t + 1] if mask is not None else None
        h, c = lstm_cell(inputs[t], (h, c), (W, b), col)
        states[t] = h
    return states, h, c  # type: ignore[return-value]


def _encode_columns(src: np.ndarray, src_mask: np.ndarray | None,
                    params: ModelParams, cfg: ModelConfig, rng: Rng | None,
                    training: bool):
    """Shared bidirectional encoder over (rows, positions) id columns.

    Returns (forward states, backward states, combined states, per-layer
    final (h, c) pairs for both directions); all lists are per position.
    """
    rows, n_pos = src.shape
    inputs = [T.take_rows(params["src_embed"], src[:, t])
              for t in range(n_pos)]
    h = cfg.hidden_size
    layer_finals = []
    for layer in range(cfg.layers):
        if layer > 0 and training and cfg.dropout_p > 0.0:
            inputs = [T.dropout(x, cfg.dropout_p, rng, training)
                      for x in inputs]
        fwd, fh, fc = _sweep(inputs, src_mask, params[f"enc{layer}_fwd_W"],
                             params[f"enc{layer}_fwd_b"], h, reverse=False)
        bwd, bh, bc = _sweep(inputs, src_mask, params[f"enc{layer}_bwd_W"],
                             params[f"enc{layer}_bwd_b"], h, reverse=True)
        layer_finals.append(((fh, fc), (bh, bc)))
        inputs = [T.concat([fwd[t], bwd[t]], axis=1) for t in range(n_pos)]
    return fwd, bwd, inputs, layer_finals


@dataclass
class EncoderStates:
    """Per-position encoder outputs for one source sentence: forward and
    backward top-layer states plus their concatenation (width 2*hidden)."""

    forward: Node   # (J, hidden)
    backward: Node  # (J, hidden)
    combined: Node  # (J, 2*hidden)
    layer_finals: list  # [((fwd_h, fwd_c), (bwd_h, bwd_c))] per layer


def encode(src: TokenSequence, params: ModelParams, cfg: ModelConfig,
           rng: Rng | None = None, training: bool = False) -> EncoderStates:
    """Bidirectional encoding of one source sentence."""
    if len(src) == 0:
        raise ValueError("cannot encode an empty source sentence")
    for idx in src.ids:
        if not 0 <= idx < cfg.src_vocab:
            raise ValueError(f"source id {idx} out of range for vocabulary "
                             f"of size {cfg.src_vocab}")
    ids = np.asarray(src.ids, dtype=np.int64)[None, :]  # (1, J)
    fwd, bwd, combined, finals = _encode_columns(ids, None, params, cfg,
                                                 rng, training)
    return EncoderStates(
        forward=T.concat(fwd, axis=0),
        backward=T.concat(bwd, axis=0),
        combined=T.concat(combined, axis=0),
        layer_finals=finals,
    )


@dataclass
class DecoderState:
    """Per-layer (h, c) plus the previous attentional vector (input feed).
    Rows track however many hypotheses are decoded in lockstep."""

    layers: list[tuple[Node, Node]]
    input_feed: Node

    def select_rows(self, indices) -> "DecoderState":
        idx = np.asarray(indices, dtype=np.int64)
        return DecoderState(
            layers=[(T.take_rows(h, idx), T.take_rows(c, idx))
                    for h, c in self.layers],
            input_feed=T.take_rows(self.input_feed, idx),
        )


def _bridge(layer_finals, cfg: ModelConfig) -> list[tuple[Node, Node]]:
    """Decoder start state: per layer, tanh of summed direction finals."""
    out = []
    for (fh, fc), (bh, bc) in layer_finals:
        out.append((T.tanh(T.add(fh, bh)), T.tanh(T.add(fc, bc))))
    return out


def initial_decoder_state(enc: EncoderStates, cfg: ModelConfig,
                          rows: int = 1) -> DecoderState:
    layers = _bridge(enc.layer_finals, cfg)
    if rows != 1:
        idx = np.zeros(rows, dtype=np.int64)
        layers = [(T.take_rows(h, idx), T.take_rows(c, idx))
                  for h, c in layers]
    return DecoderState(layers=layers,
                        input_feed=_zeros(rows, cfg.hidden_size))


def attention(decoder_hidden: Node, enc: EncoderStates,
              params: ModelParams) -> tuple[Node, Node]:
    """Bilinear attention over one sentence's combined encoder states.

    scores[k, j] = decoder_hidden[k] . W_a . combined[j]; the context is
    the weight-averaged combined state, width 2*hidden.
    """
    keys = T.matmul(decoder_hidden, params["attn_W"])          # (k, 2H)
    scores = T.matmul(keys, enc.combined, transpose_b=True)    # (k, J)
    weights = T.softmax(scores, axis=-1)
    context = T.matmul(weights, enc.combined)                  # (k, 2H)
    return context, weights


def _decoder_stack(x: Node, state: DecoderState, params: ModelParams,
                   cfg: ModelConfig, rng: Rng | None, training: bool,
                   ) -> tuple[Node, list[tuple[Node, Node]]]:
    new_layers = []
    for layer in range(cfg.layers):
        if layer > 0 and training and cfg.dropout_p > 0.0:
            x = T.dropout(x, cfg.dropout_p, rng, training)
        h, c = lstm_cell(x, state.layers[layer],
                         (params[f"dec{layer}_W"], params[f"dec{layer}_b"]))
        new_layers.append((h, c))
        x = h
    return x, new_layers


def decode_step(prev_id, state: DecoderState, enc: EncoderStates,
                params: ModelParams, cfg: ModelConfig,
                rng: Rng | None = None, training: bool = False,
                ) -> tuple[Node, DecoderState]:
    """One decoder step: embed the previous target token, concatenate the
    input feed, run the stacked LSTM, attend, and project to logits.  The
    new state carries the attentional vector as the next input feed.

    ``prev_id`` may be a single id or one id per decoded row.
    """
    ids = np.atleast_1d(np.asarray(prev_id, dtype=np.int64))
    if ids.size and (ids.min() < 0 or ids.max() >= cfg.tgt_vocab):
        raise ValueError(f"target id out of range for vocabulary of size "
                         f"{cfg.tgt_vocab}: {ids}")
    x = T.concat([T.take_rows(params["tgt_embed"], ids), state.input_feed],
                 axis=1)
    top, new_layers = _decoder_stack(x, state, params, cfg, rng, training)
    context, _ = attention(top, enc, params)
    hhat = T.tanh(T.matmul(T.concat([context, top], axis=1),
                           params["attn_out_W"]))
    logits = T.affine(hhat, params["out_W"], params["out_b"])
    return logits, DecoderState(layers=new_layers, input_feed=hhat)


@dataclass
class NllResult:
    """Teacher-forced loss for one pair: total over I+1 predictions (every
    target word plus the closing EOS) and the token count behind it."""

    total: Node
    count: int

    @property
    def mean(self) -> float:
        return float(self.total.value) / self.count


def sequence_nll(src: TokenSequence, tgt: TokenSequence, params: ModelParams,
                 cfg: ModelConfig, rng: Rng | None = None,
                 training: bool = False) -> NllResult:
    """Sum of per-position cross entropies under teacher forcing."""
    if len(tgt) == 0:
        raise ValueError("cannot score an empty target sentence")
    enc = encode(src, params, cfg, rng, training)
    state = initial_decoder_state(enc, cfg)
    inputs = (BOS_ID,) + tgt.ids
    targets = tgt.ids + (EOS_ID,)
    total: Node | None = None
    for prev, want in zip(inputs, targets):
        logits, state = decode_step(prev, state, enc, params, cfg, rng,
                                    training)
        ce = T.cross_entropy(logits, want)
        total = ce if total is None else T.add(total, ce)
    return NllResult(total=total, count=len(targets))


# ---------------------------------------------------------------------------
# padded-batch loss (trainer path)

def _attend_rows(dh: Node, keys: Node, values: Node,
                 add_mask: np.ndarray | None) -> Node:
    """Attention where every batch row has its own source memory; keys and
    values are (positions, rows, width) stacks."""
    scores = T.dot_stack(dh, keys)  # (B, J)
    if add_mask is not None:
        scores = T.add(scores, T.constant(add_mask))
    weights = T.softmax(scores, axis=1)
    return T.mix_stack(weights, values)


def batch_nll(src: np.ndarray, src_mask: np.ndarray, tgt_in: np.ndarray,
              tgt_out: np.ndarray, tgt_mask: np.ndarray, params: ModelParams,
              cfg: ModelConfig, rng: Rng | None, training: bool,
              ) -> tuple[Node, float]:
    """Masked cross entropy over a padded batch.

    Returns the summed loss node and the number of real target tokens it
    covers; padding positions contribute nothing to either.
    """
    rows, steps = tgt_in.shape
    _, _, combined, finals = _encode_columns(src, src_mask, params, cfg, rng,
                                             training)
    state = DecoderState(layers=_bridge(finals, cfg),
                         input_feed=_zeros(rows, cfg.hidden_size))
    # attention keys depend only on the encoder, so build them once
    values = T.stack_rows(combined)
    keys = T.matmul_stack(values, params["attn_W"], transpose_w=True)
    add_mask = (src_mask - 1.0) * 1e9 if not np.all(src_mask == 1.0) else None

    total: Node | None = None
    for t in range(steps):
        weights_col = tgt_mask[:, t]
        x = T.concat([T.take_rows(params["tgt_embed"], tgt_in[:, t]),
                      state.input_feed], axis=1)
        top, new_layers = _decoder_stack(x, state, params, cfg, rng, training)
        context = _attend_rows(top, keys, values, add_mask)
        hhat = T.tanh(T.matmul(T.concat([context, top], axis=1),
                               params["attn_out_W"]))
        logits = T.affine(hhat, params["out_W"], params["out_b"])
        ce = T.cross_entropy(logits, tgt_out[:, t], weights=weights_col)
        total = ce if total is None else T.add(total, ce)
        state = DecoderState(layers=new_layers, input_feed=hhat)
    return total, float(tgt_mask.sum())
