"""Beam-search decoding over a frozen model.

Hypotheses are expanded over the full vocabulary each step and ranked by
cumulative log probability (no length normalization by default).  A
hypothesis that emits EOS is frozen and keeps competing on its final
score.  Decoding stops when every slot is finished or the length ceiling
ceil(max_len_factor * J) + max_len_offset is reached.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import nmt
from . import tensor as T
from .corpus import BOS_ID, EOS_ID, TokenSequence
from .nmt import DecoderState, ModelParams


class UnkPolicy(Enum):
    ALLOW = "allow"
    SUPPRESS = "suppress"


@dataclass(frozen=True)
class DecodeConfig:
    beam_size: int = 5
    max_len_factor: float = 2.0
    max_len_offset: int = 5
    unk_policy: UnkPolicy = UnkPolicy.ALLOW
    length_normalize: bool = False

    def __post_init__(self):
        if self.beam_size < 1:
            raise ValueError("beam_size must be >= 1")

    def max_len(self, src_len: int) -> int:
        return math.ceil(self.max_len_factor * src_len) + self.max_len_offset


@dataclass
class BeamHypothesis:
    """One decoded candidate: emitted ids (EOS included when finished) and
    the summed log probability of those emissions."""

    tokens: tuple[int, ...]
    score: float
    state: DecoderState | None
    finished: bool

    @property
    def surface(self) -> TokenSequence:
        """Emitted tokens with the closing EOS stripped."""
        ids = self.tokens[:-1] if self.finished else self.tokens
        return TokenSequence(tuple(ids))

    def ranking_score(self, normalize: bool) -> float:
        if normalize and self.tokens:
            return self.score / len(self.tokens)
        return self.score


def _log_softmax(rows: np.ndarray) -> np.ndarray:
    m = rows.max(axis=1, keepdims=True)
    z = rows - m
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def beam_search(params: ModelParams, src: TokenSequence,
                cfg: DecodeConfig = DecodeConfig(),
                return_nbest: bool = False):
    """Decode one source sentence.

    Returns the best hypothesis, or the full candidate list sorted by
    score when ``return_nbest`` is set.  If nothing finished before the
    length ceiling, the best unfinished hypothesis is returned.
    """
    if len(src) == 0:
        raise ValueError("cannot decode an empty source sentence")
    model_cfg = params.config
    limit = cfg.max_len(len(src))
    with T.no_grad():
        enc = nmt.encode(src, params, model_cfg)
        live = [BeamHypothesis((), 0.0,
                               nmt.initial_decoder_state(enc, model_cfg),
                               False)]
        finished: list[BeamHypothesis] = []
        prev_ids = np.array([BOS_ID], dtype=np.int64)
        state = live[0].state

        while live and len(live[0].tokens) < limit:
            logits, state = nmt.decode_step(prev_ids, state, enc, params,
                                            model_cfg)
            logp = _log_softmax(logits.value)  # (k, V)
            if cfg.unk_policy is UnkPolicy.SUPPRESS:
                logp[:, 1] = -np.inf  # UNK_ID
            totals = np.array([h.score for h in live])[:, None] + logp
            flat = totals.ravel()
            k = min(cfg.beam_size, flat.size)
            # stable order: ties go to the lower hypothesis row, then the
            # lower token id, which makes beam_size=1 match a greedy argmax
            top = np.argsort(-flat, kind="stable")[:k]
            vocab = logp.shape[1]
            new_live: list[BeamHypothesis] = []
            keep_rows: list[int] = []
            for idx in top:
                row, tok = divmod(int(idx), vocab)
                hyp = BeamHypothesis(live[row].tokens + (tok,),
                                     float(flat[idx]), None, tok == EOS_ID)
                if hyp.finished:
                    finished.append(hyp)
                else:
                    new_live.append(hyp)
                    keep_rows.append(row)
            live = new_live
            if live:
                state = state.select_rows(keep_rows)
                prev_ids = np.array([h.tokens[-1] for h in live],
                                    dtype=np.int64)

    pool = finished if finished else live
    ranked = sorted(pool, key=lambda h: -h.ranking_score(cfg.length_normalize))
    if return_nbest:
        return ranked
    return ranked[0]


@dataclass
class TranslationResult:
    hypothesis: BeamHypothesis | None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.hypothesis is not None

    def surface_ids(self) -> tuple[int, ...]:
        return self.hypothesis.surface.ids if self.ok else ()


def translate_corpus(params: ModelParams, sources: list[TokenSequence],
                     cfg: DecodeConfig = DecodeConfig(),
                     threads: int = 1) -> list[TranslationResult]:
    """Decode a list of sentences, preserving order.  Per-sentence failures
    become empty results carrying the diagnostic instead of aborting."""

    def one(src: TokenSequence) -> TranslationResult:
        try:
            return TranslationResult(beam_search(params, src, cfg))
        except Exception as exc:  # noqa: BLE001 - recorded, not fatal
            return TranslationResult(None, error=f"{type(exc).__name__}: {exc}")

    if threads > 1 and len(sources) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, sources))
    return [one(s) for s in sources]


def greedy_rollout(params: ModelParams, src: TokenSequence,
                   cfg: DecodeConfig = DecodeConfig()) -> BeamHypothesis:
    """Step-wise argmax decoding; the beam_size=1 reference behaviour."""
    model_cfg = params.config
    limit = cfg.max_len(len(src))
    with T.no_grad():
        enc = nmt.encode(src, params, model_cfg)
        state = nmt.initial_decoder_state(enc, model_cfg)
        prev = BOS_ID
        tokens: list[int] = []
        score = 0.0
        while len(tokens) < limit:
            logits, state = nmt.decode_step(prev, state, enc, params,
                                            model_cfg)
            logp = _log_softmax(logits.value)[0]
            if cfg.unk_policy is UnkPolicy.SUPPRESS:
                logp[1] = -np.inf
            tok = int(np.argmax(logp))
            tokens.append(tok)
            score += float(logp[tok])
            if tok == EOS_ID:
                return BeamHypothesis(tuple(tokens), score, None, True)
            prev = tok
    return BeamHypothesis(tuple(tokens), score, None, False)


def format_nbest(index: int, hyps: list[BeamHypothesis],
                 to_tokens) -> list[str]:
    """n-best lines: "index ||| hypothesis ||| score"."""
    lines = []
    for h in hyps:
        text = " ".join(to_tokens(h.surface))
        lines.append(f"{index} ||| {text} ||| {h.score:.6f}")
    return lines
