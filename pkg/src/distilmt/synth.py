"""Synthetic parallel corpora with a controllable literal/free split.

Source sentences are random token strings.  Every source token has exactly
one "literal" target token (a bijective lexicon); a literal pair is the
token-by-token mapping.  A "free" pair starts literal and is then roughed
up: content tokens swapped for same-class synonyms, local reorderings
within a window, and occasional function-token insertions or deletions.
The underlying content-class multiset survives all three, so adequacy of a
free target is mechanically checkable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .corpus import ParallelCorpus, TargetKind, TokenSequence, Vocabulary
from .tensor import Rng

_STREAM_TRAIN, _STREAM_VALID, _STREAM_TEST = 11, 12, 13


@dataclass(frozen=True)
class SynthConfig:
    vocab_size: int = 500
    sentence_count: int = 5000
    valid_count: int = 500
    test_count: int = 500
    len_min: int = 4
    len_max: int = 12
    free_prob: float = 0.5
    reorder_window: int = 2
    synonym_classes: int = 100
    seed: int = 1
    function_rate: float = 0.15     # chance a position is a function token
    substitute_prob: float = 0.35   # per content token, inside free pairs
    insert_prob: float = 0.5        # one function-token insertion
    delete_prob: float = 0.35       # one function-token deletion

    def __post_init__(self):
        if not 0.0 <= self.free_prob <= 1.0:
            raise ValueError("free_prob must be in [0, 1]")
        if self.reorder_window < 0:
            raise ValueError("reorder_window must be >= 0")
        if not 1 <= self.len_min <= self.len_max:
            raise ValueError("need 1 <= len_min <= len_max")
        if self.vocab_size < 8:
            raise ValueError("vocab_size must be >= 8")

    @property
    def function_count(self) -> int:
        return max(2, round(self.vocab_size * 0.05))

    def to_kv(self) -> dict[str, object]:
        return {
            "vocab_size": self.vocab_size,
            "sentence_count": self.sentence_count,
            "valid_count": self.valid_count,
            "test_count": self.test_count,
            "len_min": self.len_min,
            "len_max": self.len_max,
            "free_prob": self.free_prob,
            "reorder_window": self.reorder_window,
            "synonym_classes": self.synonym_classes,
            "seed": self.seed,
        }


@dataclass
class SynthData:
    config: SynthConfig
    src_vocab: Vocabulary
    tgt_vocab: Vocabulary
    train: ParallelCorpus
    valid: ParallelCorpus
    test: ParallelCorpus
    literal: dict[str, ParallelCorpus] = field(default_factory=dict)


def _vocab(prefix: str, size: int) -> Vocabulary:
    width = len(str(size - 1))
    return Vocabulary([f"{prefix}{k:0{width}d}" for k in range(size)])


class _Lexicon:
    """Index bookkeeping: token k of the inventory maps to source id k+4
    and target id k+4; indices below function_count are function tokens,
    the rest are content tokens grouped into synonym classes."""

    def __init__(self, cfg: SynthConfig):
        self.cfg = cfg
        self.n_func = cfg.function_count
        self.n_content = cfg.vocab_size - self.n_func
        self.n_classes = max(1, min(cfg.synonym_classes, self.n_content))

    def is_function(self, index: int) -> bool:
        return index < self.n_func

    def class_of(self, index: int) -> int:
        return (index - self.n_func) % self.n_classes

    def class_members(self, cls: int) -> list[int]:
        return list(range(self.n_func + cls, self.n_func + self.n_content,
                          self.n_classes))


def meaning_key(target: TokenSequence, cfg: SynthConfig) -> tuple[int, ...]:
    """Sorted synonym-class multiset of the content tokens; function tokens
    are ignored.  Free transformations leave this key unchanged."""
    lex = _Lexicon(cfg)
    classes = []
    for tid in target.ids:
        index = tid - 4
        if index >= lex.n_func:
            classes.append(lex.class_of(index))
    return tuple(sorted(classes))


def _random_sentence(lex: _Lexicon, rng: Rng) -> list[int]:
    cfg = lex.cfg
    length = int(rng.integers(cfg.len_min, cfg.len_max + 1))
    out = []
    for _ in range(length):
        if rng.random() < cfg.function_rate:
            out.append(int(rng.integers(0, lex.n_func)))
        else:
            out.append(int(rng.integers(lex.n_func, cfg.vocab_size)))
    return out


def _substitute(indices: list[int], lex: _Lexicon, rng: Rng) -> list[int]:
    out = []
    for idx in indices:
        if not lex.is_function(idx) and rng.random() < lex.cfg.substitute_prob:
            members = lex.class_members(lex.class_of(idx))
            out.append(members[int(rng.integers(0, len(members)))])
        else:
            out.append(idx)
    return out


def _reorder(indices: list[int], window: int, rng: Rng) -> list[int]:
    """Disjoint swaps of positions at most ``window`` apart, so no token
    moves further than the window."""
    if window == 0 or len(indices) < 2:
        return list(indices)
    out = list(indices)
    pos = 0
    while pos < len(out) - 1:
        if rng.random() < 0.4:
            jump = int(rng.integers(1, window + 1))
            other = min(pos + jump, len(out) - 1)
            out[pos], out[other] = out[other], out[pos]
            pos = other + 1
        else:
            pos += 1
    return out


def _insert_delete(indices: list[int], lex: _Lexicon, rng: Rng) -> list[int]:
    cfg = lex.cfg
    out = list(indices)
    if rng.random() < cfg.insert_prob:
        where = int(rng.integers(0, len(out) + 1))
        out.insert(where, int(rng.integers(0, lex.n_func)))
    if rng.random() < cfg.delete_prob:
        func_positions = [p for p, idx in enumerate(out)
                          if lex.is_function(idx)]
        if func_positions and len(out) > 1:
            out.pop(func_positions[int(rng.integers(0, len(func_positions)))])
    return out


def _make_split(count: int, lex: _Lexicon, rng: Rng,
                ) -> tuple[ParallelCorpus, ParallelCorpus]:
    cfg = lex.cfg
    pairs = []
    literal_pairs = []
    for _ in range(count):
        src_idx = _random_sentence(lex, rng)
        literal = list(src_idx)  # bijective lexicon: same inventory index
        tgt_idx = literal
        if rng.random() < cfg.free_prob:
            tgt_idx = _substitute(tgt_idx, lex, rng)
            tgt_idx = _reorder(tgt_idx, cfg.reorder_window, rng)
            tgt_idx = _insert_delete(tgt_idx, lex, rng)
        src = TokenSequence(tuple(k + 4 for k in src_idx))
        pairs.append((src, TokenSequence(tuple(k + 4 for k in tgt_idx))))
        literal_pairs.append((src, TokenSequence(tuple(k + 4
                                                       for k in literal))))
    return (ParallelCorpus(pairs, TargetKind.REFERENCE),
            ParallelCorpus(literal_pairs, TargetKind.REFERENCE))


def generate(cfg: SynthConfig) -> SynthData:
    """Build train/valid/test corpora plus their gold literal targets,
    fully determined by the seed."""
    lex = _Lexicon(cfg)
    train, train_lit = _make_split(cfg.sentence_count, lex,
                                   Rng(cfg.seed, (_STREAM_TRAIN,)))
    valid, valid_lit = _make_split(cfg.valid_count, lex,
                                   Rng(cfg.seed, (_STREAM_VALID,)))
    test, test_lit = _make_split(cfg.test_count, lex,
                                 Rng(cfg.seed, (_STREAM_TEST,)))
    return SynthData(
        config=cfg,
        src_vocab=_vocab("s", cfg.vocab_size),
        tgt_vocab=_vocab("t", cfg.vocab_size),
        train=train, valid=valid, test=test,
        literal={"train": train_lit, "valid": valid_lit, "test": test_lit},
    )
