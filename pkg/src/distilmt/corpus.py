"""Parallel corpus ingestion: tokenization, filtering, vocabularies,
encoding, and subset sampling."""

from __future__ import annotations

import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum

from .tensor import Rng
from . import fileio

PAD_ID = 0
UNK_ID = 1
BOS_ID = 2
EOS_ID = 3
RESERVED_TOKENS = ("<pad>", "<unk>", "<bos>", "<eos>")


# ---------------------------------------------------------------------------
# types

@dataclass
class RawBitext:
    """Line-aligned source/target text pairs, one sentence per line."""

    pairs: list[tuple[str, str]]

    def __len__(self) -> int:
        return len(self.pairs)


@dataclass(frozen=True)
class TokenSequence:
    """A sentence as vocabulary ids; BOS/EOS are never stored."""

    ids: tuple[int, ...]

    @property
    def length(self) -> int:
        return len(self.ids)

    def __len__(self) -> int:
        return len(self.ids)


class TargetKind(Enum):
    REFERENCE = "reference"
    HYPOTHESIS = "hypothesis"
    MIXED = "mixed"  # reference and hypothesis targets interleaved


@dataclass
class ParallelCorpus:
    pairs: list[tuple[TokenSequence, TokenSequence]]
    target_kind: TargetKind = TargetKind.REFERENCE

    def __len__(self) -> int:
        return len(self.pairs)

    def sources(self) -> list[TokenSequence]:
        return [s for s, _ in self.pairs]

    def targets(self) -> list[TokenSequence]:
        return [t for _, t in self.pairs]


class Vocabulary:
    """Bijective token<->id map with four reserved leading ids."""

    def __init__(self, content_tokens: list[str]):
        tokens = list(RESERVED_TOKENS) + list(content_tokens)
        self.token_of: list[str] = tokens
        self.id_of: dict[str, int] = {t: i for i, t in enumerate(tokens)}
        if len(self.id_of) != len(tokens):
            raise ValueError("duplicate token in vocabulary")

    @property
    def size(self) -> int:
        return len(self.token_of)

    def __len__(self) -> int:
        return len(self.token_of)

    def __contains__(self, token: str) -> bool:
        return token in self.id_of

    def id(self, token: str) -> int:
        return self.id_of.get(token, UNK_ID)

    def token(self, idx: int) -> str:
        if not 0 <= idx < len(self.token_of):
            raise ValueError(f"corrupted sequence: id {idx} out of range for "
                             f"vocabulary of size {len(self.token_of)}")
        return self.token_of[idx]

    def save(self, path) -> None:
        fileio.write_text_atomic(path, "".join(t + "\n" for t in self.token_of))

    @classmethod
    def load(cls, path) -> "Vocabulary":
        lines = fileio.read_lines(path)
        if tuple(lines[:4]) != RESERVED_TOKENS:
            raise ValueError(f"vocabulary file {path} does not start with the "
                             f"reserved symbols {RESERVED_TOKENS}")
        return cls(lines[4:])


# ---------------------------------------------------------------------------
# tokenization

@dataclass(frozen=True)
class TokenizerRules:
    """Declarative tokenizer config: which character classes get isolated
    as single-character tokens after whitespace splitting."""

    isolate: tuple[str, ...] = ("punctuation",)

    _CLASS_PREFIX = {"punctuation": "P", "symbol": "S"}

    def isolates(self, ch: str) -> bool:
        cat = unicodedata.category(ch)
        return any(cat.startswith(self._CLASS_PREFIX[c]) for c in self.isolate)

    @classmethod
    def from_kv(cls, kv: dict[str, str]) -> "TokenizerRules":
        raw = kv.get("isolate", "punctuation").strip()
        classes = tuple(c.strip() for c in raw.split(",") if c.strip()) \
            if raw != "none" else ()
        for c in classes:
            if c not in cls._CLASS_PREFIX:
                raise ValueError(f"unknown character class {c!r}")
        return cls(isolate=classes)


DEFAULT_RULES = TokenizerRules()


def tokenize(line: str, rules: TokenizerRules = DEFAULT_RULES) -> list[str]:
    """Whitespace split, then break configured character classes out as
    single-character tokens.  Empty input gives an empty list."""
    tokens: list[str] = []
    for chunk in line.split():
        buf: list[str] = []
        for ch in chunk:
            if rules.isolates(ch):
                if buf:
                    tokens.append("".join(buf))
                    buf = []
                tokens.append(ch)
            else:
                buf.append(ch)
        if buf:
            tokens.append("".join(buf))
    return tokens


def detokenize(tokens: list[str]) -> str:
    return " ".join(tokens)


# ---------------------------------------------------------------------------
# filtering

@dataclass(frozen=True)
class FilterConfig:
    max_length: int = 50
    ratio_bound: float = 3.0

    def __post_init__(self):
        if self.max_length <= 0:
            raise ValueError("max_length must be positive")
        if self.ratio_bound < 1.0:
            raise ValueError("ratio_bound must be >= 1")

    @classmethod
    def from_kv(cls, kv: dict[str, str]) -> "FilterConfig":
        return cls(max_length=int(kv.get("max_length", 50)),
                   ratio_bound=float(kv.get("ratio_bound", 3.0)))


def filter_parallel(bitext: RawBitext, cfg: FilterConfig = FilterConfig(),
                    rules: TokenizerRules = DEFAULT_RULES) -> RawBitext:
    """Drop pairs with an empty side, a side over max_length tokens, or a
    length ratio above the bound.  Survivors keep their order and text."""
    kept: list[tuple[str, str]] = []
    for src, tgt in bitext.pairs:
        j = len(tokenize(src, rules))
        i = len(tokenize(tgt, rules))
        if j == 0 or i == 0:
            continue
        if j > cfg.max_length or i > cfg.max_length:
            continue
        if max(j, i) / min(j, i) > cfg.ratio_bound:
            continue
        kept.append((src, tgt))
    return RawBitext(kept)


# ---------------------------------------------------------------------------
# vocabulary building and encoding

def build_vocabulary(token_lists, max_size: int) -> Vocabulary:
    """Keep the max_size most frequent tokens; ties break by first
    occurrence, so identical input always yields identical ids."""
    if max_size < 1:
        raise ValueError("max_size must be >= 1")
    counts: Counter[str] = Counter()
    first_seen: dict[str, int] = {}
    for tokens in token_lists:
        for tok in tokens:
            if tok in RESERVED_TOKENS:
                continue  # reserved surface forms never enter the count
            counts[tok] += 1
            if tok not in first_seen:
                first_seen[tok] = len(first_seen)
    ranked = sorted(counts, key=lambda t: (-counts[t], first_seen[t]))
    return Vocabulary(ranked[:max_size])


def encode(tokens: list[str], vocab: Vocabulary) -> tuple[TokenSequence, int]:
    """Map tokens to ids, UNK for out-of-vocabulary; returns the sequence
    and how many tokens fell out of vocabulary."""
    ids = []
    oov = 0
    for tok in tokens:
        idx = vocab.id_of.get(tok)
        if idx is None:
            idx = UNK_ID
            oov += 1
        ids.append(idx)
    return TokenSequence(tuple(ids)), oov


def decode(seq: TokenSequence, vocab: Vocabulary) -> list[str]:
    return [vocab.token(i) for i in seq.ids]


def encode_corpus(bitext: RawBitext, src_vocab: Vocabulary,
                  tgt_vocab: Vocabulary,
                  rules: TokenizerRules = DEFAULT_RULES,
                  target_kind: TargetKind = TargetKind.REFERENCE,
                  ) -> tuple[ParallelCorpus, int, int]:
    """Tokenize and encode both sides; returns per-side OOV totals."""
    pairs = []
    oov_src = oov_tgt = 0
    for src, tgt in bitext.pairs:
        s, os_ = encode(tokenize(src, rules), src_vocab)
        t, ot = encode(tokenize(tgt, rules), tgt_vocab)
        pairs.append((s, t))
        oov_src += os_
        oov_tgt += ot
    return ParallelCorpus(pairs, target_kind), oov_src, oov_tgt


# ---------------------------------------------------------------------------
# sampling and file I/O

def sample_subset(corpus: ParallelCorpus, n: int, seed: int) -> ParallelCorpus:
    """Uniform sample of n pairs without replacement, deterministic in seed."""
    if n > len(corpus):
        raise ValueError(f"cannot sample {n} pairs from a corpus of "
                         f"{len(corpus)}")
    rng = Rng(seed, (90,))
    idx = sorted(rng.choice(len(corpus), size=n, replace=False).tolist())
    return ParallelCorpus([corpus.pairs[i] for i in idx], corpus.target_kind)


def load_bitext(src_path, tgt_path) -> RawBitext:
    src_lines = fileio.read_lines(src_path)
    tgt_lines = fileio.read_lines(tgt_path)
    if len(src_lines) != len(tgt_lines):
        raise ValueError(f"line count mismatch: {src_path} has "
                         f"{len(src_lines)}, {tgt_path} has {len(tgt_lines)}")
    return RawBitext(list(zip(src_lines, tgt_lines)))


def write_token_lines(path, sentences: list[list[str]]) -> None:
    fileio.write_text_atomic(path,
                             "".join(detokenize(s) + "\n" for s in sentences))
