"""Probabilistic word alignment by EM, plus crossing statistics.

The model generates each target token from one source token (or NULL):
p(target_j | source) = sum_i prior(i | j, J, I) * t(target_j | source_i).
The first training phase uses a uniform position prior (Model 1); the
second weights positions by exp(-lambda * |i/J - j/I|), an unnormalized
diagonal pull (lambda = 0 degenerates to the uniform prior).  NULL keeps
the constant weight exp(-lambda / 2) so rare function words can stay
unlinked.  Only the translation table is learned; the prior is fixed.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field

from .corpus import ParallelCorpus, TokenSequence

NULL = -1  # synthetic source token generating unlinked targets


@dataclass(frozen=True)
class AlignerConfig:
    iters_model1: int = 5
    iters_model2: int = 5
    diag_lambda: float = 4.0

    def __post_init__(self):
        if self.iters_model1 + self.iters_model2 < 1:
            raise ValueError("need at least one EM iteration")
        if self.diag_lambda < 0.0:
            raise ValueError("diag_lambda must be >= 0")


@dataclass
class TranslationTable:
    """Sparse t(target | source) rows; each row sums to 1 over the targets
    ever seen with that source token.  NULL is a regular row."""

    rows: dict[int, dict[int, float]]

    def prob(self, src_tok: int, tgt_tok: int) -> float:
        return self.rows.get(src_tok, {}).get(tgt_tok, 0.0)


@dataclass
class AlignmentLinkSet:
    """Source-to-target links (i, j) for one sentence pair of lengths
    J (source) and I (target)."""

    links: set[tuple[int, int]]
    source_len: int
    target_len: int


@dataclass
class AlignerModel:
    table: TranslationTable
    diag_lambda: float
    log_likelihood: list[tuple[str, float]] = field(default_factory=list)


def _diag_weight(i: int, j: int, src_len: int, tgt_len: int,
                 lam: float) -> float:
    if lam == 0.0:
        return 1.0
    return math.exp(-lam * abs((i + 1) / src_len - (j + 1) / tgt_len))


def _null_weight(lam: float) -> float:
    return math.exp(-lam / 2.0)


def _em_iteration(pairs, table: TranslationTable, lam: float) -> float:
    """One E+M step; returns the corpus log-likelihood of the entering
    table (position prior normalized per target slot)."""
    counts: dict[int, dict[int, float]] = defaultdict(lambda: defaultdict(float))
    loglik = 0.0
    for src, tgt in pairs:
        s = src.ids
        J, I = len(s), len(tgt.ids)
        null_w = _null_weight(lam)
        for j, y in enumerate(tgt.ids):
            weights = [_diag_weight(i, j, J, I, lam) for i in range(J)]
            terms = [w * table.prob(tok, y) for w, tok in zip(weights, s)]
            null_term = null_w * table.prob(NULL, y)
            denom = sum(terms) + null_term
            prior_z = sum(weights) + null_w
            loglik += math.log(denom / prior_z) if denom > 0.0 else -math.inf
            if denom <= 0.0:
                continue
            for tok, term in zip(s, terms):
                if term:
                    counts[tok][y] += term / denom
            if null_term:
                counts[NULL][y] += null_term / denom
    new_rows = {}
    for tok, row in counts.items():
        z = sum(row.values())
        new_rows[tok] = {y: c / z for y, c in row.items()}
    table.rows = new_rows
    return loglik


def _uniform_table(pairs) -> TranslationTable:
    cooc: dict[int, set[int]] = defaultdict(set)
    for src, tgt in pairs:
        toks = set(src.ids) | {NULL}
        for y in set(tgt.ids):
            for tok in toks:
                cooc[tok].add(y)
    rows = {tok: {y: 1.0 / len(ys) for y in ys} for tok, ys in cooc.items()}
    return TranslationTable(rows)


def train_aligner(corpus: ParallelCorpus,
                  cfg: AlignerConfig = AlignerConfig()) -> AlignerModel:
    """EM training: Model 1 iterations (uniform prior) then diagonal-prior
    iterations.  Per-iteration corpus log-likelihood is recorded, tagged
    with the phase it was computed under."""
    if len(corpus) == 0:
        raise ValueError("cannot train an aligner on an empty corpus")
    pairs = [(s, t) for s, t in corpus.pairs if len(s) and len(t)]
    if not pairs:
        raise ValueError("no non-empty pairs to align")
    model = AlignerModel(_uniform_table(pairs), cfg.diag_lambda)
    for _ in range(cfg.iters_model1):
        ll = _em_iteration(pairs, model.table, 0.0)
        model.log_likelihood.append(("model1", ll))
    for _ in range(cfg.iters_model2):
        ll = _em_iteration(pairs, model.table, cfg.diag_lambda)
        model.log_likelihood.append(("model2", ll))
    return model


def viterbi_align(pair: tuple[TokenSequence, TokenSequence],
                  model: AlignerModel) -> AlignmentLinkSet:
    """Best link per target token under the trained table and prior.
    NULL wins ties, then smaller source positions; NULL-aligned targets
    produce no link."""
    src, tgt = pair
    J, I = len(src), len(tgt)
    links: set[tuple[int, int]] = set()
    lam = model.diag_lambda
    for j, y in enumerate(tgt.ids):
        best_score = _null_weight(lam) * model.table.prob(NULL, y)
        best_i = NULL
        for i, tok in enumerate(src.ids):
            score = _diag_weight(i, j, J, I, lam) * model.table.prob(tok, y)
            if score > best_score:
                best_score = score
                best_i = i
        if best_i != NULL:
            links.add((best_i, j))
    return AlignmentLinkSet(links, J, I)


def format_links(linkset: AlignmentLinkSet) -> str:
    """Space-separated "i-j" tokens, ordered by target then source."""
    ordered = sorted(linkset.links, key=lambda ij: (ij[1], ij[0]))
    return " ".join(f"{i}-{j}" for i, j in ordered)


# ---------------------------------------------------------------------------
# crossing statistics

def crossing_counts(linkset: AlignmentLinkSet) -> list[int]:
    """For each source word i, how many link pairs {(i,j), (i',j')} with
    i' != i satisfy (i - i') * (j - j') < 0.  Exact O(n^2) enumeration."""
    counts = [0] * linkset.source_len
    links = sorted(linkset.links)
    for a in range(len(links)):
        i1, j1 = links[a]
        for b in range(a + 1, len(links)):
            i2, j2 = links[b]
            if i1 == i2:
                continue
            if (i1 - i2) * (j1 - j2) < 0:
                counts[i1] += 1
                counts[i2] += 1
    return counts


def crossing_distribution(alignments: list[AlignmentLinkSet],
                          max_bucket: int = 9,
                          word_limit: int | None = None) -> dict[int, float]:
    """Percentage of source words with exactly k crossings, k = 0..K, plus
    an overflow bucket at K+1 for words crossing more than K times.
    ``word_limit`` truncates the corpus-order word stream first."""
    if not alignments:
        raise ValueError("no alignments given")
    flat: list[int] = []
    for linkset in alignments:
        flat.extend(crossing_counts(linkset))
        if word_limit is not None and len(flat) >= word_limit:
            break
    if word_limit is not None:
        flat = flat[:word_limit]
    if not flat:
        raise ValueError("alignments cover no source words")
    dist = {k: 0.0 for k in range(max_bucket + 2)}
    for c in flat:
        dist[min(c, max_bucket + 1)] += 1.0
    n = len(flat)
    return {k: 100.0 * v / n for k, v in dist.items()}


def total_source_words(alignments: list[AlignmentLinkSet]) -> int:
    return sum(a.source_len for a in alignments)


def crossing_difference(first: list[AlignmentLinkSet],
                        second: list[AlignmentLinkSet],
                        max_bucket: int = 9) -> dict[int, float]:
    """Bucket-wise difference of two crossing distributions, computed over
    the same number of source words (both streams truncated to the
    smaller total)."""
    limit = min(total_source_words(first), total_source_words(second))
    a = crossing_distribution(first, max_bucket, word_limit=limit)
    b = crossing_distribution(second, max_bucket, word_limit=limit)
    return {k: a[k] - b[k] for k in a}
