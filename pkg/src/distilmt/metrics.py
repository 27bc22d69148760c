"""Translation-quality metrics: corpus-level BLEU-4 and length-difference
histograms, both emittable as two-column plot data."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

from .corpus import ParallelCorpus


@dataclass
class BleuReport:
    bleu: float                    # 0..100
    precisions: tuple[float, float, float, float]
    brevity_penalty: float
    hyp_length: int
    ref_length: int

    @property
    def ratio(self) -> float:
        return self.hyp_length / self.ref_length if self.ref_length else 0.0

    def format_line(self) -> str:
        """The familiar one-line report."""
        p = "/".join(f"{100.0 * x:.1f}" for x in self.precisions)
        return (f"BLEU = {self.bleu:.2f}, {p} "
                f"(BP={self.brevity_penalty:.3f}, ratio={self.ratio:.3f}, "
                f"hyp_len={self.hyp_length}, ref_len={self.ref_length})")


def _ngrams(tokens, n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu(hypotheses: list, references: list) -> BleuReport:
    """Corpus-level BLEU-4 with a single reference per hypothesis.

    Modified n-gram precision: per sentence, candidate n-gram counts are
    clipped to the reference count, then matched and total counts are
    summed over the corpus.  BP = min(1, exp(1 - ref_len/hyp_len)).  Any
    zero precision zeroes the score; the precisions are still reported.
    """
    if len(hypotheses) != len(references):
        raise ValueError(f"hypothesis/reference count mismatch: "
                         f"{len(hypotheses)} vs {len(references)}")
    if not hypotheses:
        raise ValueError("cannot score an empty corpus")
    matched = [0] * 4
    total = [0] * 4
    hyp_len = 0
    ref_len = 0
    for hyp, ref in zip(hypotheses, references):
        hyp = list(hyp)
        ref = list(ref)
        hyp_len += len(hyp)
        ref_len += len(ref)
        for n in range(1, 5):
            counts = _ngrams(hyp, n)
            if not counts:
                continue
            ref_counts = _ngrams(ref, n)
            total[n - 1] += sum(counts.values())
            matched[n - 1] += sum(min(c, ref_counts[g])
                                  for g, c in counts.items())
    precisions = tuple(m / t if t else 0.0 for m, t in zip(matched, total))
    if hyp_len == 0:
        bp = 0.0
    else:
        bp = min(1.0, math.exp(1.0 - ref_len / hyp_len))
    if all(p > 0.0 for p in precisions):
        score = bp * math.exp(sum(math.log(p) for p in precisions) / 4.0) * 100.0
    else:
        score = 0.0
    return BleuReport(score, precisions, bp, hyp_len, ref_len)


# ---------------------------------------------------------------------------
# histograms

@dataclass
class Histogram:
    """Integer-binned percentages.  Bins outside the construction range are
    clamped into the edge bins, so the percentages always total 100."""

    bins: dict[int, float]
    total_count: int

    def percentage(self, bin_value: int) -> float:
        return self.bins.get(bin_value, 0.0)


def length_diff_histogram(corpus: ParallelCorpus, lo: int = -10,
                          hi: int = 20) -> Histogram:
    """Distribution of target-minus-source token counts, width-1 bins over
    [lo, hi] with the extremes clamped into the edge bins."""
    if len(corpus) == 0:
        raise ValueError("cannot build a histogram from an empty corpus")
    counts: Counter[int] = Counter()
    for src, tgt in corpus.pairs:
        d = len(tgt) - len(src)
        counts[min(max(d, lo), hi)] += 1
    n = len(corpus)
    bins = {b: 100.0 * counts.get(b, 0) / n for b in range(lo, hi + 1)}
    return Histogram(bins=bins, total_count=n)


def emit_plot_data(bins: dict[int, float], decimals: int = 6) -> str:
    """Two whitespace-separated columns (bin value, percentage), sorted by
    bin, fixed decimal places.  Accepts difference data (negatives fine)."""
    lines = [f"{b} {bins[b]:.{decimals}f}" for b in sorted(bins)]
    return "".join(line + "\n" for line in lines)


def parse_plot_data(text: str) -> dict[int, float]:
    out: dict[int, float] = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        b, v = line.split()
        out[int(b)] = float(v)
    return out
