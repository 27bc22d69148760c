"""Desk-scale neural MT distillation toolkit.

Train a teacher sequence-to-sequence translator, beam-translate the
training source side, train a student on the resulting simplified bitext,
and quantify the simplification with length-difference histograms,
crossed-alignment statistics, and BLEU.
"""

from . import align, beam, corpus, distill, metrics, nmt, synth, tensor, trainer

__all__ = [
    "align",
    "beam",
    "corpus",
    "distill",
    "metrics",
    "nmt",
    "synth",
    "tensor",
    "trainer",
]

__version__ = "0.1.0"
