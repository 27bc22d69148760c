"""Teacher/student pipeline: train a teacher on references, re-translate
the training source side by beam search, train students on the simplified
bitext, and report BLEU plus corpus analyses for the R / A / R+A data
configurations."""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

from . import align, beam, metrics, trainer
from .align import AlignerConfig, AlignmentLinkSet
from .beam import DecodeConfig
from .corpus import (ParallelCorpus, TargetKind, TokenSequence, Vocabulary,
                     build_vocabulary, decode, encode)
from .metrics import Histogram
from .nmt import ModelConfig, ModelParams
from .tensor import Rng
from .trainer import TrainConfig


class DataMode(Enum):
    R = "R"                  # references only
    A = "A"                  # automatic (distilled) targets only
    R_PLUS_A = "R+A"         # both, doubling the pair count

    @classmethod
    def parse(cls, text: str) -> "DataMode":
        for mode in cls:
            if text.strip().upper().replace("_", "+") == mode.value:
                return mode
        raise ValueError(f"unknown data mode {text!r}")


@dataclass(frozen=True)
class Arch:
    """Model shape without the data-dependent vocabulary sizes."""

    layers: int
    hidden_size: int
    embed_size: int
    dropout_p: float = 0.3

    def model_config(self, src_vocab: int, tgt_vocab: int) -> ModelConfig:
        return ModelConfig(layers=self.layers, hidden_size=self.hidden_size,
                           embed_size=self.embed_size, src_vocab=src_vocab,
                           tgt_vocab=tgt_vocab, dropout_p=self.dropout_p)


@dataclass(frozen=True)
class DistillPlan:
    teacher_arch: Arch
    teacher_train: TrainConfig
    student_arch: Arch
    student_train: TrainConfig
    data_mode: DataMode = DataMode.R_PLUS_A
    seeds: tuple[int, ...] = (1,)
    decode: DecodeConfig = DecodeConfig()
    aligner: AlignerConfig = AlignerConfig()
    rebuild_student_vocab: bool = False

    @classmethod
    def default(cls, teacher_layers: int = 2, hidden: int = 64,
                embed: int = 32, epochs: int = 8, seeds=(1,),
                dropout: float = 0.3, decay_start: int = 10,
                data_mode: DataMode = DataMode.R_PLUS_A) -> "DistillPlan":
        """Teacher as given; student with half the layers, same training."""
        teacher = Arch(teacher_layers, hidden, embed, dropout)
        student = Arch(max(1, teacher_layers // 2), hidden, embed, dropout)
        tcfg = TrainConfig(epochs=epochs, decay_start_epoch=decay_start)
        return cls(teacher_arch=teacher, teacher_train=tcfg,
                   student_arch=student, student_train=tcfg,
                   data_mode=data_mode, seeds=tuple(seeds))


@dataclass
class DataBundle:
    train: ParallelCorpus
    valid: ParallelCorpus
    test: ParallelCorpus
    src_vocab: Vocabulary
    tgt_vocab: Vocabulary

    @classmethod
    def from_synth(cls, data) -> "DataBundle":
        return cls(train=data.train, valid=data.valid, test=data.test,
                   src_vocab=data.src_vocab, tgt_vocab=data.tgt_vocab)


@dataclass
class DistilledCorpus:
    """Beam hypotheses for the training source side.  Failed or empty
    hypotheses are dropped together with their sources; kept_indices maps
    surviving pairs back to original line numbers."""

    pairs: list[tuple[TokenSequence, TokenSequence]]
    kept_indices: list[int]
    dropped: list[tuple[int, str]]
    teacher_fingerprint: str

    def __len__(self) -> int:
        return len(self.pairs)

    @property
    def drop_count(self) -> int:
        return len(self.dropped)

    def corpus(self) -> ParallelCorpus:
        return ParallelCorpus(list(self.pairs), TargetKind.HYPOTHESIS)


# role offsets keep per-model training streams apart within one seed
_ROLE_SEED = {"teacher": 0, "teacher_small": 1, "student": 2, "combined": 3}


def _train_seed(pipeline_seed: int, role: str) -> int:
    return pipeline_seed * 10 + _ROLE_SEED[role]


def train_teacher(bitext: ParallelCorpus, valid: ParallelCorpus | None,
                  plan: DistillPlan, src_vocab_size: int, tgt_vocab_size: int,
                  seed: int, out_dir=None, log=None,
                  ) -> tuple[ModelParams, str, trainer.TrainHistory]:
    """Step 1: fit the teacher on reference translations.  Returns the
    parameters, their content fingerprint, and the training history."""
    if bitext.target_kind is not TargetKind.REFERENCE:
        raise ValueError("teacher training expects reference targets")
    cfg = plan.teacher_arch.model_config(src_vocab_size, tgt_vocab_size)
    tcfg = replace(plan.teacher_train, seed=_train_seed(seed, "teacher"))
    params, history = trainer.train(bitext, valid, cfg, tcfg,
                                    out_dir=out_dir, log=log)
    return params, params.fingerprint(), history


def decode_training_set(teacher: ModelParams, bitext: ParallelCorpus,
                        decode_cfg: DecodeConfig = DecodeConfig(),
                        threads: int = 1) -> DistilledCorpus:
    """Step 2: beam-translate every training source; drop failures and
    empty outputs pairwise with their sources."""
    sources = bitext.sources()
    for s in sources:
        if s.ids and max(s.ids) >= teacher.config.src_vocab:
            raise ValueError("training source does not fit the teacher's "
                             "source vocabulary")
    results = beam.translate_corpus(teacher, sources, decode_cfg, threads)
    pairs = []
    kept = []
    dropped = []
    for line, (src, res) in enumerate(zip(sources, results)):
        if not res.ok:
            dropped.append((line, res.error or "decode failed"))
            continue
        ids = res.surface_ids()
        if not ids:
            dropped.append((line, "empty hypothesis"))
            continue
        pairs.append((src, TokenSequence(ids)))
        kept.append(line)
    return DistilledCorpus(pairs, kept, dropped, teacher.fingerprint())


def assemble(data_mode: DataMode, references: ParallelCorpus,
             distilled: DistilledCorpus | None,
             seed: int = 1) -> ParallelCorpus:
    """Step 3 data selection.  R passes the references through; A uses the
    distilled pairs; R+A interleaves both with a deterministic shuffle."""
    if data_mode is DataMode.R:
        return references
    if distilled is None:
        raise ValueError(f"data mode {data_mode.value} needs distilled data")
    for line, (src, _) in zip(distilled.kept_indices, distilled.pairs):
        if references.pairs[line][0].ids != src.ids:
            raise ValueError(f"distilled corpus does not share the reference "
                             f"source side at line {line}")
    if data_mode is DataMode.A:
        return distilled.corpus()
    pairs = list(references.pairs) + list(distilled.pairs)
    order = Rng(seed, (41,)).permutation(len(pairs))
    return ParallelCorpus([pairs[i] for i in order], TargetKind.MIXED)


@dataclass
class AnalysisReport:
    """How the distilled targets differ from the references: length-diff
    histograms against the shared sources, and crossing distributions from
    a freshly trained aligner (difference computed hyp minus ref)."""

    ref_length_hist: Histogram
    hyp_length_hist: Histogram
    ref_crossings: dict[int, float]
    hyp_crossings: dict[int, float]
    crossing_diff: dict[int, float]

    @property
    def ref_bin0(self) -> float:
        return self.ref_length_hist.percentage(0)

    @property
    def hyp_bin0(self) -> float:
        return self.hyp_length_hist.percentage(0)

    @property
    def ref_k0(self) -> float:
        return self.ref_crossings[0]

    @property
    def hyp_k0(self) -> float:
        return self.hyp_crossings[0]


def analyze_distillation(references: ParallelCorpus,
                         distilled: DistilledCorpus,
                         aligner_cfg: AlignerConfig = AlignerConfig(),
                         ) -> AnalysisReport:
    """Compare reference and hypothesis targets over the pairs that
    survived decoding."""
    ref_pairs = [references.pairs[i] for i in distilled.kept_indices]
    ref_corpus = ParallelCorpus(ref_pairs, TargetKind.REFERENCE)
    hyp_corpus = distilled.corpus()

    ref_hist = metrics.length_diff_histogram(ref_corpus)
    hyp_hist = metrics.length_diff_histogram(hyp_corpus)

    ref_model = align.train_aligner(ref_corpus, aligner_cfg)
    hyp_model = align.train_aligner(hyp_corpus, aligner_cfg)
    ref_links = [align.viterbi_align(p, ref_model) for p in ref_corpus.pairs]
    hyp_links = [align.viterbi_align(p, hyp_model) for p in hyp_corpus.pairs]

    limit = min(align.total_source_words(ref_links),
                align.total_source_words(hyp_links))
    ref_cross = align.crossing_distribution(ref_links, word_limit=limit)
    hyp_cross = align.crossing_distribution(hyp_links, word_limit=limit)
    diff = {k: hyp_cross[k] - ref_cross[k] for k in ref_cross}
    return AnalysisReport(ref_hist, hyp_hist, ref_cross, hyp_cross, diff)


@dataclass
class ReportRow:
    data: str           # R / A / R+A
    layers: str         # e.g. "2 x 64"
    valid_bleu: float
    test_bleu: float
    valid_delta: float | None = None
    test_delta: float | None = None

    def _cell(self, score: float, delta: float | None) -> str:
        if delta is None:
            return f"{score:.2f}"
        return f"{score:.2f} ({delta:+.2f})"

    def render(self) -> str:
        return (f"{self.data:<5} {self.layers:<8} "
                f"{self._cell(self.valid_bleu, self.valid_delta):<16} "
                f"{self._cell(self.test_bleu, self.test_delta)}")


@dataclass
class SeedResult:
    seed: int
    rows: list[ReportRow]
    analysis: AnalysisReport
    drop_count: int
    teacher_fingerprint: str


@dataclass
class PipelineReport:
    plan: DistillPlan
    results: list[SeedResult]
    median_rows: list[ReportRow]

    def render(self) -> str:
        lines = [f"{'Data':<5} {'Layers':<8} {'Valid':<16} Test"]
        lines += [row.render() for row in self.median_rows]
        if len(self.results) > 1:
            lines.append("")
            lines.append(f"medians over seeds "
                         f"{', '.join(str(r.seed) for r in self.results)}")
        a = self.results[0].analysis
        lines.append("")
        lines.append(f"length-diff mass at 0: ref {a.ref_bin0:.2f}%  "
                     f"hyp {a.hyp_bin0:.2f}%")
        lines.append(f"crossing mass at 0:    ref {a.ref_k0:.2f}%  "
                     f"hyp {a.hyp_k0:.2f}%")
        drops = sum(r.drop_count for r in self.results)
        lines.append(f"dropped hypotheses: {drops}")
        return "".join(line + "\n" for line in lines)

    def to_tsv(self) -> str:
        lines = ["data\tlayers\tvalid_bleu\tvalid_delta\ttest_bleu\ttest_delta"]
        for row in self.median_rows:
            vd = "" if row.valid_delta is None else f"{row.valid_delta:.2f}"
            td = "" if row.test_delta is None else f"{row.test_delta:.2f}"
            lines.append(f"{row.data}\t{row.layers}\t{row.valid_bleu:.2f}\t"
                         f"{vd}\t{row.test_bleu:.2f}\t{td}")
        return "".join(line + "\n" for line in lines)


def _evaluate(params: ModelParams, data: DataBundle, decode_cfg: DecodeConfig,
              threads: int) -> tuple[float, float]:
    scores = []
    for split in (data.valid, data.test):
        results = beam.translate_corpus(params, split.sources(), decode_cfg,
                                        threads)
        hyps = [list(r.surface_ids()) for r in results]
        refs = [list(t.ids) for t in split.targets()]
        scores.append(metrics.bleu(hyps, refs).bleu)
    return scores[0], scores[1]


def _rebuild_target_vocab(distilled: DistilledCorpus, old_vocab: Vocabulary,
                          max_size: int) -> tuple[Vocabulary, DistilledCorpus]:
    """Re-derive the target vocabulary from the distilled hypotheses and
    re-encode them against it."""
    token_lists = [decode(t, old_vocab) for _, t in distilled.pairs]
    vocab = build_vocabulary(token_lists, max_size)
    pairs = [(s, encode(tokens, vocab)[0])
             for (s, _), tokens in zip(distilled.pairs, token_lists)]
    rebuilt = DistilledCorpus(pairs, distilled.kept_indices,
                              distilled.dropped, distilled.teacher_fingerprint)
    return vocab, rebuilt


def run_pipeline(plan: DistillPlan, data: DataBundle, seed: int,
                 out_dir=None, threads: int = 1, log=None) -> SeedResult:
    """Execute the three pipeline steps for one seed and evaluate every
    trained model on the held-out splits."""
    out_dir = Path(out_dir) if out_dir is not None else None
    sv, tv = data.src_vocab.size, data.tgt_vocab.size

    def say(msg: str) -> None:
        if log is not None:
            log(f"[seed {seed}] {msg}")

    def ckpt(name: str):
        return None if out_dir is None else out_dir / name

    say("training teacher (R)")
    teacher, fingerprint, _ = train_teacher(
        data.train, data.valid, plan, sv, tv, seed,
        out_dir=ckpt("teacher"), log=log)

    say("training small teacher (R, student architecture)")
    small_cfg = plan.student_arch.model_config(sv, tv)
    small_tcfg = replace(plan.student_train,
                         seed=_train_seed(seed, "teacher_small"))
    teacher_small, _ = trainer.train(data.train, data.valid, small_cfg,
                                     small_tcfg, out_dir=ckpt("teacher_small"),
                                     log=log)

    say("decoding the training set")
    distilled = decode_training_set(teacher, data.train, plan.decode, threads)
    say(f"kept {len(distilled)} of {len(data.train)} hypotheses "
        f"({distilled.drop_count} dropped)")

    say("analyzing references vs hypotheses")
    analysis = analyze_distillation(data.train, distilled, plan.aligner)

    models: list[tuple[str, Arch, ModelParams, DataBundle]] = [
        ("R", plan.student_arch, teacher_small, data),
        ("R", plan.teacher_arch, teacher, data),
    ]
    if plan.data_mode in (DataMode.A, DataMode.R_PLUS_A):
        student_data = data
        student_tv = tv
        a_corpus = assemble(DataMode.A, data.train, distilled, seed)
        if plan.rebuild_student_vocab:
            new_vocab, rebuilt = _rebuild_target_vocab(
                distilled, data.tgt_vocab, max(tv - 4, 1))
            a_corpus = rebuilt.corpus()
            student_tv = new_vocab.size
            student_data = DataBundle(data.train, data.valid, data.test,
                                      data.src_vocab, new_vocab)
        say("training student (A)")
        student_cfg = plan.student_arch.model_config(sv, student_tv)
        student_tcfg = replace(plan.student_train,
                               seed=_train_seed(seed, "student"))
        student, _ = trainer.train(a_corpus, student_data.valid, student_cfg,
                                   student_tcfg, out_dir=ckpt("student"),
                                   log=log)
        models.append(("A", plan.student_arch, student, student_data))
    if plan.data_mode is DataMode.R_PLUS_A:
        say("training combined model (R+A)")
        ra_corpus = assemble(DataMode.R_PLUS_A, data.train, distilled, seed)
        ra_cfg = plan.teacher_arch.model_config(sv, tv)
        ra_tcfg = replace(plan.teacher_train,
                          seed=_train_seed(seed, "combined"))
        combined, _ = trainer.train(ra_corpus, data.valid, ra_cfg, ra_tcfg,
                                    out_dir=ckpt("combined"), log=log)
        models.append(("R+A", plan.teacher_arch, combined, data))

    rows: list[ReportRow] = []
    teacher_scores: tuple[float, float] | None = None
    for label, arch, params, bundle in models:
        say(f"evaluating {label} ({arch.layers} x {arch.hidden_size})")
        vb, tb = _evaluate(params, bundle, plan.decode, threads)
        if label == "R" and arch == plan.teacher_arch:
            teacher_scores = (vb, tb)
        rows.append(ReportRow(label, f"{arch.layers} x {arch.hidden_size}",
                              vb, tb))
    for row in rows:
        if row.data != "R" and teacher_scores is not None:
            row.valid_delta = row.valid_bleu - teacher_scores[0]
            row.test_delta = row.test_bleu - teacher_scores[1]

    result = SeedResult(seed, rows, analysis, distilled.drop_count,
                        fingerprint)
    if out_dir is not None:
        _write_seed_artifacts(out_dir, result)
    return result


def _write_seed_artifacts(out_dir: Path, result: SeedResult) -> None:
    from . import fileio
    a = result.analysis
    for name, bins in (("length_diff_ref", a.ref_length_hist.bins),
                       ("length_diff_hyp", a.hyp_length_hist.bins),
                       ("crossing_ref", a.ref_crossings),
                       ("crossing_hyp", a.hyp_crossings),
                       ("crossing_diff", a.crossing_diff)):
        fileio.write_text_atomic(out_dir / f"{name}.dat",
                                 metrics.emit_plot_data(bins))


def _median_rows(results: list[SeedResult]) -> list[ReportRow]:
    n_rows = len(results[0].rows)
    med = [
        ReportRow(
            results[0].rows[i].data,
            results[0].rows[i].layers,
            statistics.median(r.rows[i].valid_bleu for r in results),
            statistics.median(r.rows[i].test_bleu for r in results),
        )
        for i in range(n_rows)
    ]
    teacher = med[1]
    for row in med[2:]:
        row.valid_delta = row.valid_bleu - teacher.valid_bleu
        row.test_delta = row.test_bleu - teacher.test_bleu
    return med


def run_plan(plan: DistillPlan, data: DataBundle, out_dir=None,
             threads: int = 1, log=None) -> PipelineReport:
    """Run the pipeline for every seed in the plan and aggregate medians."""
    out_dir = Path(out_dir) if out_dir is not None else None
    results = []
    for seed in plan.seeds:
        seed_dir = None if out_dir is None else out_dir / f"seed_{seed}"
        results.append(run_pipeline(plan, data, seed, out_dir=seed_dir,
                                    threads=threads, log=log))
    report = PipelineReport(plan, results, _median_rows(results))
    if out_dir is not None:
        from . import fileio
        fileio.write_text_atomic(out_dir / "report.tsv", report.to_tsv())
        fileio.write_text_atomic(out_dir / "report.txt", report.render())
    return report
