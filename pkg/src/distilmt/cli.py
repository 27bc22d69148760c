"""Command-line entry point.

One subcommand per pipeline stage; every run resolves its configuration
(flag > config file > default), seeds all randomness from --seed, writes
its outputs atomically, and records a key=value manifest with input
digests.  Exit codes: 0 success, 1 runtime failure (missing file, bad
data), 2 usage errors.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from . import align as align_mod
from . import beam as beam_mod
from . import corpus as corpus_mod
from . import distill as distill_mod
from . import fileio, metrics, synth, trainer
from .nmt import ModelConfig, ModelParams


def _default_manifest(args, primary_output) -> Path:
    if args.manifest is not None:
        return Path(args.manifest)
    if primary_output is not None:
        return Path(str(primary_output) + ".manifest")
    return Path(f"{args.subcommand}.manifest")


def _finish(args, manifest: fileio.Manifest, primary_output,
            started: float) -> int:
    path = _default_manifest(args, primary_output)
    manifest.write(path, time.monotonic() - started)
    return 0


def _load_rules(path) -> corpus_mod.TokenizerRules:
    if path is None:
        return corpus_mod.DEFAULT_RULES
    return corpus_mod.TokenizerRules.from_kv(fileio.load_kv_file(path))


# ---------------------------------------------------------------------------
# subcommand handlers

def _cmd_tokenize(args, manifest) -> Path:
    rules = _load_rules(args.rules)
    lines = fileio.read_lines(args.input)
    tokens = [corpus_mod.tokenize(line, rules) for line in lines]
    corpus_mod.write_token_lines(args.output, tokens)
    manifest.record_input("text", args.input)
    manifest.record_output("tokens", args.output)
    return Path(args.output)


def _cmd_filter(args, manifest) -> Path:
    cfg = corpus_mod.FilterConfig(max_length=args.max_length,
                                  ratio_bound=args.ratio_bound)
    if args.config is not None:
        cfg = corpus_mod.FilterConfig.from_kv(fileio.load_kv_file(args.config))
    bitext = corpus_mod.load_bitext(args.src, args.tgt)
    kept = corpus_mod.filter_parallel(bitext, cfg, _load_rules(args.rules))
    fileio.write_text_atomic(args.out_src,
                             "".join(s + "\n" for s, _ in kept.pairs))
    fileio.write_text_atomic(args.out_tgt,
                             "".join(t + "\n" for _, t in kept.pairs))
    manifest.record_input("src", args.src)
    manifest.record_input("tgt", args.tgt)
    manifest.record_config({"max_length": cfg.max_length,
                            "ratio_bound": cfg.ratio_bound})
    manifest.set("pairs_in", len(bitext))
    manifest.set("pairs_kept", len(kept))
    manifest.record_output("src", args.out_src)
    manifest.record_output("tgt", args.out_tgt)
    return Path(args.out_src)


def _cmd_vocab(args, manifest) -> Path:
    rules = _load_rules(args.rules)
    token_lists = [corpus_mod.tokenize(line, rules)
                   for line in fileio.read_lines(args.input)]
    vocab = corpus_mod.build_vocabulary(token_lists, args.max_size)
    vocab.save(args.output)
    manifest.record_input("text", args.input)
    manifest.record_config({"max_size": args.max_size})
    manifest.set("vocab_size", vocab.size)
    manifest.record_output("vocab", args.output)
    return Path(args.output)


def _encode_files(src_path, tgt_path, src_vocab, tgt_vocab, rules,
                  kind=corpus_mod.TargetKind.REFERENCE):
    bitext = corpus_mod.load_bitext(src_path, tgt_path)
    encoded, _, _ = corpus_mod.encode_corpus(bitext, src_vocab, tgt_vocab,
                                             rules, kind)
    return encoded


def _cmd_train(args, manifest) -> Path:
    rules = _load_rules(args.rules)
    src_vocab = corpus_mod.Vocabulary.load(args.src_vocab)
    tgt_vocab = corpus_mod.Vocabulary.load(args.tgt_vocab)
    train_corpus = _encode_files(args.train_src, args.train_tgt, src_vocab,
                                 tgt_vocab, rules)
    valid_corpus = None
    if args.valid_src is not None:
        valid_corpus = _encode_files(args.valid_src, args.valid_tgt,
                                     src_vocab, tgt_vocab, rules)
    model_cfg = ModelConfig(layers=args.layers, hidden_size=args.hidden_size,
                            embed_size=args.embed_size,
                            src_vocab=src_vocab.size,
                            tgt_vocab=tgt_vocab.size, dropout_p=args.dropout)
    train_cfg = trainer.TrainConfig(
        epochs=args.epochs, batch_size=args.batch_size, lr0=args.lr0,
        decay=args.decay, decay_start_epoch=args.decay_start_epoch,
        grad_clip=args.grad_clip, seed=args.seed,
        length_bucketing=args.length_bucketing)
    out_dir = Path(args.out_dir)
    log = (lambda msg: print(msg, file=sys.stderr)) if args.verbose else None
    params, _ = trainer.train(train_corpus, valid_corpus, model_cfg,
                              train_cfg, out_dir=out_dir, log=log)
    model_path = out_dir / "model.params"
    params.save(model_path)
    for name in ("train_src", "train_tgt", "src_vocab", "tgt_vocab"):
        manifest.record_input(name, getattr(args, name))
    manifest.record_config({
        "layers": args.layers, "hidden_size": args.hidden_size,
        "embed_size": args.embed_size, "dropout": args.dropout,
        "epochs": args.epochs, "batch_size": args.batch_size,
        "lr0": args.lr0, "decay": args.decay,
        "decay_start_epoch": args.decay_start_epoch,
        "grad_clip": args.grad_clip,
    })
    manifest.record_output("model", model_path)
    return model_path


def _cmd_translate(args, manifest) -> Path:
    params = ModelParams.load(args.model)
    src_vocab = corpus_mod.Vocabulary.load(args.src_vocab)
    tgt_vocab = corpus_mod.Vocabulary.load(args.tgt_vocab)
    rules = _load_rules(args.rules)
    cfg = beam_mod.DecodeConfig(
        beam_size=args.beam_size, max_len_factor=args.max_len_factor,
        max_len_offset=args.max_len_offset,
        unk_policy=beam_mod.UnkPolicy(args.unk_policy),
        length_normalize=args.length_normalize)
    sources = []
    for line in fileio.read_lines(args.input):
        seq, _ = corpus_mod.encode(corpus_mod.tokenize(line, rules), src_vocab)
        sources.append(seq)
    nbest_lines = []
    if args.nbest > 1:
        out_lines = []
        failures = 0
        for index, src in enumerate(sources):
            if len(src) == 0:
                out_lines.append("")
                failures += 1
                continue
            hyps = beam_mod.beam_search(params, src, cfg, return_nbest=True)
            nbest_lines.extend(beam_mod.format_nbest(
                index, hyps[:args.nbest],
                lambda seq: corpus_mod.decode(seq, tgt_vocab)))
            out_lines.append(" ".join(corpus_mod.decode(hyps[0].surface,
                                                        tgt_vocab)))
    else:
        results = beam_mod.translate_corpus(params, sources, cfg,
                                            args.threads)
        out_lines = []
        failures = 0
        for res in results:
            if not res.ok:
                out_lines.append("")
                failures += 1
                continue
            seq = res.hypothesis.surface
            out_lines.append(" ".join(corpus_mod.decode(seq, tgt_vocab)))
    fileio.write_text_atomic(args.output,
                             "".join(line + "\n" for line in out_lines))
    if args.nbest > 1:
        fileio.write_text_atomic(str(args.output) + ".nbest",
                                 "".join(l + "\n" for l in nbest_lines))
        manifest.record_output("nbest", str(args.output) + ".nbest")
    manifest.record_input("model", args.model)
    manifest.record_input("src", args.input)
    manifest.record_config({"beam_size": cfg.beam_size,
                            "max_len_factor": cfg.max_len_factor,
                            "max_len_offset": cfg.max_len_offset,
                            "unk_policy": cfg.unk_policy.value})
    manifest.set("failures", failures)
    manifest.record_output("hyp", args.output)
    return Path(args.output)


def _read_encoded_pair_files(src_path, tgt_path):
    """Token files -> corpus over vocabularies built from the files
    themselves (alignment needs ids, not a shared model vocabulary)."""
    bitext = corpus_mod.load_bitext(src_path, tgt_path)
    rules = corpus_mod.TokenizerRules(isolate=())
    src_tokens = [corpus_mod.tokenize(s, rules) for s, _ in bitext.pairs]
    tgt_tokens = [corpus_mod.tokenize(t, rules) for _, t in bitext.pairs]
    src_vocab = corpus_mod.build_vocabulary(src_tokens, 10 ** 9)
    tgt_vocab = corpus_mod.build_vocabulary(tgt_tokens, 10 ** 9)
    pairs = []
    for s_toks, t_toks in zip(src_tokens, tgt_tokens):
        s, _ = corpus_mod.encode(s_toks, src_vocab)
        t, _ = corpus_mod.encode(t_toks, tgt_vocab)
        pairs.append((s, t))
    return corpus_mod.ParallelCorpus(pairs)


def _cmd_align(args, manifest) -> Path:
    pairs = _read_encoded_pair_files(args.src, args.tgt)
    cfg = align_mod.AlignerConfig(iters_model1=args.iters_m1,
                                  iters_model2=args.iters_m2,
                                  diag_lambda=args.diag_lambda)
    model = align_mod.train_aligner(pairs, cfg)
    lines = []
    for pair in pairs.pairs:
        if len(pair[0]) == 0 or len(pair[1]) == 0:
            lines.append("")
            continue
        lines.append(align_mod.format_links(
            align_mod.viterbi_align(pair, model)))
    fileio.write_text_atomic(args.output,
                             "".join(line + "\n" for line in lines))
    manifest.record_input("src", args.src)
    manifest.record_input("tgt", args.tgt)
    manifest.record_config({"iters_m1": cfg.iters_model1,
                            "iters_m2": cfg.iters_model2,
                            "lambda": cfg.diag_lambda})
    manifest.set("final_loglik", f"{model.log_likelihood[-1][1]:.6f}")
    manifest.record_output("alignments", args.output)
    return Path(args.output)


def _cmd_analyze(args, manifest) -> Path:
    """Length-difference histograms for src/ref and src/hyp, crossing
    distributions from freshly trained aligners, and their difference."""
    ref_pairs = _read_encoded_pair_files(args.src, args.ref)
    hyp_pairs = _read_encoded_pair_files(args.src, args.hyp)
    cfg = align_mod.AlignerConfig(iters_model1=args.iters_m1,
                                  iters_model2=args.iters_m2,
                                  diag_lambda=args.diag_lambda)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    ref_hist = metrics.length_diff_histogram(ref_pairs)
    hyp_hist = metrics.length_diff_histogram(hyp_pairs)
    ref_model = align_mod.train_aligner(ref_pairs, cfg)
    hyp_model = align_mod.train_aligner(hyp_pairs, cfg)
    ref_links = [align_mod.viterbi_align(p, ref_model)
                 for p in ref_pairs.pairs]
    hyp_links = [align_mod.viterbi_align(p, hyp_model)
                 for p in hyp_pairs.pairs]
    limit = min(align_mod.total_source_words(ref_links),
                align_mod.total_source_words(hyp_links))
    ref_cross = align_mod.crossing_distribution(ref_links, word_limit=limit)
    hyp_cross = align_mod.crossing_distribution(hyp_links, word_limit=limit)
    diff = {k: hyp_cross[k] - ref_cross[k] for k in ref_cross}

    for name, bins in (("length_diff_ref", ref_hist.bins),
                       ("length_diff_hyp", hyp_hist.bins),
                       ("crossing_ref", ref_cross),
                       ("crossing_hyp", hyp_cross),
                       ("crossing_diff", diff)):
        path = out_dir / f"{name}.dat"
        fileio.write_text_atomic(path, metrics.emit_plot_data(bins))
        manifest.record_output(name, path)
    for name in ("src", "ref", "hyp"):
        manifest.record_input(name, getattr(args, name))
    return out_dir / "report"


def _cmd_bleu(args, manifest) -> None:
    hyp_lines = fileio.read_lines(args.hyp)
    ref_lines = fileio.read_lines(args.ref)
    report = metrics.bleu([line.split() for line in hyp_lines],
                          [line.split() for line in ref_lines])
    print(report.format_line())
    manifest.record_input("hyp", args.hyp)
    manifest.record_input("ref", args.ref)
    manifest.set("bleu", f"{report.bleu:.2f}")
    return None


def _parse_plan(path) -> tuple[distill_mod.DistillPlan, dict[str, str]]:
    kv = fileio.load_kv_file(path)

    def role(prefix: str, key: str, default):
        raw = kv.get(f"{prefix}.{key}")
        if raw is None and prefix == "student":
            raw = kv.get(f"teacher.{key}")  # students inherit teacher values
        if raw is None:
            return default
        return type(default)(raw) if not isinstance(default, bool) \
            else fileio.parse_bool(raw)

    teacher_layers = int(kv.get("teacher.layers", 2))
    default_student_layers = max(1, teacher_layers // 2)
    teacher_arch = distill_mod.Arch(
        layers=teacher_layers,
        hidden_size=role("teacher", "hidden_size", 64),
        embed_size=role("teacher", "embed_size", 32),
        dropout_p=role("teacher", "dropout", 0.3))
    student_arch = distill_mod.Arch(
        layers=int(kv.get("student.layers", default_student_layers)),
        hidden_size=role("student", "hidden_size", teacher_arch.hidden_size),
        embed_size=role("student", "embed_size", teacher_arch.embed_size),
        dropout_p=role("student", "dropout", teacher_arch.dropout_p))

    def train_cfg(prefix: str) -> trainer.TrainConfig:
        return trainer.TrainConfig(
            epochs=role(prefix, "epochs", 18),
            batch_size=role(prefix, "batch_size", 64),
            lr0=role(prefix, "lr0", 1.0),
            decay=role(prefix, "decay", 0.5),
            decay_start_epoch=role(prefix, "decay_start_epoch", 10),
            grad_clip=role(prefix, "grad_clip", 5.0))

    seeds = tuple(int(s) for s in kv.get("seeds", "1").split(","))
    plan = distill_mod.DistillPlan(
        teacher_arch=teacher_arch,
        teacher_train=train_cfg("teacher"),
        student_arch=student_arch,
        student_train=train_cfg("student"),
        data_mode=distill_mod.DataMode.parse(kv.get("data_mode", "R+A")),
        seeds=seeds,
        decode=beam_mod.DecodeConfig(beam_size=int(kv.get("beam_size", 5))),
        rebuild_student_vocab=fileio.parse_bool(
            kv.get("rebuild_student_vocab", "false")),
    )
    return plan, kv


def _cmd_distill(args, manifest) -> Path:
    plan, kv = _parse_plan(args.plan)
    rules = _load_rules(args.rules)
    required = ("train_src", "train_tgt", "valid_src", "valid_tgt",
                "test_src", "test_tgt")
    missing = [k for k in required if k not in kv]
    if missing:
        raise ValueError(f"plan file is missing data paths: {missing}")
    base = Path(args.plan).parent

    def resolve(key: str) -> Path:
        p = Path(kv[key])
        return p if p.is_absolute() else base / p

    max_vocab = int(kv.get("vocab_max_size", 50000))
    train_bitext = corpus_mod.load_bitext(resolve("train_src"),
                                          resolve("train_tgt"))
    src_tokens = [corpus_mod.tokenize(s, rules)
                  for s, _ in train_bitext.pairs]
    tgt_tokens = [corpus_mod.tokenize(t, rules)
                  for _, t in train_bitext.pairs]
    src_vocab = corpus_mod.build_vocabulary(src_tokens, max_vocab)
    tgt_vocab = corpus_mod.build_vocabulary(tgt_tokens, max_vocab)

    def load_split(src_key, tgt_key):
        return _encode_files(resolve(src_key), resolve(tgt_key), src_vocab,
                             tgt_vocab, rules)

    data = distill_mod.DataBundle(
        train=load_split("train_src", "train_tgt"),
        valid=load_split("valid_src", "valid_tgt"),
        test=load_split("test_src", "test_tgt"),
        src_vocab=src_vocab, tgt_vocab=tgt_vocab)
    out_dir = Path(args.out_dir)
    log = (lambda msg: print(msg, file=sys.stderr)) if args.verbose else None
    report = distill_mod.run_plan(plan, data, out_dir=out_dir,
                                  threads=args.threads, log=log)
    print(report.render(), end="")
    manifest.record_input("plan", args.plan)
    for key in required:
        manifest.record_input(key, resolve(key))
    manifest.record_config({k: v for k, v in kv.items()})
    manifest.record_output("report", out_dir / "report.tsv")
    return out_dir / "report.tsv"


def _cmd_synth(args, manifest) -> Path:
    cfg = synth.SynthConfig(
        vocab_size=args.vocab_size, sentence_count=args.sentences,
        valid_count=args.valid_count, test_count=args.test_count,
        len_min=args.len_min, len_max=args.len_max,
        free_prob=args.free_prob, reorder_window=args.reorder_window,
        synonym_classes=args.synonym_classes, seed=args.seed)
    data = synth.generate(cfg)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    splits = (("train", data.train), ("valid", data.valid),
              ("test", data.test))
    for name, split in splits:
        for side, vocab, pick in (("src", data.src_vocab, 0),
                                  ("tgt", data.tgt_vocab, 1)):
            path = out_dir / f"{name}.{side}"
            lines = [" ".join(corpus_mod.decode(pair[pick], vocab))
                     for pair in split.pairs]
            fileio.write_text_atomic(path,
                                     "".join(line + "\n" for line in lines))
            manifest.record_output(f"{name}.{side}", path)
    lit = out_dir / "train.literal.tgt"
    fileio.write_text_atomic(lit, "".join(
        " ".join(corpus_mod.decode(t, data.tgt_vocab)) + "\n"
        for _, t in data.literal["train"].pairs))
    manifest.record_output("train.literal.tgt", lit)
    data.src_vocab.save(out_dir / "vocab.src")
    data.tgt_vocab.save(out_dir / "vocab.tgt")
    fileio.write_kv_file(out_dir / "synth.manifest", cfg.to_kv())
    manifest.record_config(cfg.to_kv())
    return out_dir / "train.src"


# ---------------------------------------------------------------------------
# argument wiring

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="distilmt",
        description="Desk-scale NMT distillation toolkit")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=1,
                       help="single source of randomness for this run")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--manifest", default=None,
                       help="where to write the run manifest")
        p.add_argument("--verbose", action="store_true")

    p = sub.add_parser("tokenize", help="tokenize a text file")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--rules", default=None, help="tokenizer config file")
    common(p)

    p = sub.add_parser("filter", help="drop noisy parallel pairs")
    p.add_argument("--src", required=True)
    p.add_argument("--tgt", required=True)
    p.add_argument("--out-src", dest="out_src", required=True)
    p.add_argument("--out-tgt", dest="out_tgt", required=True)
    p.add_argument("--max-length", dest="max_length", type=int, default=50)
    p.add_argument("--ratio-bound", dest="ratio_bound", type=float,
                   default=3.0)
    p.add_argument("--config", default=None, help="filter config file")
    p.add_argument("--rules", default=None)
    common(p)

    p = sub.add_parser("vocab", help="build a truncated vocabulary")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--max-size", dest="max_size", type=int, default=50000)
    p.add_argument("--rules", default=None)
    common(p)

    p = sub.add_parser("train", help="train a translation model")
    p.add_argument("--train-src", dest="train_src", required=True)
    p.add_argument("--train-tgt", dest="train_tgt", required=True)
    p.add_argument("--valid-src", dest="valid_src", default=None)
    p.add_argument("--valid-tgt", dest="valid_tgt", default=None)
    p.add_argument("--src-vocab", dest="src_vocab", required=True)
    p.add_argument("--tgt-vocab", dest="tgt_vocab", required=True)
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--hidden-size", dest="hidden_size", type=int, default=500)
    p.add_argument("--embed-size", dest="embed_size", type=int, default=500)
    p.add_argument("--dropout", type=float, default=0.3)
    p.add_argument("--epochs", type=int, default=18)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=64)
    p.add_argument("--lr0", type=float, default=1.0)
    p.add_argument("--decay", type=float, default=0.5)
    p.add_argument("--decay-start-epoch", dest="decay_start_epoch", type=int,
                   default=10)
    p.add_argument("--grad-clip", dest="grad_clip", type=float, default=5.0)
    p.add_argument("--length-bucketing", dest="length_bucketing",
                   action="store_true")
    p.add_argument("--rules", default=None)
    common(p)

    p = sub.add_parser("translate", help="beam-decode a source file")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--src-vocab", dest="src_vocab", required=True)
    p.add_argument("--tgt-vocab", dest="tgt_vocab", required=True)
    p.add_argument("--beam-size", dest="beam_size", type=int, default=5)
    p.add_argument("--max-len-factor", dest="max_len_factor", type=float,
                   default=2.0)
    p.add_argument("--max-len-offset", dest="max_len_offset", type=int,
                   default=5)
    p.add_argument("--unk-policy", dest="unk_policy",
                   choices=["allow", "suppress"], default="allow")
    p.add_argument("--length-normalize", dest="length_normalize",
                   action="store_true")
    p.add_argument("--nbest", type=int, default=1)
    p.add_argument("--rules", default=None)
    common(p)

    p = sub.add_parser("align", help="word-align a parallel corpus")
    p.add_argument("--src", required=True)
    p.add_argument("--tgt", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--iters-m1", dest="iters_m1", type=int, default=5)
    p.add_argument("--iters-m2", dest="iters_m2", type=int, default=5)
    p.add_argument("--lambda", dest="diag_lambda", type=float, default=4.0)
    common(p)

    p = sub.add_parser("analyze",
                       help="length and crossing analyses of ref vs hyp")
    p.add_argument("--src", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--hyp", required=True)
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--iters-m1", dest="iters_m1", type=int, default=5)
    p.add_argument("--iters-m2", dest="iters_m2", type=int, default=5)
    p.add_argument("--lambda", dest="diag_lambda", type=float, default=4.0)
    common(p)

    p = sub.add_parser("bleu", help="corpus BLEU of a hypothesis file")
    p.add_argument("--hyp", required=True)
    p.add_argument("--ref", required=True)
    common(p)

    p = sub.add_parser("distill", help="run the full teacher/student plan")
    p.add_argument("--plan", required=True, help="plan config file")
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--rules", default=None)
    common(p)

    p = sub.add_parser("synth", help="generate a synthetic parallel corpus")
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--vocab-size", dest="vocab_size", type=int, default=500)
    p.add_argument("--sentences", type=int, default=5000)
    p.add_argument("--valid-count", dest="valid_count", type=int, default=500)
    p.add_argument("--test-count", dest="test_count", type=int, default=500)
    p.add_argument("--len-min", dest="len_min", type=int, default=4)
    p.add_argument("--len-max", dest="len_max", type=int, default=12)
    p.add_argument("--free-prob", dest="free_prob", type=float, default=0.5)
    p.add_argument("--reorder-window", dest="reorder_window", type=int,
                   default=2)
    p.add_argument("--synonym-classes", dest="synonym_classes", type=int,
                   default=100)
    common(p)

    return parser


_HANDLERS = {
    "tokenize": _cmd_tokenize,
    "filter": _cmd_filter,
    "vocab": _cmd_vocab,
    "train": _cmd_train,
    "translate": _cmd_translate,
    "align": _cmd_align,
    "analyze": _cmd_analyze,
    "bleu": _cmd_bleu,
    "distill": _cmd_distill,
    "synth": _cmd_synth,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    started = time.monotonic()
    manifest = fileio.Manifest(args.subcommand, args.seed)
    try:
        primary = _HANDLERS[args.subcommand](args, manifest)
    except FileNotFoundError as exc:
        path = exc.filename if exc.filename else exc
        print(f"error: missing file: {path}", file=sys.stderr)
        return 1
    except (ValueError, RuntimeError) as exc:
        message = str(exc).replace("\n", " ")
        print(f"error: {message}", file=sys.stderr)
        return 1
    return _finish(args, manifest, primary, started)


if __name__ == "__main__":
    sys.exit(main())
