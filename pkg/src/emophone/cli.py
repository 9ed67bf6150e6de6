"""``emophone`` command line: featurize | synth | train | attend | compare | report.

Exit codes: 0 success, 1 runtime failure, 2 bad input or config, 3 refused overwrite.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import _kernels
from .attend import make_record, write_records
from .corpus import CorpusError, class_counts, class_weights, load_manifest
from .dsp import AudioFormatError, log_mel, read_wav, write_fmx
from .harness import (
    ExperimentConfig,
    FoldError,
    compare,
    emit_report,
    load_report,
    run_corpus,
)
from .model import (
    ModelConfig,
    TrainConfig,
    TrainingError,
    encode,
    encode_corpus,
    forward,
    load_checkpoint,
    load_token_vectors,
    save_checkpoint,
    train,
)
from .synthgen import SynthConfig, SynthConfigError, generate_pair, planted_truth

EXIT_OK, EXIT_RUNTIME, EXIT_INPUT, EXIT_OVERWRITE = 0, 1, 2, 3
RUN_CONFIG = "run_config.json"

log = logging.getLogger("emophone")


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _u64(text):
    v = int(text, 0)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _prepare_out(path, force, produces):
    """Create ``path``; refuse (exit 3) if any of ``produces`` already exists there."""
    path = Path(path)
    existing = [p for p in produces if (path / p).exists()]
    if existing and not force:
        raise CliError(
            f"refusing to overwrite {path / existing[0]} (use --force)", EXIT_OVERWRITE
        )
    path.mkdir(parents=True, exist_ok=True)
    return path


def _echo_config(out_dir, command, resolved):
    payload = {"command": command, **resolved}
    (Path(out_dir) / RUN_CONFIG).write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def _load(path):
    try:
        return load_manifest(path)
    except FileNotFoundError:
        raise CliError(f"no such manifest: {path}", EXIT_INPUT) from None
    except CorpusError as exc:
        raise CliError(str(exc), EXIT_INPUT) from None


def _train_config(args):
    try:
        return TrainConfig(
            epochs=args.epochs, batch_size=args.batch_size, learning_rate=args.lr, seed=args.seed
        )
    except ValueError as exc:
        raise CliError(f"bad training config: {exc}", EXIT_INPUT) from None


# --- subcommands -------------------------------------------------------------------

def cmd_featurize(args):
    wav_dir = Path(args.wav_dir)
    wavs = sorted(wav_dir.glob("*.wav")) if wav_dir.is_dir() else []
    if not wavs:
        raise CliError(f"no input files in {wav_dir}", EXIT_INPUT)
    available = {p.stem: p for p in wavs}
    try:
        lines = [ln for ln in Path(args.manifest).read_text(encoding="utf-8").splitlines() if ln.strip()]
        header = json.loads(lines[0])
        records = [json.loads(ln) for ln in lines[1:]]
    except (OSError, IndexError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read manifest {args.manifest}: {exc}", EXIT_INPUT) from None
    out = _prepare_out(args.out_dir, args.force, ["manifest.jsonl", "features"])
    (out / "features").mkdir(exist_ok=True)
    failures = []
    written = []
    for rec in records:
        uid = str(rec.get("id", "?"))
        wav = wav_dir / rec["audio"] if "audio" in rec else available.get(uid)
        if wav is None or not Path(wav).is_file():
            failures.append(f"{uid}: no audio file")
            continue
        try:
            fm = log_mel(read_wav(wav))
        except AudioFormatError as exc:
            failures.append(f"{uid}: {exc}")
            continue
        rel = f"features/{uid}.fmx"
        write_fmx(out / rel, fm)
        rec = {**rec, "features": rel, "n_frames": fm.n_frames}
        written.append(rec)
    header = {**header, "frame_hop_ms": 10.0}
    with open(out / "manifest.jsonl", "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for rec in written:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    _echo_config(out, "featurize", {"wav_dir": str(wav_dir), "manifest": str(args.manifest)})
    print(f"featurized {len(written)} of {len(records)} utterances into {out}")
    if failures:
        for f in failures:
            print(f"  failed: {f}")
        raise CliError(f"{len(failures)} file(s) failed", EXIT_INPUT)
    return EXIT_OK


def cmd_synth(args):
    try:
        config = SynthConfig.from_file(args.config) if args.config else SynthConfig()
    except FileNotFoundError:
        raise CliError(f"no such config file: {args.config}", EXIT_INPUT) from None
    except (SynthConfigError, CorpusError, TypeError, ValueError) as exc:
        raise CliError(f"invalid synth config: {exc}", EXIT_INPUT) from None
    produces = ["manifest.jsonl", "features", "synth_config.json"]
    out_a = _prepare_out(args.out_a, args.force, produces)
    out_b = _prepare_out(args.out_b, args.force, produces)
    a, b = generate_pair(config, args.seed, out_a, out_b)
    truth = planted_truth(config)
    print(f"corpus A: {len(a)} utterances -> {out_a}")
    print(f"corpus B: {len(b)} utterances -> {out_b}")
    print("planted markers: " + ", ".join(f"{e}={p}" for e, p in truth["markers"].items()))
    print(f"difference expected: {'yes' if truth['difference_expected'] else 'no'}")
    for e, d in truth["marker_frequency_direction"].items():
        print(f"  {e:8s} marker attended frequency: {d}")
    return EXIT_OK


def _pretrained(path, corpus, d_embed):
    if not path:
        return None
    try:
        return load_token_vectors(path, corpus.vocabulary, d_embed)
    except (OSError, ValueError) as exc:
        raise CliError(f"bad embeddings file: {exc}", EXIT_INPUT) from None


def cmd_train(args):
    corpus = _load(args.corpus)
    tconf = _train_config(args)
    out = _prepare_out(args.out_dir, args.force, ["model.apmd", "train_log.csv"])
    try:
        weights = class_weights(class_counts(corpus))
    except CorpusError as exc:
        raise CliError(str(exc), EXIT_INPUT) from None
    examples = encode_corpus(corpus)
    mconf = ModelConfig(vocab_size=len(corpus.vocabulary), n_mels=examples[0].features.shape[1])
    result = train(
        examples, tconf, weights, model_config=mconf,
        pretrained=_pretrained(args.embeddings, corpus, mconf.d_embed),
    )
    save_checkpoint(out / "model.apmd", result.params, corpus.vocabulary, {"train": tconf.to_dict()})
    (out / "train_log.csv").write_text(result.log_csv(), encoding="utf-8")
    _echo_config(out, "train", {"corpus": str(args.corpus), "train": tconf.to_dict(),
                                "embeddings": args.embeddings})
    last = result.log[-1]
    print(f"trained {tconf.epochs} epochs on {len(corpus)} utterances: "
          f"final loss {last.loss:.4f}, train accuracy {last.train_acc:.4f}")
    return EXIT_OK


def cmd_attend(args):
    try:
        params, vocab, _ = load_checkpoint(args.model)
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot load model: {exc}", EXIT_INPUT) from None
    corpus = _load(args.corpus)
    out = _prepare_out(args.out_dir, args.force, ["attention.jsonl"])
    records = []
    for u in corpus.utterances:
        ex = encode(u, vocab, params.config.unk_id)
        records.append(make_record(u, forward(ex, params).attention_weights, args.top_k))
    write_records(out / "attention.jsonl", records, compact=args.compact)
    _echo_config(out, "attend", {"model": str(args.model), "corpus": str(args.corpus),
                                 "top_k": args.top_k, "compact": args.compact})
    print(f"wrote {len(records)} attention records to {out / 'attention.jsonl'}")
    return EXIT_OK


def _experiment_config(args):
    return ExperimentConfig(
        train=_train_config(args), seed=args.seed, top_k=args.top_k,
        embeddings=args.embeddings, workers=args.workers,
    )


def cmd_compare(args):
    corpus_a = _load(args.corpus_a)
    corpus_b = _load(args.corpus_b)
    config = _experiment_config(args)
    produces = ["report.json", "distributions.csv", "boxstats.csv", "tests.csv",
                "attention_A.jsonl", "attention_B.jsonl"]
    out = _prepare_out(args.out_dir, args.force, produces)
    if config.embeddings:
        _pretrained(config.embeddings, corpus_a, ModelConfig.d_embed)
    try:
        run_a = run_corpus(corpus_a, config)
        run_b = run_corpus(corpus_b, config)
    except CorpusError as exc:
        raise CliError(str(exc), EXIT_INPUT) from None
    report = compare(corpus_a, corpus_b, config, runs=(run_a, run_b))
    emit_report(report, out, args.format)
    for name, run in (("A", run_a), ("B", run_b)):
        write_records(
            out / f"attention_{name}.jsonl",
            [r for f in run.folds for r in f.records], compact=True,
        )
    _echo_config(out, "compare", {
        "corpus_a": str(args.corpus_a), "corpus_b": str(args.corpus_b),
        "experiment": config.to_dict(), "workers": config.workers, "format": args.format,
    })
    print("\n".join(report.summary_lines()))
    print(f"report written to {out}")
    return EXIT_OK


def cmd_report(args):
    try:
        report = load_report(args.report)
    except FileNotFoundError:
        raise CliError(f"no such report: {args.report}", EXIT_INPUT) from None
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError(f"malformed report {args.report}: {exc}", EXIT_INPUT) from None
    if args.out_dir:
        names = {"json": ["report.json"], "csv": ["distributions.csv", "boxstats.csv", "tests.csv"]}
        produces = names["json"] + names["csv"] if args.format == "both" else names[args.format]
        out = _prepare_out(args.out_dir, args.force, produces)
        emit_report(report, out, args.format)
        _echo_config(out, "report", {"report": str(args.report), "format": args.format})
    print("\n".join(report.summary_lines()))
    return EXIT_OK


# --- parser ------------------------------------------------------------------------

def _add_train_flags(p):
    p.add_argument("--seed", type=_u64, default=42, help="master seed (default 42)")
    p.add_argument("--epochs", type=_positive_int, default=TrainConfig.epochs)
    p.add_argument("--batch-size", type=_positive_int, default=TrainConfig.batch_size)
    p.add_argument("--lr", type=float, default=TrainConfig.learning_rate)
    p.add_argument("--embeddings", default=None,
                   help="optional text file of 'token v1 .. v64' initial vectors")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="emophone",
        description="Attention-based attribution of emotion to phonemes, compared across corpora.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("featurize", help="WAV files -> log-mel .fmx features + manifest")
    p.add_argument("wav_dir")
    p.add_argument("manifest", help="input manifest; audio is <wav_dir>/<id>.wav unless 'audio' is set")
    p.add_argument("out_dir")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("synth", help="generate a pair of synthetic corpora")
    p.add_argument("out_a")
    p.add_argument("out_b")
    p.add_argument("--config", default=None, help="JSON or TOML synth config")
    p.add_argument("--seed", type=_u64, default=42)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train one model on a whole corpus")
    p.add_argument("corpus", help="manifest.jsonl")
    p.add_argument("out_dir")
    _add_train_flags(p)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("attend", help="attention records for a corpus under a trained model")
    p.add_argument("model")
    p.add_argument("corpus")
    p.add_argument("out_dir")
    p.add_argument("--top-k", type=_positive_int, default=1)
    p.add_argument("--compact", action="store_true", help="omit per-frame weights")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_attend)

    p = sub.add_parser("compare", help="cross-validated comparison of two corpora")
    p.add_argument("corpus_a")
    p.add_argument("corpus_b")
    p.add_argument("out_dir")
    _add_train_flags(p)
    p.add_argument("--top-k", type=_positive_int, default=1)
    p.add_argument("--workers", type=_positive_int, default=os.cpu_count() or 1)
    p.add_argument("--format", choices=("json", "csv", "both"), default="both")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("report", help="summarize a report.json and optionally re-emit it")
    p.add_argument("report")
    p.add_argument("--out-dir", default=None)
    p.add_argument("--format", choices=("json", "csv", "both"), default="both")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    log.info("kernel backend: %s", _kernels.BACKEND)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"emophone {args.command}: {exc}", file=sys.stderr)
        return exc.code
    except (FoldError, TrainingError) as exc:
        print(f"emophone {args.command}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"emophone {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
