"""Cross-validated training, attention extraction and the two-corpus comparison."""
from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .attend import attended_distribution, make_record
from .corpus import (
    EMOTIONS,
    PHONES,
    CorpusError,
    class_counts,
    class_weights,
    phoneme_totals,
    relative_phone_frequencies,
)
from .model import TrainConfig, encode_corpus, evaluate, forward, train
from .model.params import ModelConfig, load_token_vectors
from .stats import (
    BoxStats,
    DegenerateTestError,
    TestResult,
    box_stats,
    paired_t_test,
    welch_t_test,
    wilcoxon_signed_rank,
)

log = logging.getLogger(__name__)

FAMILY_CONTENT = "content_bias"
FAMILY_PAIRED = "paired_over_phones"
FAMILY_WELCH = "welch_per_phone"


class FoldError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    train: TrainConfig = field(default_factory=TrainConfig)
    seed: int = 42
    top_k: int = 1
    n_folds: int = 10  # only for many-speaker corpora
    alpha: float = 0.05
    embeddings: str | None = None  # optional token-vector text file
    workers: int = 1

    def to_dict(self):
        d = asdict(self)
        # worker count never influences results, so it is not echoed
        d.pop("workers")
        return d


@dataclass(frozen=True)
class FoldPlan:
    fold_index: int
    train_speakers: frozenset
    test_speakers: frozenset
    train_ids: tuple
    test_ids: tuple
    scheme: str = "loso"


def loso_folds(corpus, seed=42, k=10):
    """Leave-one-speaker-out folds, or seeded emotion-stratified k-fold for many-speaker corpora."""
    speakers = corpus.speakers
    if corpus.many_speakers:
        return _stratified_folds(corpus, seed, k)
    if len(speakers) < 2:
        raise CorpusError(
            f"leave-one-speaker-out needs >= 2 speakers, corpus has {len(speakers)}"
        )
    plans = []
    for i, spk in enumerate(speakers):
        test = tuple(u.id for u in corpus.utterances if u.speaker == spk)
        train_ids = tuple(u.id for u in corpus.utterances if u.speaker != spk)
        plans.append(
            FoldPlan(i, frozenset(speakers) - {spk}, frozenset({spk}), train_ids, test)
        )
    return plans


def _stratified_folds(corpus, seed, k):
    n = len(corpus)
    if n < k:
        raise CorpusError(f"cannot split {n} utterances into {k} folds")
    rng = np.random.default_rng(seed)
    assign = {}
    offset = 0
    for e in EMOTIONS:
        ids = [u.id for u in corpus.utterances if u.emotion == e]
        for j, pos in enumerate(rng.permutation(len(ids))):
            assign[ids[pos]] = (offset + j) % k
        offset += len(ids)
    plans = []
    for f in range(k):
        test = tuple(u.id for u in corpus.utterances if assign[u.id] == f)
        train_ids = tuple(u.id for u in corpus.utterances if assign[u.id] != f)
        test_spk = frozenset(u.speaker for u in corpus.utterances if assign[u.id] == f)
        train_spk = frozenset(u.speaker for u in corpus.utterances if assign[u.id] != f)
        plans.append(FoldPlan(f, train_spk, test_spk, train_ids, test, "stratified"))
    return plans


@dataclass
class FoldResult:
    fold_index: int
    seed: int
    accuracy: float
    confusion: np.ndarray
    records: list
    train_log: list
    params: object = None


def fold_seed(master_seed, fold_index):
    return int(master_seed) ^ int(fold_index)


def _run_fold(job):
    plan, corpus, config = job
    seed = fold_seed(config.seed, plan.fold_index)
    by_id = {u.id: u for u in corpus.utterances}
    train_utts = [by_id[i] for i in plan.train_ids]
    test_utts = [by_id[i] for i in plan.test_ids]
    try:
        counts = class_counts(corpus.subset(plan.train_ids))
        weights = class_weights(counts)
        train_set = encode_corpus(corpus, train_utts)
        test_set = encode_corpus(corpus, test_utts)
        tconf = TrainConfig(**{**config.train.to_dict(), "seed": seed})
        mconf = ModelConfig(vocab_size=len(corpus.vocabulary), n_mels=test_set[0].features.shape[1])
        pretrained = None
        if config.embeddings:
            pretrained = load_token_vectors(config.embeddings, corpus.vocabulary, mconf.d_embed)
        result = train(train_set, tconf, weights, model_config=mconf, pretrained=pretrained)
        ev = evaluate(test_set, result.params)
        records = [
            make_record(u, forward(ex, result.params).attention_weights, config.top_k)
            for u, ex in zip(test_utts, test_set)
        ]
    except Exception as exc:
        raise FoldError(f"{corpus.origin} fold {plan.fold_index}: {exc}") from exc
    return FoldResult(
        plan.fold_index, seed, ev.accuracy, ev.confusion, records, result.log, result.params
    )


@dataclass
class CorpusRun:
    corpus: object
    plans: list
    folds: list

    @property
    def accuracies(self):
        return [f.accuracy for f in self.folds]


def _map(fn, jobs, workers):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(fn, jobs))


def run_corpus(corpus, config, workers=None):
    """Train and evaluate one model per fold; collect attention records on each test fold."""
    workers = config.workers if workers is None else workers
    plans = loso_folds(corpus, config.seed, config.n_folds)
    jobs = [(p, corpus, config) for p in plans]
    folds = _map(_run_fold, jobs, workers)
    folds.sort(key=lambda f: f.fold_index)
    return CorpusRun(corpus, plans, folds)


# --- distributions -----------------------------------------------------------------

def fold_distributions(run):
    """``{emotion: {phone: [fold value or None, ...]}}`` over phones present in the corpus.

    A fold's value is the phone's attended count for the emotion divided by
    the phone's occurrence count in that fold's test set (``None`` if the
    phone does not occur there).
    """
    present = [p for p, c in phoneme_totals(run.corpus).items() if c > 0]
    out = {e: {p: [] for p in present} for e in EMOTIONS}
    for plan, fold in zip(run.plans, run.folds):
        totals = phoneme_totals(run.corpus.subset(plan.test_ids))
        dists = attended_distribution(fold.records, totals)
        for dist in dists:
            for p in present:
                out[dist.emotion][p].append(dist.normalized_freq.get(p))
    return out


def _mean_defined(values):
    vals = [v for v in values if v is not None]
    return float(np.mean(vals)) if vals else None


def _attended_phones(run):
    att = {e: set() for e in EMOTIONS}
    for fold in run.folds:
        for rec in fold.records:
            att[rec.emotion].add(rec.top_phones[0])
    return att


def _safe(test_fn, method, n, *args, alpha=0.05):
    try:
        return test_fn(*args, alpha=alpha)
    except DegenerateTestError as exc:
        return TestResult.undefined(method, n, str(exc), alpha)


# --- report ------------------------------------------------------------------------

@dataclass
class ComparisonReport:
    config: dict
    seeds: dict
    content_bias: TestResult
    corpora: dict
    paired_tests: dict
    welch_tests: dict
    tested_phones: dict
    excluded_phones: dict
    backend: str = ""

    def to_dict(self):
        return {
            "config": self.config,
            "seeds": self.seeds,
            "content_bias": self.content_bias.to_dict(),
            "corpora": {
                name: {
                    **{k: v for k, v in c.items() if k != "box_stats"},
                    "box_stats": {
                        e: {p: asdict(b) for p, b in per.items()}
                        for e, per in c["box_stats"].items()
                    },
                }
                for name, c in self.corpora.items()
            },
            "paired_tests": {e: t.to_dict() for e, t in self.paired_tests.items()},
            "welch_tests": {
                e: {p: t.to_dict() for p, t in per.items()} for e, per in self.welch_tests.items()
            },
            "tested_phones": self.tested_phones,
            "excluded_phones": self.excluded_phones,
        }

    @classmethod
    def from_dict(cls, d):
        corpora = {}
        for name, c in d["corpora"].items():
            c = dict(c)
            c["box_stats"] = {
                e: {p: BoxStats(**b) for p, b in per.items()} for e, per in c["box_stats"].items()
            }
            corpora[name] = c
        return cls(
            config=d["config"],
            seeds=d["seeds"],
            content_bias=TestResult.from_dict(d["content_bias"]),
            corpora=corpora,
            paired_tests={e: TestResult.from_dict(t) for e, t in d["paired_tests"].items()},
            welch_tests={
                e: {p: TestResult.from_dict(t) for p, t in per.items()}
                for e, per in d["welch_tests"].items()
            },
            tested_phones=d["tested_phones"],
            excluded_phones=d["excluded_phones"],
        )

    def summary_lines(self):
        lines = []
        cb = self.content_bias
        lines.append(f"content bias ({cb.method}): {_fmt_p(cb)}")
        for name, c in self.corpora.items():
            lines.append(
                f"corpus {name} [{c['origin']}]: mean fold accuracy {c['mean_accuracy']:.4f}"
            )
        for e in EMOTIONS:
            t = self.paired_tests[e]
            lines.append(f"{e:8s} paired-over-phones: {_fmt_p(t)}")
        return lines


def _fmt_p(t):
    if t.p_value is None:
        return f"undefined ({t.note})"
    verdict = "reject" if t.reject else "fail to reject"
    return f"p={t.p_value:.6g} ({verdict} at alpha={t.alpha:g})"


def _corpus_summary(run, dists):
    means = {e: {p: _mean_defined(v) for p, v in per.items()} for e, per in dists.items()}
    return {
        "origin": run.corpus.origin,
        "n_utterances": len(run.corpus),
        "fold_scheme": run.plans[0].scheme,
        "fold_accuracies": run.accuracies,
        "mean_accuracy": float(np.mean(run.accuracies)),
        "distributions": {
            e: {p: {"mean": means[e][p], "folds": dists[e][p]} for p in per}
            for e, per in dists.items()
        },
    }


def compare(corpus_a, corpus_b, config, workers=None, runs=None):
    """Full two-corpus comparison; ``runs`` may supply precomputed ``(run_a, run_b)``."""
    alpha = config.alpha
    rel_a = relative_phone_frequencies(corpus_a)
    rel_b = relative_phone_frequencies(corpus_b)
    content = _safe(
        wilcoxon_signed_rank, "wilcoxon", len(PHONES),
        [rel_a[p] for p in PHONES], [rel_b[p] for p in PHONES], alpha=alpha,
    )

    if runs is None:
        runs = (run_corpus(corpus_a, config, workers), run_corpus(corpus_b, config, workers))
    run_a, run_b = runs
    dist_a, dist_b = fold_distributions(run_a), fold_distributions(run_b)
    summary_a, summary_b = _corpus_summary(run_a, dist_a), _corpus_summary(run_b, dist_b)
    att_a, att_b = _attended_phones(run_a), _attended_phones(run_b)
    tot_a, tot_b = phoneme_totals(corpus_a), phoneme_totals(corpus_b)

    paired, welch, tested, excluded = {}, {}, {}, {}
    box = {"A": {}, "B": {}}
    for e in EMOTIONS:
        attended = att_a[e] | att_b[e]
        tested[e] = sorted(p for p in attended if tot_a[p] > 0 and tot_b[p] > 0)
        excluded[e] = sorted(attended - set(tested[e]))
        xs = [summary_a["distributions"][e][p]["mean"] for p in tested[e]]
        ys = [summary_b["distributions"][e][p]["mean"] for p in tested[e]]
        if len(tested[e]) < 2:
            paired[e] = TestResult.undefined(
                "t-paired", len(tested[e]), "fewer than 2 tested phones", alpha
            )
        else:
            paired[e] = _safe(paired_t_test, "t-paired", len(xs), xs, ys, alpha=alpha)
        welch[e] = {}
        for p in tested[e]:
            fa = [v for v in dist_a[e][p] if v is not None]
            fb = [v for v in dist_b[e][p] if v is not None]
            if len(fa) < 2 or len(fb) < 2:
                welch[e][p] = TestResult.undefined(
                    "t-welch", len(fa) + len(fb), "fewer than 2 fold values", alpha
                )
            else:
                welch[e][p] = _safe(welch_t_test, "t-welch", len(fa) + len(fb), fa, fb, alpha=alpha)
        for name, dist in (("A", dist_a), ("B", dist_b)):
            box[name][e] = {}
            for p in sorted(attended):
                vals = [v for v in dist[e].get(p, []) if v is not None]
                if vals:
                    box[name][e][p] = box_stats(vals)
    summary_a["box_stats"] = box["A"]
    summary_b["box_stats"] = box["B"]

    seeds = {
        "master": int(config.seed),
        "folds_A": [f.seed for f in run_a.folds],
        "folds_B": [f.seed for f in run_b.folds],
    }
    return ComparisonReport(
        config=config.to_dict(),
        seeds=seeds,
        content_bias=content,
        corpora={"A": summary_a, "B": summary_b},
        paired_tests=paired,
        welch_tests=welch,
        tested_phones=tested,
        excluded_phones=excluded,
        backend=_kernels.BACKEND,
    )


# --- emission ------------------------------------------------------------------------

def _round_sig(x, digits):
    if x is None or isinstance(x, bool) or not isinstance(x, (float, np.floating)):
        return x
    x = float(x)
    if not math.isfinite(x):
        return None
    return float(f"{x:.{digits}g}")


def canonicalize(obj, key=None):
    """Round floats (9 significant digits; p-values 6) and coerce numpy scalars."""
    if isinstance(obj, dict):
        return {str(k): canonicalize(v, str(k)) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [canonicalize(v, key) for v in obj]
    if isinstance(obj, np.ndarray):
        return canonicalize(obj.tolist(), key)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _round_sig(obj, 6 if key == "p_value" else 9)
    return obj


def report_json(report):
    return json.dumps(canonicalize(report.to_dict()), sort_keys=True, indent=2) + "\n"


def _cell(x, digits=9):
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.{digits}g}"
    return str(x)


def emit_report(report, out_dir, fmt="both"):
    """Write ``report.json`` and/or the CSV exports; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if fmt in ("json", "both"):
        path = out / "report.json"
        path.write_text(report_json(report), encoding="utf-8")
        written.append(path)
    if fmt in ("csv", "both"):
        written += _emit_csvs(report, out)
    return written


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def _emit_csvs(report, out):
    n_folds = max(
        len(next(iter(next(iter(c["distributions"].values())).values()))["folds"])
        for c in report.corpora.values()
    )
    rows = []
    for name, c in report.corpora.items():
        for e in EMOTIONS:
            for p, d in c["distributions"][e].items():
                folds = list(d["folds"]) + [None] * (n_folds - len(d["folds"]))
                rows.append([name, e, p, _cell(d["mean"])] + [_cell(v) for v in folds])
    paths = [
        _write_csv(
            out / "distributions.csv",
            ["corpus", "emotion", "phone", "mean_freq"] + [f"fold_{i}" for i in range(n_folds)],
            rows,
        )
    ]
    rows = []
    for name, c in report.corpora.items():
        for e in EMOTIONS:
            for p, b in sorted(c["box_stats"].get(e, {}).items()):
                rows.append(
                    [name, e, p]
                    + [_cell(getattr(b, k)) for k in
                       ("median", "q1", "q3", "iqr", "whisker_low", "whisker_high")]
                    + [b.n, ";".join(_cell(v) for v in b.outliers)]
                )
    paths.append(
        _write_csv(
            out / "boxstats.csv",
            ["corpus", "emotion", "phone", "median", "q1", "q3", "iqr",
             "whisker_low", "whisker_high", "n", "outliers"],
            rows,
        )
    )

    def test_row(family, emotion, phone, t):
        return [family, emotion, phone, t.method, _cell(t.statistic), _cell(t.df),
                _cell(t.p_value, 6), _cell(t.reject)]

    rows = [test_row(FAMILY_CONTENT, "", "", report.content_bias)]
    for e in EMOTIONS:
        rows.append(test_row(FAMILY_PAIRED, e, "", report.paired_tests[e]))
    for e in EMOTIONS:
        for p, t in sorted(report.welch_tests[e].items()):
            rows.append(test_row(FAMILY_WELCH, e, p, t))
    paths.append(
        _write_csv(
            out / "tests.csv",
            ["family", "emotion", "phone", "method", "statistic", "df", "p", "reject"],
            rows,
        )
    )
    return paths


def load_report(path):
    return ComparisonReport.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
