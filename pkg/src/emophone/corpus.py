"""Corpus data model, phone/emotion inventories and manifest I/O.

A manifest is UTF-8 JSON Lines. The first line is a header carrying
``origin`` and ``frame_hop_ms``; every further line is one utterance::

    {"origin": "acted", "frame_hop_ms": 10.0}
    {"id": "u1", "speaker": "s1", "emotion": "sad", "tokens": ["hi"],
     "segments": [{"phone": "HH", "start": 0, "end": 4}], "features": "feats/u1.fmx"}

Feature paths are relative to the manifest's directory.
"""
from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

EMOTIONS = ("angry", "happy", "neutral", "sad")
EMOTION_INDEX = {e: i for i, e in enumerate(EMOTIONS)}

PHONES = (
    "AA", "AE", "AH", "AO", "AW", "AY", "B", "CH", "D", "DH", "EH", "ER", "EY",
    "F", "G", "HH", "IH", "IY", "JH", "K", "L", "M", "N", "NG", "OW", "OY", "P",
    "R", "S", "SH", "T", "TH", "UH", "UW", "V", "W", "Y", "Z", "ZH",
)
PHONE_SET = frozenset(PHONES)
SIL = "SIL"

ORIGINS = ("natural", "acted", "synthetic-A", "synthetic-B")


class CorpusError(ValueError):
    """Invalid corpus content or manifest."""


def parse_emotion(text):
    label = str(text).strip().lower()
    if label not in EMOTION_INDEX:
        raise CorpusError(f"unknown emotion {text!r}; expected one of {', '.join(EMOTIONS)}")
    return label


def parse_phone(text):
    """Parse an ARPAbet phone, case-insensitively, to its canonical uppercase form."""
    sym = str(text).strip().upper()
    if sym not in PHONE_SET:
        raise CorpusError(f"unknown phone {text!r}")
    return sym


def time_span_to_frames(start_s, end_s, frame_hop_ms):
    """Convert a time-stamped alignment span to frame indices (floor start, ceil end)."""
    hop = frame_hop_ms / 1000.0
    start = int(math.floor(start_s / hop + 1e-9))
    end = int(math.ceil(end_s / hop - 1e-9))
    return start, max(end, start + 1)


@dataclass(frozen=True)
class PhonemeSegment:
    phone: str
    start_frame: int
    end_frame: int

    def __post_init__(self):
        object.__setattr__(self, "start_frame", int(self.start_frame))
        object.__setattr__(self, "end_frame", int(self.end_frame))
        if self.start_frame < 0 or self.start_frame >= self.end_frame:
            raise CorpusError(
                f"bad segment {self.phone} [{self.start_frame}, {self.end_frame})"
            )


@dataclass(frozen=True, eq=False)
class Utterance:
    id: str
    speaker: str
    emotion: str
    tokens: tuple
    segments: tuple
    features: np.ndarray = field(repr=False)
    features_path: str | None = None

    @property
    def n_frames(self):
        return int(self.features.shape[0])

    def validate(self):
        if not self.tokens:
            raise CorpusError(f"utterance {self.id}: no tokens")
        if not self.segments:
            raise CorpusError(f"utterance {self.id}: no segments")
        prev_end = 0
        for seg in self.segments:
            if seg.start_frame < prev_end:
                raise CorpusError(f"utterance {self.id}: segments overlap or are unsorted")
            prev_end = seg.end_frame
        if prev_end > self.n_frames:
            raise CorpusError(
                f"utterance {self.id}: segment end_frame {prev_end} exceeds "
                f"frame count {self.n_frames}"
            )
        if not np.all(np.isfinite(self.features)):
            raise CorpusError(f"utterance {self.id}: non-finite features")


@dataclass(frozen=True, eq=False)
class Corpus:
    origin: str
    utterances: tuple
    vocabulary: dict
    frame_hop_ms: float = 10.0
    many_speakers: bool = False

    def __len__(self):
        return len(self.utterances)

    @property
    def speakers(self):
        return sorted({u.speaker for u in self.utterances})

    def subset(self, ids):
        """Corpus restricted to ``ids`` (vocabulary is kept whole)."""
        keep = set(ids)
        return Corpus(
            origin=self.origin,
            utterances=tuple(u for u in self.utterances if u.id in keep),
            vocabulary=self.vocabulary,
            frame_hop_ms=self.frame_hop_ms,
            many_speakers=self.many_speakers,
        )


def build_vocabulary(utterances):
    tokens = sorted({tok for u in utterances for tok in u.tokens})
    return {tok: i for i, tok in enumerate(tokens)}


def make_corpus(origin, utterances, frame_hop_ms=10.0, many_speakers=None):
    """Validate utterances and assemble an immutable Corpus."""
    if origin not in ORIGINS:
        raise CorpusError(f"unknown corpus origin {origin!r}")
    seen = set()
    for u in utterances:
        if u.id in seen:
            raise CorpusError(f"duplicate utterance id {u.id!r}")
        seen.add(u.id)
        u.validate()
    if many_speakers is None:
        many_speakers = origin == "natural"
    return Corpus(
        origin=origin,
        utterances=tuple(utterances),
        vocabulary=build_vocabulary(utterances),
        frame_hop_ms=float(frame_hop_ms),
        many_speakers=bool(many_speakers),
    )


def _parse_segments(raw, frame_hop_ms):
    segments = []
    for s in raw:
        if "start" in s:
            start, end = int(s["start"]), int(s["end"])
        else:
            start, end = time_span_to_frames(float(s["start_s"]), float(s["end_s"]), frame_hop_ms)
        segments.append(PhonemeSegment(parse_phone(s["phone"]), start, end))
    return tuple(segments)


def load_manifest(path):
    """Read and validate a manifest; feature files are loaded eagerly."""
    from .dsp import read_fmx

    path = Path(path)
    base = path.parent
    with open(path, encoding="utf-8") as fh:
        lines = [(i + 1, ln) for i, ln in enumerate(fh) if ln.strip()]
    if not lines:
        raise CorpusError(f"{path}: empty corpus")
    header_line, header_text = lines[0]
    try:
        header = json.loads(header_text)
    except json.JSONDecodeError as exc:
        raise CorpusError(f"{path}:{header_line}: bad header: {exc}") from None
    if "origin" not in header:
        raise CorpusError(f"{path}:{header_line}: header must carry 'origin'")
    frame_hop_ms = float(header.get("frame_hop_ms", 10.0))
    records = lines[1:]
    if not records:
        raise CorpusError(f"{path}: empty corpus")

    utterances = []
    seen = {}
    for lineno, text in records:
        uid = "?"
        try:
            rec = json.loads(text)
            uid = str(rec["id"])
            if uid in seen:
                raise CorpusError(f"duplicate utterance id (first seen on line {seen[uid]})")
            seen[uid] = lineno
            feat_rel = rec["features"]
            feat_path = base / feat_rel
            if not feat_path.is_file():
                raise CorpusError(f"missing feature file {feat_rel}")
            fm = read_fmx(feat_path)
            utt = Utterance(
                id=uid,
                speaker=str(rec["speaker"]),
                emotion=parse_emotion(rec["emotion"]),
                tokens=tuple(str(t) for t in rec["tokens"]),
                segments=_parse_segments(rec["segments"], frame_hop_ms),
                features=fm.frames,
                features_path=str(feat_rel),
            )
            utt.validate()
        except (CorpusError, KeyError, TypeError, ValueError) as exc:
            msg = str(exc) if not isinstance(exc, KeyError) else f"missing field {exc}"
            raise CorpusError(f"{path}:{lineno}: utterance {uid}: {msg}") from None
        utterances.append(utt)
    try:
        return make_corpus(
            header["origin"], utterances, frame_hop_ms, header.get("many_speakers")
        )
    except CorpusError as exc:
        raise CorpusError(f"{path}: {exc}") from None


def utterance_record(utt):
    return {
        "id": utt.id,
        "speaker": utt.speaker,
        "emotion": utt.emotion,
        "tokens": list(utt.tokens),
        "segments": [
            {"phone": s.phone, "start": s.start_frame, "end": s.end_frame} for s in utt.segments
        ],
        "features": utt.features_path or f"features/{utt.id}.fmx",
    }


def write_manifest(corpus, path, write_features=True):
    """Write ``corpus`` as a manifest; feature files go next to it unless disabled."""
    from .dsp import FeatureMatrix, write_fmx

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {
        "origin": corpus.origin,
        "frame_hop_ms": corpus.frame_hop_ms,
        "many_speakers": corpus.many_speakers,
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for utt in corpus.utterances:
            rec = utterance_record(utt)
            if write_features:
                target = path.parent / rec["features"]
                target.parent.mkdir(parents=True, exist_ok=True)
                write_fmx(target, FeatureMatrix(utt.features, corpus.frame_hop_ms))
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    return path


def class_counts(corpus):
    counts = dict.fromkeys(EMOTIONS, 0)
    for u in corpus.utterances:
        counts[u.emotion] += 1
    return counts


def class_weights(counts):
    """Inverse-frequency class weights ``N / (K * n_c)``."""
    missing = [e for e in EMOTIONS if counts.get(e, 0) <= 0]
    if missing:
        raise CorpusError(f"class weight undefined: zero count for {', '.join(missing)}")
    total = sum(counts[e] for e in EMOTIONS)
    k = len(EMOTIONS)
    return {e: total / (k * counts[e]) for e in EMOTIONS}


def phoneme_totals(corpus):
    """Occurrence count of every phone (one segment = one occurrence)."""
    tally = Counter(s.phone for u in corpus.utterances for s in u.segments)
    return {p: tally.get(p, 0) for p in PHONES}


def relative_phone_frequencies(corpus):
    totals = phoneme_totals(corpus)
    n = sum(totals.values())
    if n == 0:
        return dict.fromkeys(PHONES, 0.0)
    return {p: totals[p] / n for p in PHONES}
