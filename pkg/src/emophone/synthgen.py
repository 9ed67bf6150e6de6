"""Paired synthetic corpora with a planted phonetic-basis difference.

Each emotion owns a marker phone. The marker is sampled more often in
utterances of its emotion (usage boost, one factor per corpus) and its frames
are shifted by a constant offset when the utterance carries that emotion.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .corpus import (
    EMOTIONS,
    PHONES,
    PhonemeSegment,
    Utterance,
    make_corpus,
    parse_emotion,
    parse_phone,
    write_manifest,
)

DEFAULT_MARKERS = {"angry": "AA", "happy": "IY", "neutral": "N", "sad": "S"}


class SynthConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SynthConfig:
    n_utterances: int = 400
    min_phones: int = 8
    max_phones: int = 20
    min_duration: int = 3
    max_duration: int = 10
    n_mels: int = 40
    markers: dict = field(default_factory=lambda: dict(DEFAULT_MARKERS))
    delta_a: float = 2.0
    delta_b: float = 2.0
    noise: float = 0.5
    boost_a: float = 3.0
    boost_b: float = 1.5
    # base sampling weight of each marker phone relative to 1.0 for every other phone
    marker_base_weight: float = 4.0
    n_speakers: int = 10
    frame_hop_ms: float = 10.0

    def __post_init__(self):
        markers = {parse_emotion(e): parse_phone(p) for e, p in dict(self.markers).items()}
        if set(markers) != set(EMOTIONS):
            raise SynthConfigError("marker map must name a phone for every emotion")
        if len(set(markers.values())) != len(markers):
            raise SynthConfigError(f"marker phones must be distinct, got {markers}")
        object.__setattr__(self, "markers", {e: markers[e] for e in EMOTIONS})
        if self.n_utterances < 1 or self.n_speakers < 1:
            raise SynthConfigError("n_utterances and n_speakers must be >= 1")
        if not 1 <= self.min_phones <= self.max_phones:
            raise SynthConfigError("need 1 <= min_phones <= max_phones")
        if not 1 <= self.min_duration <= self.max_duration:
            raise SynthConfigError("need 1 <= min_duration <= max_duration")
        if self.delta_a < 0 or self.delta_b < 0:
            raise SynthConfigError("marker offsets must be >= 0")
        if self.noise <= 0:
            raise SynthConfigError("noise must be > 0")
        if self.boost_a <= 0 or self.boost_b <= 0 or self.marker_base_weight <= 0:
            raise SynthConfigError("boosts and marker_base_weight must be > 0")

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise SynthConfigError(f"unknown synth config keys: {', '.join(sorted(unknown))}")
        return cls(**d)

    @classmethod
    def from_file(cls, path):
        path = Path(path)
        if path.suffix.lower() == ".toml":
            try:
                import tomllib
            except ImportError:  # Python < 3.11
                import tomli as tomllib
            data = tomllib.loads(path.read_text(encoding="utf-8"))
        else:
            data = json.loads(path.read_text(encoding="utf-8"))
        return cls.from_dict(data)

    def to_dict(self):
        return asdict(self)

    def phone_distribution(self, emotion, boost):
        """Sampling probabilities over ``PHONES`` for an utterance of ``emotion``."""
        marker_set = set(self.markers.values())
        w = np.array([self.marker_base_weight if p in marker_set else 1.0 for p in PHONES])
        w[PHONES.index(self.markers[emotion])] *= boost
        return w / w.sum()


def _token(phone):
    return "w" + phone.lower()


def _balanced_labels(n, rng):
    labels = np.arange(n) % len(EMOTIONS)
    return labels[rng.permutation(n)]


def _generate_corpus(config, origin, prefix, boost, delta, prototypes, rng):
    labels = _balanced_labels(config.n_utterances, rng)
    dists = {e: config.phone_distribution(e, boost) for e in EMOTIONS}
    utterances = []
    for i in range(config.n_utterances):
        emotion = EMOTIONS[labels[i]]
        marker = PHONES.index(config.markers[emotion])
        length = int(rng.integers(config.min_phones, config.max_phones + 1))
        phones = rng.choice(len(PHONES), size=length, p=dists[emotion])
        durations = rng.integers(config.min_duration, config.max_duration + 1, size=length)
        total = int(durations.sum())
        frames = np.empty((total, config.n_mels), dtype=np.float64)
        segments = []
        start = 0
        for p, d in zip(phones, durations):
            d = int(d)
            mean = prototypes[p] + (delta if p == marker else 0.0)
            frames[start:start + d] = mean + config.noise * rng.standard_normal((d, config.n_mels))
            segments.append(PhonemeSegment(PHONES[p], start, start + d))
            start += d
        uid = f"{prefix}{i:05d}"
        utterances.append(
            Utterance(
                id=uid,
                speaker=f"spk{i % config.n_speakers:02d}",
                emotion=emotion,
                tokens=tuple(_token(PHONES[p]) for p in phones),
                segments=tuple(segments),
                features=frames.astype(np.float32),
                features_path=f"features/{uid}.fmx",
            )
        )
    return make_corpus(origin, utterances, config.frame_hop_ms, many_speakers=False)


def generate_pair(config, seed, out_a=None, out_b=None):
    """Generate corpora A and B; optionally write each as manifest + features.

    Phone prototypes are shared by both corpora; A and B draw from
    independent child streams of ``seed``.
    """
    proto_ss, a_ss, b_ss = np.random.SeedSequence(int(seed)).spawn(3)
    prototypes = np.random.default_rng(proto_ss).standard_normal((len(PHONES), config.n_mels))
    corpus_a = _generate_corpus(
        config, "synthetic-A", "a", config.boost_a, config.delta_a, prototypes,
        np.random.default_rng(a_ss),
    )
    corpus_b = _generate_corpus(
        config, "synthetic-B", "b", config.boost_b, config.delta_b, prototypes,
        np.random.default_rng(b_ss),
    )
    for corpus, out in ((corpus_a, out_a), (corpus_b, out_b)):
        if out is not None:
            out = Path(out)
            write_manifest(corpus, out / "manifest.jsonl")
            echo = {"seed": int(seed), "config": config.to_dict()}
            (out / "synth_config.json").write_text(
                json.dumps(echo, sort_keys=True, indent=2) + "\n", encoding="utf-8"
            )
    return corpus_a, corpus_b


def expected_phone_distribution(config, boost):
    """Mixture over the (balanced) emotions of the per-emotion sampling laws."""
    return np.mean([config.phone_distribution(e, boost) for e in EMOTIONS], axis=0)


def planted_truth(config):
    """Marker map plus the expected A-vs-B direction of each marker's attended frequency."""
    differs = config.boost_a != config.boost_b or config.delta_a != config.delta_b
    expected = {}
    for e in EMOTIONS:
        if config.boost_a > config.boost_b:
            expected[e] = "A>B"
        elif config.boost_a < config.boost_b:
            expected[e] = "A<B"
        else:
            expected[e] = "differs" if differs else "none"
    return {
        "markers": dict(config.markers),
        "difference_expected": differs,
        "marker_frequency_direction": expected,
    }
