"""Attribution of frame-level attention to phoneme segments."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .corpus import EMOTIONS, PHONE_SET, PHONES, SIL, CorpusError


class AttributionError(ValueError):
    pass


def phoneme_attention(frame_weights, segments):
    """Sum frame weights per phone over its segments' ``[start, end)`` spans.

    Frames not covered by any segment accumulate under ``SIL``.
    """
    w = np.asarray(frame_weights, dtype=np.float64)
    mass = {}
    covered = 0.0
    for seg in segments:
        if seg.end_frame > w.shape[0]:
            raise AttributionError(
                f"segment {seg.phone} ends at {seg.end_frame} beyond {w.shape[0]} frames"
            )
        s = float(w[seg.start_frame:seg.end_frame].sum())
        mass[seg.phone] = mass.get(seg.phone, 0.0) + s
        covered += s
    mass[SIL] = max(0.0, float(w.sum()) - covered)
    return mass


def top_attended(phone_mass, k=1):
    """The ``k`` phones of largest mass (``SIL`` excluded), ties alphabetical."""
    candidates = [(p, m) for p, m in phone_mass.items() if p != SIL]
    if not candidates:
        raise AttributionError("no aligned phones: utterance has SIL coverage only")
    candidates.sort(key=lambda pm: (-pm[1], pm[0]))
    return [p for p, _ in candidates[:k]]


@dataclass
class AttentionRecord:
    utterance_id: str
    emotion: str
    phone_mass: dict
    top_phones: list
    sil_mass: float = 0.0
    frame_weights: np.ndarray | None = field(default=None, repr=False)

    def to_json(self, compact=False):
        d = {
            "utterance_id": self.utterance_id,
            "emotion": self.emotion,
            "phone_mass": {p: float(m) for p, m in sorted(self.phone_mass.items())},
            "sil_mass": float(self.sil_mass),
            "top_phones": list(self.top_phones),
        }
        if not compact and self.frame_weights is not None:
            d["frame_weights"] = [float(x) for x in self.frame_weights]
        return d

    @classmethod
    def from_json(cls, d):
        fw = d.get("frame_weights")
        return cls(
            utterance_id=d["utterance_id"],
            emotion=d["emotion"],
            phone_mass=dict(d["phone_mass"]),
            top_phones=list(d["top_phones"]),
            sil_mass=float(d.get("sil_mass", 0.0)),
            frame_weights=None if fw is None else np.asarray(fw, dtype=np.float64),
        )


def make_record(utterance, frame_weights, k=1):
    mass = phoneme_attention(frame_weights, utterance.segments)
    sil = mass.pop(SIL)
    return AttentionRecord(
        utterance_id=utterance.id,
        emotion=utterance.emotion,
        phone_mass=mass,
        top_phones=top_attended(mass, k),
        sil_mass=sil,
        frame_weights=np.asarray(frame_weights, dtype=np.float64),
    )


def write_records(path, records, compact=False):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json(compact), sort_keys=True) + "\n")


def read_records(path):
    with open(path, encoding="utf-8") as fh:
        return [AttentionRecord.from_json(json.loads(ln)) for ln in fh if ln.strip()]


@dataclass
class AttendedDistribution:
    emotion: str
    normalized_freq: dict
    attended_counts: dict
    totals: dict


def attended_distribution(records, totals):
    """Per-emotion attended counts of each record's top phone, divided by phone totals.

    Returns one ``AttendedDistribution`` per emotion, in ``EMOTIONS`` order.
    Phones with a zero total are left out of ``normalized_freq``.
    """
    present = {p: int(c) for p, c in totals.items() if c > 0}
    counts = {e: dict.fromkeys(present, 0) for e in EMOTIONS}
    for rec in records:
        if not rec.top_phones:
            raise AttributionError(f"record {rec.utterance_id} has no top phone")
        p = rec.top_phones[0]
        if p not in PHONE_SET:
            raise CorpusError(f"record {rec.utterance_id}: unknown phone {p!r}")
        if p not in present:
            raise AttributionError(
                f"phone {p} attended in {rec.utterance_id} but absent from totals"
            )
        counts[rec.emotion][p] += 1
    out = []
    for e in EMOTIONS:
        freq = {p: counts[e][p] / present[p] for p in PHONES if p in present}
        out.append(AttendedDistribution(e, freq, counts[e], present))
    return out
