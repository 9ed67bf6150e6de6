import numpy as np
import pytest

from emophone.corpus import EMOTIONS, PHONES, PhonemeSegment, Utterance, make_corpus


def tiny_utterance(uid, speaker, emotion, phones, durations, n_mels=6, seed=0):
    rng = np.random.default_rng(seed)
    segments = []
    start = 0
    for p, d in zip(phones, durations):
        segments.append(PhonemeSegment(p, start, start + d))
        start += d
    return Utterance(
        id=uid,
        speaker=speaker,
        emotion=emotion,
        tokens=tuple("w" + p.lower() for p in phones),
        segments=tuple(segments),
        features=rng.standard_normal((start, n_mels)).astype(np.float32),
        features_path=f"features/{uid}.fmx",
    )


def tiny_corpus(n_speakers=3, per_speaker=4, origin="acted", seed=0, many_speakers=None):
    rng = np.random.default_rng(seed)
    utts = []
    for s in range(n_speakers):
        for j in range(per_speaker):
            k = s * per_speaker + j
            phones = [PHONES[i] for i in rng.integers(0, 10, size=4)]
            utts.append(
                tiny_utterance(
                    f"u{k:03d}", f"s{s}", EMOTIONS[k % 4], phones,
                    rng.integers(2, 5, size=4), seed=k,
                )
            )
    return make_corpus(origin, utts, 10.0, many_speakers)


@pytest.fixture
def small_corpus():
    return tiny_corpus()


_VERDICTS = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_VERDICTS] = []


@pytest.fixture
def verdict(request):
    """Record one acceptance line: ``verdict(number, passed, detail)``."""

    def record(number, passed, detail):
        request.config.stash[_VERDICTS].append((number, bool(passed), detail))
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = sorted(config.stash[_VERDICTS])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in lines:
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
