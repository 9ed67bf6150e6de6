"""Hot-kernel dispatch.

The compiled ``_ckernels`` extension is used when it imports cleanly;
otherwise (or with ``EMOPHONE_PURE_PYTHON=1``) the numpy fallback is used.
Both expose the same four functions.
"""
import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("EMOPHONE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # noqa: F811

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels

lstm_recurrence = _impl.lstm_recurrence
lstm_recurrence_backward = _impl.lstm_recurrence_backward
fft_power_frames = _impl.fft_power_frames
signed_rank_tail_count = _impl.signed_rank_tail_count


def implementations():
    """Return ``{name: module}`` for every kernel backend importable here."""
    found = {"python": _pykernels}
    try:
        from . import _ckernels

        found["cython"] = _ckernels
    except ImportError:
        pass
    return found
