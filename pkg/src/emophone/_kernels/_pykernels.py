"""Pure numpy implementations of the hot kernels.

Used when the compiled extension is unavailable or when
``EMOPHONE_PURE_PYTHON=1`` is set. Signatures mirror ``_ckernels``.
"""
import numpy as np


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def lstm_recurrence(zx, w_h):
    """Run the LSTM recurrence given precomputed input projections.

    ``zx`` is ``(n, 4h)``: ``x_t @ W_x + b`` for every step, gate blocks
    ordered input, forget, cell candidate, output. ``w_h`` is ``(h, 4h)``.
    Returns hidden states, cell states and activated gates.
    """
    n, four_h = zx.shape
    h = four_h // 4
    dtype = zx.dtype
    hs = np.zeros((n, h), dtype=dtype)
    cs = np.zeros((n, h), dtype=dtype)
    gates = np.empty((n, four_h), dtype=dtype)
    h_prev = np.zeros(h, dtype=dtype)
    c_prev = np.zeros(h, dtype=dtype)
    for t in range(n):
        z = zx[t] + h_prev @ w_h
        a = gates[t]
        a[:h] = _sigmoid(z[:h])
        a[h:2 * h] = _sigmoid(z[h:2 * h])
        a[2 * h:3 * h] = np.tanh(z[2 * h:3 * h])
        a[3 * h:] = _sigmoid(z[3 * h:])
        c_prev = a[h:2 * h] * c_prev + a[:h] * a[2 * h:3 * h]
        h_prev = a[3 * h:] * np.tanh(c_prev)
        cs[t] = c_prev
        hs[t] = h_prev
    return hs, cs, gates


def lstm_recurrence_backward(dhs, cs, gates, w_h):
    """Backpropagate through the recurrence.

    ``dhs`` holds the upstream gradient for every hidden state. Returns the
    gradient with respect to the pre-activation gates, ``(n, 4h)``.
    """
    n, four_h = gates.shape
    h = four_h // 4
    dtype = gates.dtype
    dz = np.empty((n, four_h), dtype=dtype)
    dh_next = np.zeros(h, dtype=dtype)
    dc_next = np.zeros(h, dtype=dtype)
    for t in range(n - 1, -1, -1):
        i = gates[t, :h]
        f = gates[t, h:2 * h]
        g = gates[t, 2 * h:3 * h]
        o = gates[t, 3 * h:]
        c_prev = cs[t - 1] if t > 0 else np.zeros(h, dtype=dtype)
        tc = np.tanh(cs[t])
        dh = dhs[t] + dh_next
        dc = dc_next + dh * o * (1.0 - tc * tc)
        dz[t, :h] = dc * g * i * (1.0 - i)
        dz[t, h:2 * h] = dc * c_prev * f * (1.0 - f)
        dz[t, 2 * h:3 * h] = dc * i * (1.0 - g * g)
        dz[t, 3 * h:] = dh * tc * o * (1.0 - o)
        dc_next = dc * f
        dh_next = w_h @ dz[t]
    return dz


def fft_power_frames(frames, n_fft):
    """Power spectra of each row of ``frames`` by iterative radix-2 FFT.

    Rows are zero-padded to ``n_fft``. Returns ``(n_frames, n_fft//2 + 1)``
    float64 powers.
    """
    frames = np.asarray(frames, dtype=np.float64)
    n_rows, length = frames.shape
    x = np.zeros((n_rows, n_fft), dtype=np.complex128)
    x[:, :length] = frames
    bits = n_fft.bit_length() - 1
    idx = np.arange(n_fft)
    rev = np.zeros(n_fft, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    x = x[:, rev]
    size = 2
    while size <= n_fft:
        half = size // 2
        tw = np.exp(-2j * np.pi * np.arange(half) / size)
        x = x.reshape(n_rows, n_fft // size, size)
        even = x[:, :, :half]
        odd = x[:, :, half:] * tw
        x = np.concatenate((even + odd, even - odd), axis=2)
        size *= 2
    x = x.reshape(n_rows, n_fft)[:, : n_fft // 2 + 1]
    return x.real ** 2 + x.imag ** 2


def signed_rank_tail_count(ranks2, threshold2):
    """Count sign assignments whose ``min(W+, W-)`` is at most the threshold.

    Ranks are passed doubled (``2 * rank``) so tied half-ranks stay integral.
    Enumerates all ``2**n`` assignments by successive doubling of the
    positive-rank-sum table.
    """
    ranks2 = np.asarray(ranks2, dtype=np.int64)
    total = int(ranks2.sum())
    sums = np.zeros(1, dtype=np.int64)
    for r in ranks2:
        sums = np.concatenate((sums, sums + r))
    lows = np.minimum(sums, total - sums)
    return int(np.count_nonzero(lows <= threshold2))
