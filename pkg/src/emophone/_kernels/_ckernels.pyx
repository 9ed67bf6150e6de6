# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels. Same contracts as ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, expf, cos, sin, M_PI
from scipy.linalg.cython_blas cimport sgemv, dgemv

cnp.import_array()

cdef extern from *:
    int __builtin_ctzll(unsigned long long) nogil

ctypedef fused real_t:
    float
    double


cdef inline real_t _tanh(real_t x) noexcept nogil:
    # 2*sigmoid(2x) - 1; libm tanh is about twice the cost of exp here
    if real_t is float:
        return 2.0 / (1.0 + expf(-2.0 * x)) - 1.0
    else:
        return 2.0 / (1.0 + exp(-2.0 * x)) - 1.0


cdef inline real_t _sigm(real_t x) noexcept nogil:
    # exp overflow to inf still yields the correct limit 0
    if real_t is float:
        return 1.0 / (1.0 + expf(-x))
    else:
        return 1.0 / (1.0 + exp(-x))


cdef inline void _gemv(char *trans, int m, int n, real_t *a, int lda,
                       real_t *x, real_t *y) noexcept nogil:
    # y += op(A) x with A column-major (m, n)
    cdef int inc = 1
    cdef float s_one = 1.0
    cdef double d_one = 1.0
    if real_t is float:
        sgemv(trans, &m, &n, &s_one, a, &lda, x, &inc, &s_one, y, &inc)
    else:
        dgemv(trans, &m, &n, &d_one, a, &lda, x, &inc, &d_one, y, &inc)


def lstm_recurrence(real_t[:, ::1] zx, real_t[:, ::1] w_h):
    cdef Py_ssize_t n = zx.shape[0]
    cdef Py_ssize_t four_h = zx.shape[1]
    cdef Py_ssize_t h = four_h // 4
    dtype = np.float32 if real_t is float else np.float64
    hs_arr = np.zeros((n, h), dtype=dtype)
    cs_arr = np.zeros((n, h), dtype=dtype)
    gates_arr = np.empty((n, four_h), dtype=dtype)
    cdef real_t[:, ::1] hs = hs_arr
    cdef real_t[:, ::1] cs = cs_arr
    cdef real_t[:, ::1] gates = gates_arr
    cdef real_t[::1] z = np.empty(four_h, dtype=dtype)
    cdef real_t[::1] h_prev = np.zeros(h, dtype=dtype)
    cdef real_t[::1] c_prev = np.zeros(h, dtype=dtype)
    cdef Py_ssize_t t, j
    cdef real_t ig, fg, gg, og, c
    cdef char trans = b'N'
    with nogil:
        for t in range(n):
            for j in range(four_h):
                z[j] = zx[t, j]
            # w_h row-major (h, 4h) == column-major (4h, h); z += w_h^T h_prev
            _gemv(&trans, <int>four_h, <int>h, &w_h[0, 0], <int>four_h,
                  &h_prev[0], &z[0])
            for j in range(h):
                ig = _sigm(z[j])
                fg = _sigm(z[h + j])
                gg = _tanh(z[2 * h + j])
                og = _sigm(z[3 * h + j])
                gates[t, j] = ig
                gates[t, h + j] = fg
                gates[t, 2 * h + j] = gg
                gates[t, 3 * h + j] = og
                c = fg * c_prev[j] + ig * gg
                c_prev[j] = c
                cs[t, j] = c
                h_prev[j] = og * _tanh(c)
                hs[t, j] = h_prev[j]
    return hs_arr, cs_arr, gates_arr


def lstm_recurrence_backward(real_t[:, ::1] dhs, real_t[:, ::1] cs,
                             real_t[:, ::1] gates, real_t[:, ::1] w_h):
    cdef Py_ssize_t n = gates.shape[0]
    cdef Py_ssize_t four_h = gates.shape[1]
    cdef Py_ssize_t h = four_h // 4
    dtype = np.float32 if real_t is float else np.float64
    dz_arr = np.empty((n, four_h), dtype=dtype)
    cdef real_t[:, ::1] dz = dz_arr
    cdef real_t[::1] dh_next = np.zeros(h, dtype=dtype)
    cdef real_t[::1] dc_next = np.zeros(h, dtype=dtype)
    cdef Py_ssize_t t, j
    cdef real_t ig, fg, gg, og, tc, dh, dc, c_prev
    cdef char trans = b'T'
    with nogil:
        for t in range(n - 1, -1, -1):
            for j in range(h):
                ig = gates[t, j]
                fg = gates[t, h + j]
                gg = gates[t, 2 * h + j]
                og = gates[t, 3 * h + j]
                c_prev = cs[t - 1, j] if t > 0 else 0.0
                tc = _tanh(cs[t, j])
                dh = dhs[t, j] + dh_next[j]
                dc = dc_next[j] + dh * og * (1.0 - tc * tc)
                dz[t, j] = dc * gg * ig * (1.0 - ig)
                dz[t, h + j] = dc * c_prev * fg * (1.0 - fg)
                dz[t, 2 * h + j] = dc * ig * (1.0 - gg * gg)
                dz[t, 3 * h + j] = dh * tc * og * (1.0 - og)
                dc_next[j] = dc * fg
                dh_next[j] = 0.0
            # dh_next = w_h @ dz[t]
            _gemv(&trans, <int>four_h, <int>h, &w_h[0, 0], <int>four_h,
                  &dz[t, 0], &dh_next[0])
    return dz_arr


def fft_power_frames(frames, Py_ssize_t n_fft):
    cdef double[:, ::1] x = np.ascontiguousarray(frames, dtype=np.float64)
    cdef Py_ssize_t n_rows = x.shape[0]
    cdef Py_ssize_t length = x.shape[1]
    cdef Py_ssize_t n_out = n_fft // 2 + 1
    out_arr = np.empty((n_rows, n_out), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double[::1] re = np.empty(n_fft, dtype=np.float64)
    cdef double[::1] im = np.empty(n_fft, dtype=np.float64)
    cdef double[::1] tw_re = np.empty(n_fft // 2, dtype=np.float64)
    cdef double[::1] tw_im = np.empty(n_fft // 2, dtype=np.float64)
    cdef Py_ssize_t[::1] rev = np.empty(n_fft, dtype=np.intp)
    cdef Py_ssize_t bits = 0, i, j, b, r, size, half, start, k, step
    cdef double ur, ui, vr, vi, wr, wi
    while (1 << bits) < n_fft:
        bits += 1
    for i in range(n_fft):
        j = 0
        for b in range(bits):
            if (i >> b) & 1:
                j |= 1 << (bits - 1 - b)
        rev[i] = j
    for k in range(n_fft // 2):
        tw_re[k] = cos(-2.0 * M_PI * k / n_fft)
        tw_im[k] = sin(-2.0 * M_PI * k / n_fft)
    with nogil:
        for r in range(n_rows):
            for i in range(n_fft):
                j = rev[i]
                re[i] = x[r, j] if j < length else 0.0
                im[i] = 0.0
            size = 2
            while size <= n_fft:
                half = size // 2
                step = n_fft // size
                start = 0
                while start < n_fft:
                    for k in range(half):
                        wr = tw_re[k * step]
                        wi = tw_im[k * step]
                        ur = re[start + k]
                        ui = im[start + k]
                        vr = re[start + k + half] * wr - im[start + k + half] * wi
                        vi = re[start + k + half] * wi + im[start + k + half] * wr
                        re[start + k] = ur + vr
                        im[start + k] = ui + vi
                        re[start + k + half] = ur - vr
                        im[start + k + half] = ui - vi
                    start += size
                size *= 2
            for k in range(n_out):
                out[r, k] = re[k] * re[k] + im[k] * im[k]
    return out_arr


def signed_rank_tail_count(ranks2, long long threshold2):
    cdef long long[::1] r = np.ascontiguousarray(ranks2, dtype=np.int64)
    cdef Py_ssize_t n = r.shape[0]
    cdef long long total = 0
    cdef Py_ssize_t i
    for i in range(n):
        total += r[i]
    cdef unsigned char[::1] positive = np.zeros(n, dtype=np.uint8)
    cdef unsigned long long k, limit = (<unsigned long long>1) << n
    cdef long long s = 0, low
    cdef long long count = 0
    cdef int bit
    with nogil:
        # Gray-code walk: each step flips exactly one sign
        count = 1 if 0 <= threshold2 else 0
        for k in range(1, limit):
            bit = __builtin_ctzll(k)
            if positive[bit]:
                positive[bit] = 0
                s -= r[bit]
            else:
                positive[bit] = 1
                s += r[bit]
            low = s if s < total - s else total - s
            if low <= threshold2:
                count += 1
    return count
