"""Hypothesis tests and summary statistics.

Everything here is self-contained: the t distribution goes through our own
regularized incomplete beta (modified Lentz continued fraction) and a Lanczos
log-gamma; the normal CDF uses ``math.erfc``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernels

EXACT_WILCOXON_MAX_N = 20


class DegenerateTestError(ValueError):
    """The test statistic is undefined for this input."""


@dataclass(frozen=True)
class TestResult:
    method: str
    statistic: float | None
    p_value: float | None
    n: int
    df: float | None = None
    alpha: float = 0.05
    degenerate: bool = False
    note: str = ""

    __test__ = False  # not a pytest class

    @property
    def reject(self):
        return self.p_value is not None and bool(self.p_value < self.alpha)

    @classmethod
    def undefined(cls, method, n, reason, alpha=0.05):
        """Placeholder for a test that could not be computed."""
        return cls(method, None, None, n, None, alpha, True, reason)

    def to_dict(self):
        d = asdict(self)
        d["reject"] = self.reject
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d.pop("reject", None)
        return cls(**d)


@dataclass(frozen=True)
class BoxStats:
    median: float
    q1: float
    q3: float
    iqr: float
    whisker_low: float
    whisker_high: float
    outliers: list = field(default_factory=list)
    n: int = 0


# --- special functions ------------------------------------------------------

_LANCZOS_G = 7.0
_LANCZOS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


def log_gamma(x):
    """``ln Gamma(x)`` for ``x > 0`` by the Lanczos series (g=7, 9 terms)."""
    if x <= 0:
        raise ValueError("log_gamma requires x > 0")
    if x < 0.5:
        # reflection keeps the series in its accurate range
        return math.log(math.pi / math.sin(math.pi * x)) - log_gamma(1.0 - x)
    x -= 1.0
    acc = _LANCZOS[0]
    for i in range(1, 9):
        acc += _LANCZOS[i] / (x + i)
    t = x + _LANCZOS_G + 0.5
    return 0.5 * math.log(2.0 * math.pi) + (x + 0.5) * math.log(t) - t + math.log(acc)


def _beta_cf(a, b, x, max_iter=5000, eps=1e-16):
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = tiny if abs(d) < tiny else d
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def betainc(a, b, x, xc=None):
    """Regularized incomplete beta ``I_x(a, b)``.

    ``xc`` may carry ``1 - x`` computed without cancellation.
    """
    if xc is None:
        xc = 1.0 - x
    if x <= 0.0:
        return 0.0
    if xc <= 0.0:
        return 1.0
    log_front = (
        a * math.log(x) + b * math.log(xc)
        + log_gamma(a + b) - log_gamma(a) - log_gamma(b)
    )
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(log_front) * _beta_cf(a, b, x) / a
    return 1.0 - math.exp(log_front) * _beta_cf(b, a, xc) / b


def student_t_sf2(t, df):
    """Two-sided tail ``P(|T| >= |t|)`` for Student's t with ``df`` degrees of freedom."""
    if not df > 0:
        raise ValueError("df must be positive")
    t2 = float(t) * float(t)
    if t2 == 0.0:
        return 1.0
    if math.isinf(t2):
        return 0.0
    return betainc(df / 2.0, 0.5, df / (df + t2), t2 / (df + t2))


def student_t_cdf(t, df):
    """CDF of Student's t distribution."""
    if not df > 0:
        raise ValueError("df must be positive")
    half_tail = 0.5 * student_t_sf2(t, df)
    return 1.0 - half_tail if t >= 0 else half_tail


def normal_cdf(z):
    return 0.5 * math.erfc(-float(z) / math.sqrt(2.0))


# --- rank tests ---------------------------------------------------------------

def ranks_with_ties(values):
    """1-based ranks; ties share the mean of the ranks they span."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("ranks of an empty sample")
    order = np.argsort(v, kind="mergesort")
    sorted_v = v[order]
    ranks = np.empty(v.size, dtype=np.float64)
    i = 0
    while i < v.size:
        j = i
        while j + 1 < v.size and sorted_v[j + 1] == sorted_v[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _tie_sizes(values):
    _, counts = np.unique(np.asarray(values), return_counts=True)
    return counts


def wilcoxon_signed_rank(x, y, alpha=0.05, exact_max_n=EXACT_WILCOXON_MAX_N):
    """Two-sided Wilcoxon signed-rank test on paired samples.

    Zero differences are dropped. With at most ``exact_max_n`` non-zero
    differences the p-value comes from enumerating every sign assignment;
    above that a tie-corrected normal approximation with continuity
    correction is used.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or x.size < 1:
        raise ValueError("paired samples must be 1-D and of equal, non-zero length")
    d = x - y
    d = d[d != 0.0]
    n = int(d.size)
    if n == 0:
        raise DegenerateTestError("degenerate: no nonzero differences")
    r = ranks_with_ties(np.abs(d))
    w_plus = float(r[d > 0].sum())
    w_minus = float(r[d < 0].sum())
    w = min(w_plus, w_minus)
    if n <= exact_max_n:
        ranks2 = np.rint(2.0 * r).astype(np.int64)
        count = _kernels.signed_rank_tail_count(ranks2, int(round(2.0 * w)))
        p = min(1.0, count / float(2 ** n))
        return TestResult("wilcoxon-exact", w, p, n, alpha=alpha)
    mean = n * (n + 1) / 4.0
    ties = _tie_sizes(np.abs(d))
    var = n * (n + 1) * (2 * n + 1) / 24.0 - float(np.sum(ties ** 3 - ties)) / 48.0
    if var <= 0:
        raise DegenerateTestError("degenerate: zero variance of the signed-rank statistic")
    z = (w - mean + 0.5) / math.sqrt(var)
    p = min(1.0, max(0.0, 2.0 * normal_cdf(z)))
    return TestResult("wilcoxon-normal", w, p, n, alpha=alpha, note=f"z={z:.6g}")


# --- t tests ------------------------------------------------------------------

def welch_t_test(a, b, alpha=0.05):
    """Two-sided unequal-variance t-test with Welch-Satterthwaite df."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = a.size, b.size
    if na < 2 or nb < 2:
        raise ValueError("welch_t_test needs at least 2 observations per sample")
    va, vb = a.var(ddof=1), b.var(ddof=1)
    ma, mb = a.mean(), b.mean()
    sa, sb = va / na, vb / nb
    se2 = sa + sb
    if se2 == 0.0:
        if ma == mb:
            raise DegenerateTestError("degenerate: both samples constant and equal")
        return TestResult(
            "t-welch", None, 0.0, na + nb, None, alpha, True,
            "both samples constant with different means; p=0 by convention",
        )
    t = (ma - mb) / math.sqrt(se2)
    df = se2 * se2 / (sa * sa / (na - 1) + sb * sb / (nb - 1))
    return TestResult("t-welch", t, student_t_sf2(t, df), na + nb, df, alpha)


def paired_t_test(x, y, alpha=0.05):
    """Two-sided one-sample t-test of ``x - y`` against zero."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("paired samples must be 1-D and of equal length")
    n = x.size
    if n < 2:
        raise ValueError("paired_t_test needs at least 2 pairs")
    d = x - y
    sd = d.std(ddof=1)
    if sd == 0.0:
        raise DegenerateTestError(
            f"degenerate: zero-variance differences (all equal to {d[0]:.6g})"
        )
    t = d.mean() / (sd / math.sqrt(n))
    df = float(n - 1)
    return TestResult("t-paired", t, student_t_sf2(t, df), n, df, alpha)


# --- descriptive ----------------------------------------------------------------

def box_stats(values):
    """Tukey box-plot summary with linearly interpolated quartiles."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("box_stats of an empty sample")
    q1, med, q3 = np.quantile(v, [0.25, 0.5, 0.75], method="linear")
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = v[(v >= lo_fence) & (v <= hi_fence)]
    outliers = sorted(float(x) for x in v[(v < lo_fence) | (v > hi_fence)])
    return BoxStats(
        median=float(med),
        q1=float(q1),
        q3=float(q3),
        iqr=float(iqr),
        whisker_low=float(inside.min()),
        whisker_high=float(inside.max()),
        outliers=outliers,
        n=int(v.size),
    )
