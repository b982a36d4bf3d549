"""Two-sample significance tests for small fold-accuracy samples.

Self-contained: the Student-t tail probability is evaluated through the
regularized incomplete beta function I_x(a, b), computed with the
modified Lentz continued fraction (absolute tolerance 1e-10).  For a
two-sided test the p-value is simply

    p = I_x(df / 2, 1 / 2),  x = df / (df + t^2),

which avoids any cancellation in 2 * (1 - cdf(|t|)).

Degenerate zero-variance inputs follow fixed rules: two constant equal
samples give p = 1, two constant different samples give p = 0, and a
single constant sample falls through to the Welch formula with its
variance term equal to zero.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DimensionMismatch, InsufficientData

#: Convergence tolerance of the continued-fraction evaluation.
BETA_CF_TOL = 1e-10

_TEST_KINDS = ("welch", "student", "paired")


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 500):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < BETA_CF_TOL:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    # Use the fraction on the side where it converges fast.
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_two_sided_p(t: float, df: float) -> float:
    """Two-sided p-value of a t statistic with (possibly fractional) df."""
    if df <= 0.0:
        raise InsufficientData(f"degrees of freedom must be positive, got {df!r}")
    x = df / (df + t * t)
    p = regularized_incomplete_beta(df / 2.0, 0.5, x)
    return min(max(p, 0.0), 1.0)


def significance_test(sample_a, sample_b, kind: str = "welch") -> float:
    """Two-sided p-value comparing two accuracy samples.

    kind is one of "welch" (default; unequal variances), "student"
    (pooled variance, df = n_a + n_b - 2), or "paired" (one-sample test
    on the differences; requires equal lengths).
    """
    if kind not in _TEST_KINDS:
        raise ValueError(f"unknown test kind {kind!r}; expected one of {_TEST_KINDS}")
    a = np.asarray(sample_a, dtype=np.float64)
    b = np.asarray(sample_b, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1 or a.size < 2 or b.size < 2:
        raise InsufficientData("each sample needs at least two values")

    if kind == "paired":
        if a.size != b.size:
            raise DimensionMismatch("paired test requires equal-length samples")
        d = a - b
        if np.all(d == d[0]):
            return 1.0 if d[0] == 0.0 else 0.0
        t = float(d.mean()) / (float(d.std(ddof=1)) / math.sqrt(d.size))
        return student_t_two_sided_p(t, d.size - 1)

    const_a = bool(np.all(a == a[0]))
    const_b = bool(np.all(b == b[0]))
    if const_a and const_b:
        return 1.0 if a[0] == b[0] else 0.0

    na, nb = a.size, b.size
    ma, mb = float(a.mean()), float(b.mean())
    va, vb = float(a.var(ddof=1)), float(b.var(ddof=1))

    if kind == "welch":
        se2 = va / na + vb / nb
        t = (ma - mb) / math.sqrt(se2)
        df = se2 * se2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1))
    else:  # pooled-variance Student
        sp2 = ((na - 1) * va + (nb - 1) * vb) / (na + nb - 2)
        t = (ma - mb) / math.sqrt(sp2 * (1.0 / na + 1.0 / nb))
        df = na + nb - 2
    return student_t_two_sided_p(t, df)
