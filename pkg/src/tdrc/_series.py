"""Truncated Taylor series arithmetic.

A series is a 1-d array ``a`` of Taylor coefficients, so that ``a[k]``
multiplies ``t**k``. Every operation keeps the length of its operands;
terms beyond the truncation order are dropped, never estimated.

Coefficients are floats unless the seed value is some other number type
(for instance an ``mpmath.mpf``), in which case object arrays carry that
type through every operation.
"""

import numpy as np

_FLOATS = (float, int, np.floating, np.integer)


def _zeros(n, like):
    if isinstance(like, _FLOATS):
        return np.zeros(n)
    out = np.empty(n, dtype=object)
    out[:] = like * 0
    return out


def variable(value, slope, order):
    """Series of ``value + slope * t`` truncated at ``order``."""
    s = _zeros(order + 1, value)
    s[0] = value
    if order >= 1:
        s[1] = slope + s[1]    # promotes a float slope to the value's type
    return s


def mul(a, b):
    n = len(a)
    return np.convolve(a, b)[:n]


def recip(a):
    if a[0] == 0.0:
        raise ZeroDivisionError("reciprocal of a series with zero constant term")
    n = len(a)
    w = _zeros(n, a[0])
    w[0] = 1.0 / a[0]
    for k in range(1, n):
        w[k] = -np.dot(a[1:k + 1], w[k - 1::-1]) / a[0]
    return w


def ipow(a, p):
    """Non-negative integer power by repeated squaring."""
    result = _zeros(len(a), a[0])
    result[0] = 1.0
    base = a.copy()
    while p:
        if p & 1:
            result = mul(result, base)
        p >>= 1
        if p:
            base = mul(base, base)
    return result


def rpow(a, p):
    """Real power ``a**p``; requires ``a[0] > 0``.

    Uses the recurrence obtained from ``a * w' = p * w * a'``.
    """
    if a[0] <= 0.0:
        raise ValueError("real power of a series needs a positive constant term")
    n = len(a)
    w = _zeros(n, a[0])
    w[0] = a[0] ** p
    for k in range(1, n):
        j = np.arange(1, k + 1)
        w[k] = np.sum(((p + 1.0) * j - k) * a[1:k + 1] * w[k - 1::-1]) / (k * a[0])
    return w


def sincos(a, sin=np.sin, cos=np.cos):
    """Return the series of ``sin(a)`` and ``cos(a)`` together."""
    n = len(a)
    s = _zeros(n, a[0])
    c = _zeros(n, a[0])
    s[0] = sin(a[0])
    c[0] = cos(a[0])
    ja = np.arange(n) * a
    for k in range(1, n):
        s[k] = np.dot(ja[1:k + 1], c[k - 1::-1]) / k
        c[k] = -np.dot(ja[1:k + 1], s[k - 1::-1]) / k
    return s, c


def derivatives(a):
    """Convert Taylor coefficients into derivatives ``k! * a[k]``."""
    fact = np.cumprod(np.concatenate(([1.0], np.arange(1, len(a), dtype=float))))
    return a * fact
