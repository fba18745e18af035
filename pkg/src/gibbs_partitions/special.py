"""Special functions used by the closed-form limit shapes.

Plain float implementations: dilogarithm on [0, 1], regularized upper
incomplete gamma ``Q(s, x)``, the exponential integral ``E1`` and the
non-regularized ``Gamma(s, x)`` for ``s > -1``.
"""
from __future__ import annotations

import math

import numpy as np

_EPS = 1e-16
_TINY = 1e-300
_MAXIT = 10_000
EULER_GAMMA = 0.57721566490153286061


def _li2_series(x: float) -> float:
    total = 0.0
    term = x
    k = 1
    while True:
        add = term / (k * k)
        total += add
        if add < _EPS * total or k > _MAXIT:
            return total
        k += 1
        term *= x


def dilog(x: float) -> float:
    """Li2(x) for 0 <= x <= 1, relative error ~1e-15."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"dilog domain is [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return math.pi ** 2 / 6.0
    if x <= 0.5:
        return _li2_series(x)
    # reflection maps (1/2, 1) onto (0, 1/2)
    y = 1.0 - x
    return math.pi ** 2 / 6.0 - math.log(x) * math.log(y) - _li2_series(y)


def _gamma_p_series(s: float, x: float) -> float:
    ap = s
    total = 1.0 / s
    delta = total
    for _ in range(_MAXIT):
        ap += 1.0
        delta *= x / ap
        total += delta
        if abs(delta) < abs(total) * _EPS:
            break
    return total * math.exp(-x + s * math.log(x) - math.lgamma(s))


def _gamma_q_cf(s: float, x: float) -> float:
    # modified Lentz on the Legendre continued fraction
    b = x + 1.0 - s
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAXIT):
        an = -i * (i - s)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return math.exp(-x + s * math.log(x) - math.lgamma(s)) * h


def upper_incomplete_gamma_regularized(s: float, x: float) -> float:
    """Q(s, x) = Gamma(s, x) / Gamma(s)."""
    if s <= 0:
        raise ValueError("Q(s, x) needs s > 0")
    if x < 0:
        raise ValueError("Q(s, x) needs x >= 0")
    if x == 0.0:
        return 1.0
    if x < s + 1.0:
        return 1.0 - _gamma_p_series(s, x)
    return _gamma_q_cf(s, x)


def exp_integral_e1(x: float) -> float:
    """E1(x) = int_x^inf e^-z / z dz for x > 0."""
    if x <= 0:
        raise ValueError("E1(x) needs x > 0")
    if x <= 1.0:
        total = 0.0
        term = 1.0
        k = 1
        while True:
            term *= -x / k
            add = -term / k
            total += add
            if abs(add) < _EPS * abs(total) or k > _MAXIT:
                break
            k += 1
        return -EULER_GAMMA - math.log(x) + total
    # continued fraction (Lentz)
    b = x + 1.0
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAXIT):
        an = -float(i * i)
        b += 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return h * math.exp(-x)


def upper_gamma(s: float, x: float) -> float:
    """Non-regularized Gamma(s, x) for s > -1 and x > 0 (s = 0 gives E1)."""
    if x <= 0:
        raise ValueError("upper_gamma needs x > 0")
    if s > 0:
        return upper_incomplete_gamma_regularized(s, x) * math.gamma(s)
    if s == 0:
        return exp_integral_e1(x)
    if s <= -1:
        raise ValueError("upper_gamma implemented for s > -1")
    # Gamma(s, x) = (Gamma(s+1, x) - x^s e^-x) / s
    return (upper_incomplete_gamma_regularized(s + 1.0, x) * math.gamma(s + 1.0)
            - x ** s * math.exp(-x)) / s


def poisson_rate(x: float, y: float) -> float:
    """int_x^y e^-z / z dz = E1(x) - E1(y)."""
    if not 0 < x < y:
        raise ValueError("need 0 < x < y")
    return exp_integral_e1(x) - exp_integral_e1(y)


vdilog = np.vectorize(dilog, otypes=[float])
vgammaincc = np.vectorize(upper_incomplete_gamma_regularized, otypes=[float])
ve1 = np.vectorize(exp_integral_e1, otypes=[float])
vupper_gamma = np.vectorize(upper_gamma, otypes=[float])
