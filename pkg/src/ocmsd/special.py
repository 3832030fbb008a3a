"""Zeroth-order Bessel and Hankel functions.

Power series below ``SERIES_LIMIT``, Hankel's asymptotic expansion above it.
The asymptotic sums are carried until their terms stop shrinking, which at
x = 12 already resolves the functions to ~1e-11.
"""

import math

import numpy as np

EULER_GAMMA = 0.5772156649015329
SERIES_LIMIT = 12.0


def _series(x):
    q = 0.25 * x * x
    term = 1.0
    j0 = 1.0
    harm = 0.0
    ysum = 0.0
    k = 0
    while True:
        k += 1
        term *= -q / (k * k)
        harm += 1.0 / k
        j0 += term
        ysum -= harm * term
        if abs(term) < 1e-17 * max(1.0, abs(j0)) and k > q:
            break
    y0 = (2.0 / math.pi) * ((math.log(0.5 * x) + EULER_GAMMA) * j0 + ysum)
    return j0, y0


def _asymptotic(x):
    # P = sum (-1)^k c_{2k} / x^{2k},  Q = sum (-1)^k c_{2k+1} / x^{2k+1}
    # c_k = prod_{j<=k} (-(2j-1)^2) / (k! 8^k)
    p, q = 1.0, 0.0
    term = 1.0
    last = math.inf
    k = 0
    while True:
        k += 1
        term *= -((2 * k - 1) ** 2) / (k * 8.0 * x)
        if abs(term) >= last or abs(term) < 1e-17:
            break
        last = abs(term)
        sgn = -1.0 if (k // 2) % 2 else 1.0
        if k % 2:
            q += sgn * term
        else:
            p += sgn * term
    chi = x - 0.25 * math.pi
    amp = math.sqrt(2.0 / (math.pi * x))
    return amp * (p * math.cos(chi) - q * math.sin(chi)), amp * (p * math.sin(chi) + q * math.cos(chi))


def bessel_j0_y0(x: float):
    """Return ``(J0(x), Y0(x))`` for real ``x > 0``."""
    if not x > 0:
        raise ValueError("Bessel functions are evaluated for x > 0 only")
    x = float(x)
    return _series(x) if x <= SERIES_LIMIT else _asymptotic(x)


def hankel1_0(x):
    """Hankel function of the first kind, order zero: J0(x) + i Y0(x).

    Accepts a scalar or an array of positive reals.
    """
    xa = np.asarray(x, dtype=float)
    if np.any(~(xa > 0)):
        raise ValueError("H0^(1) is evaluated for x > 0 only")
    if xa.ndim == 0:
        j, y = bessel_j0_y0(float(xa))
        return complex(j, y)
    out = np.empty(xa.shape, dtype=complex)
    for i, v in np.ndenumerate(xa):
        j, y = bessel_j0_y0(float(v))
        out[i] = complex(j, y)
    return out
