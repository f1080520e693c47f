"""Probabilists' Hermite polynomials and Gaussian tail helpers.

``H_k`` follows the convention ``H_k(x) = phi(x)^{-1} (-d/dx)^k phi(x)``, so
``H_0 = 1``, ``H_1 = x``, ``H_2 = x^2 - 1``.  Degree ``-1`` is the Mills ratio
``Phi_bar(x) / phi(x)``, which makes ``int_x^inf H_k phi = H_{k-1}(x) phi(x)``
hold for ``k = 0`` as well.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import special

_SQRT_2PI = math.sqrt(2.0 * math.pi)
_SQRT_HALF_PI = math.sqrt(0.5 * math.pi)


def gaussian_pdf(x):
    """Standard normal density."""
    x = np.asarray(x, dtype=float)
    out = np.exp(-0.5 * x * x) / _SQRT_2PI
    return out[()] if out.ndim == 0 else out


def gaussian_tail(x):
    """Upper tail probability ``P(N(0,1) >= x)``."""
    out = special.ndtr(-np.asarray(x, dtype=float))
    return out[()] if np.ndim(out) == 0 else out


def mills_ratio(x):
    # erfcx keeps the ratio accurate where both tail and density underflow
    out = _SQRT_HALF_PI * special.erfcx(np.asarray(x, dtype=float) / math.sqrt(2.0))
    return out[()] if np.ndim(out) == 0 else out


def hermite(k: int, x):
    """Evaluate ``H_k(x)`` for ``k >= -1``.

    Uses the three-term recurrence ``H_{k+1} = x H_k - k H_{k-1}``.  Accepts
    scalars or arrays.
    """
    k = int(k)
    if k < -1:
        raise ValueError(f"Hermite degree must be >= -1, got {k}")
    if k == -1:
        return mills_ratio(x)
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if k == 0:
        return prev[()] if prev.ndim == 0 else prev
    cur = x.copy()
    for j in range(1, k):
        prev, cur = cur, x * cur - j * prev
    return cur[()] if cur.ndim == 0 else cur


def hermite_table(kmax: int, x) -> np.ndarray:
    """Stack ``H_{-1}(x), H_0(x), ..., H_kmax(x)`` along a new leading axis.

    Row ``k + 1`` holds ``H_k``.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty((kmax + 2,) + x.shape)
    out[0] = mills_ratio(x)
    if kmax >= 0:
        out[1] = 1.0
    if kmax >= 1:
        out[2] = x
    for j in range(1, kmax):
        out[j + 2] = x * out[j + 1] - j * out[j]
    return out


def hermite_tail_integral(k: int, x):
    """``int_x^inf H_k(t) phi(t) dt``, which equals ``H_{k-1}(x) phi(x)``."""
    k = int(k)
    if k < 0:
        raise ValueError(f"tail integral needs k >= 0, got {k}")
    if k == 0:
        return gaussian_tail(x)
    return hermite(k - 1, x) * gaussian_pdf(x)
