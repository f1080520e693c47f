"""Expected Euler characteristic and Minkowski functional curves.

The Euler characteristic density of a weakly non-Gaussian isotropic field is

    Xi_d(x) = gamma^{d/2} (2 pi)^{-d/2} phi(x) [H_{d-1}(x) + D1_d(x) + D2_d(x)]

where ``D1`` carries the third-order (skewness) derivatives of the point
correlation functions and ``D2`` the squared third-order and linear
fourth-order (kurtosis) ones.  On a box the expected Euler characteristic and
the expected LK curvatures of the excursion set are finite sums of ``Xi_d``
weighted by the box's LK curvatures, exactly as in the Gaussian kinematic
formula.

Every non-Gaussian quantity in :class:`CumulantSet` already includes its power
of the expansion parameter, so no separate ``nu`` is ever passed.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace
from typing import Sequence

import numpy as np

from .geometry import LKVector, flag_coeff, unit_ball_volume
from .hermite import gaussian_pdf, gaussian_tail, hermite_table

#: correction levels, in increasing order of the expansion
LEVELS = ("gaussian", "skewness", "skewness+kurtosis")

THIRD_ORDER = ("k0", "k1", "k11")
FOURTH_ORDER = ("K0", "K1", "K11a", "K11aa", "K111a", "K111d")


@dataclass(frozen=True)
class CumulantSet:
    """Loop-free derivatives of the 2-, 3- and 4-point functions at the origin.

    ``gamma = -rho'(0)``.  ``k0, k1, k11`` are the third-order values
    ``kappa^(3)``, ``d/dx12``, ``d2/dx12 dx13``; ``K0 ... K111d`` the fourth-order
    ones with representative slots ``()``, ``(12)``, ``(12,13)``, ``(12,34)``,
    ``(12,13,24)``, ``(12,13,14)``.  Derivatives whose diagram has a loop are not
    representable on purpose: they cannot influence the expected curves.
    """

    gamma: float
    k0: float = 0.0
    k1: float = 0.0
    k11: float = 0.0
    K0: float = 0.0
    K1: float = 0.0
    K11a: float = 0.0
    K11aa: float = 0.0
    K111a: float = 0.0
    K111d: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            v = float(getattr(self, f.name))
            if not math.isfinite(v):
                raise ValueError(f"{f.name} must be finite, got {v}")
            object.__setattr__(self, f.name, v)
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")

    @classmethod
    def gaussian(cls, gamma: float) -> "CumulantSet":
        return cls(gamma=gamma)

    def third_order_only(self) -> "CumulantSet":
        return replace(self, **{k: 0.0 for k in FOURTH_ORDER})

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


def _order(level) -> int:
    if isinstance(level, int):
        if level not in (0, 1, 2):
            raise ValueError(f"correction order must be 0, 1 or 2, got {level}")
        return level
    try:
        return LEVELS.index(level)
    except ValueError:
        raise ValueError(f"unknown correction level {level!r}; expected one of {LEVELS}") from None


def _delta1(n: int, H, c: CumulantSet):
    # H[k + 1] is H_k
    g = c.gamma
    out = c.k0 / 6 * H[n + 3]
    if n >= 1:
        out = out - 0.5 / g * c.k1 * n * H[n + 1]
    if n >= 2:
        out = out + 0.5 / g**2 * c.k11 * n * (n - 1) * H[n - 1]
    return out


def _delta2(n: int, H, c: CumulantSet):
    g = c.gamma
    k0, k1, k11 = c.k0, c.k1, c.k11
    out = (c.K0 / 24 - k0 * k1 * n / (12 * g)) * H[n + 4] + k0**2 / 72 * H[n + 6]
    if n >= 1:
        b1 = -c.K1 / (4 * g) + (3 * k1**2 * (n - 2) + 2 * k0 * k11 * (n - 1)) / (24 * g**2)
        a1 = (c.K11aa * (n - 2) + 4 * c.K11a * (n - 1)) / (8 * g**2) \
            - k1 * k11 * (n - 1) * (n - 4) / (4 * g**3)
        out = out + b1 * n * H[n + 2] + a1 * n * H[n]
    if n >= 3:
        a3 = -(3 * c.K111a + c.K111d) / (6 * g**3) + k11**2 * (n - 7) / (8 * g**4)
        out = out + a3 * n * (n - 1) * (n - 2) * H[n - 2]
    return out


def delta1(n: int, x, c: CumulantSet):
    """First-order (skewness) correction to ``H_{n-1}``."""
    if n < 0:
        raise ValueError("dimension must be >= 0")
    out = _delta1(n, hermite_table(n + 6, x), c)
    return out[()] if np.ndim(out) == 0 else out


def delta2(n: int, x, c: CumulantSet):
    """Second-order (kurtosis and squared-skewness) correction to ``H_{n-1}``."""
    if n < 0:
        raise ValueError("dimension must be >= 0")
    out = _delta2(n, hermite_table(n + 6, x), c)
    return out[()] if np.ndim(out) == 0 else out


def ec_density(n: int, x, c: CumulantSet, level="skewness+kurtosis"):
    """Euler characteristic density ``Xi_n(x)`` truncated at the given correction level."""
    if n < 0:
        raise ValueError("dimension must be >= 0")
    order = _order(level)
    x = np.asarray(x, dtype=float)
    H = hermite_table(n + 6, x)
    phi = gaussian_pdf(x)
    pref = (c.gamma / (2 * math.pi)) ** (n / 2)
    if n == 0:
        base = gaussian_tail(x)
    else:
        base = pref * phi * H[n]
    corr = 0.0
    if order >= 1:
        corr = _delta1(n, H, c)
    if order >= 2:
        corr = corr + _delta2(n, H, c)
    out = base + pref * phi * corr
    return out[()] if np.ndim(out) == 0 else out


def expected_lk_excursion(k: int, lk: LKVector, v, c: CumulantSet, level="skewness+kurtosis"):
    """Expected ``L_k`` of the excursion set ``{X >= v}`` over a domain with curvatures ``lk``."""
    n = lk.n
    if not 0 <= k <= n:
        raise ValueError(f"k must be in 0..{n}, got {k}")
    total = 0.0
    for d in range(n - k + 1):
        total = total + flag_coeff(k, d) * lk[k + d] * ec_density(d, v, c, level)
    return total


def expected_ec(lk: LKVector, v, c: CumulantSet, level="skewness+kurtosis"):
    """Expected Euler characteristic of the excursion set."""
    return expected_lk_excursion(0, lk, v, c, level)


def expected_minkowski(j: int, lk: LKVector, v, c: CumulantSet, level="skewness+kurtosis"):
    """Expected Minkowski functional ``M_j`` (Steiner normalization) of the excursion set."""
    n = lk.n
    k = n - j
    if not 0 <= k <= n:
        raise ValueError(f"j must be in 0..{n}, got {j}")
    return unit_ball_volume(j) * expected_lk_excursion(k, lk, v, c, level) / math.comb(n, k)


def local_power_shift(k: int, lk: LKVector, v, c: CumulantSet):
    """Mean shift of ``L_k(E_v)`` at first order in the non-Gaussianity.

    The d-th term is scaled by ``gamma^{d/2}``, consistent with the Euler
    characteristic densities used in :func:`expected_lk_excursion`.  Fourth-order
    fields are ignored.
    """
    n = lk.n
    if not 0 <= k <= n:
        raise ValueError(f"k must be in 0..{n}, got {k}")
    v = np.asarray(v, dtype=float)
    phi = gaussian_pdf(v)
    total = 0.0
    for d in range(n - k + 1):
        pref = (c.gamma / (2 * math.pi)) ** (d / 2)
        total = total + flag_coeff(k, d) * lk[k + d] * pref * phi * delta1(d, v, c)
    return total


def tn_statistic(sample_values: Sequence[float], null_mean: float, null_sd: float) -> float:
    """Standardized sum ``N^{-1/2} sum (x_i - mu) / sigma``."""
    if not null_sd > 0:
        raise ValueError(f"null standard deviation must be positive, got {null_sd}")
    x = np.asarray(sample_values, dtype=float)
    if x.size < 1:
        raise ValueError("need at least one sample")
    return float(np.sum((x - null_mean) / null_sd) / math.sqrt(x.size))


def theory_table(lk: LKVector, v_grid, c: CumulantSet, level="skewness+kurtosis") -> dict[str, np.ndarray]:
    """Columns ``Xi_0..Xi_n``, ``E_chi`` and ``E_LK_0..E_LK_n`` on a threshold grid."""
    v = np.asarray(v_grid, dtype=float)
    n = lk.n
    cols: dict[str, np.ndarray] = {"v": v}
    for d in range(n + 1):
        cols[f"Xi_{d}"] = np.broadcast_to(ec_density(d, v, c, level), v.shape).astype(float)
    cols["E_chi"] = np.broadcast_to(expected_ec(lk, v, c, level), v.shape).astype(float)
    for k in range(n + 1):
        cols[f"E_LK_{k}"] = np.broadcast_to(expected_lk_excursion(k, lk, v, c, level), v.shape).astype(float)
    return cols
