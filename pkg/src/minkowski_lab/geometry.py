"""Intrinsic volumes of boxes and the Steiner tube formula."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class LKVector:
    """Lipschitz-Killing curvatures ``(L_0, ..., L_n)`` of an index set."""

    values: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise ValueError("LKVector needs at least L_0")
        if any(v < 0 for v in vals):
            raise ValueError(f"Lipschitz-Killing curvatures of a box are nonnegative: {vals}")
        object.__setattr__(self, "values", vals)

    @property
    def n(self) -> int:
        return len(self.values) - 1

    def __getitem__(self, d: int) -> float:
        return self.values[d]

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self):
        return iter(self.values)


def unit_ball_volume(d: int) -> float:
    """Volume of the unit ball in ``R^d``."""
    if d < 0:
        raise ValueError(f"dimension must be >= 0, got {d}")
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def unit_sphere_area(d: int) -> float:
    """Surface area of the unit sphere ``S^{d-1}`` in ``R^d``."""
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    return 2 * math.pi ** (d / 2) / math.gamma(d / 2)


def flag_coeff(k: int, d: int) -> float:
    """Flag coefficient ``[k+d, k]`` from Crofton's formula."""
    if k < 0 or d < 0:
        raise ValueError("flag coefficient needs k, d >= 0")
    if k == 0 or d == 0:
        return 1.0
    return (
        math.gamma((k + d + 1) / 2) * math.gamma(0.5)
        / (math.gamma((k + 1) / 2) * math.gamma((d + 1) / 2))
    )


def lk_rectangle(edges: Sequence[float]) -> LKVector:
    """LK curvatures of ``[0, e_1] x ... x [0, e_n]``: elementary symmetric sums of the edges."""
    edges = [float(e) for e in edges]
    if any(not e > 0 for e in edges):
        raise ValueError(f"box edges must be positive: {edges}")
    # coefficients of prod (1 + e_i t)
    poly = [1.0]
    for e in edges:
        poly = [a + e * b for a, b in zip(poly + [0.0], [0.0] + poly)]
    return LKVector(tuple(poly))


def steiner_tube_volume(lk: LKVector, rho: float) -> float:
    """``sum_j omega_{n-j} rho^{n-j} L_j``."""
    if rho < 0:
        raise ValueError("tube radius must be >= 0")
    n = lk.n
    return float(sum(unit_ball_volume(n - j) * rho ** (n - j) * lk[j] for j in range(n + 1)))


def mc_tube_volume(edges: Sequence[float], rho: float, samples: int = 1_000_000,
                   seed: int = 0, chunk: int = 250_000) -> tuple[float, float]:
    """Hit-or-miss estimate of the tube volume about a box, with its binomial standard error."""
    if samples < 1000:
        raise ValueError("need at least 1000 samples")
    if rho < 0:
        raise ValueError("tube radius must be >= 0")
    e = np.asarray(edges, dtype=float)
    if np.any(e <= 0):
        raise ValueError("box edges must be positive")
    if rho == 0:
        # a box has no volume outside itself
        return float(np.prod(e)), 0.0
    rng = np.random.default_rng(seed)
    # sample a box strictly larger than the tube, so the estimate is random in every dimension
    pad = 1.25 * rho + 0.05 * float(e.max())
    lo, hi = -pad, e + pad
    box_vol = float(np.prod(hi - lo))
    hits = 0
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        pts = lo + rng.random((m, e.size)) * (hi - lo)
        gap = np.maximum(np.maximum(-pts, pts - e), 0.0)
        hits += int(np.count_nonzero(np.einsum("ij,ij->i", gap, gap) <= rho * rho))
        done += m
    p = hits / samples
    return box_vol * p, box_vol * math.sqrt(p * (1 - p) / samples)
