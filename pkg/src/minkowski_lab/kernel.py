"""Point correlation functions of the quadratically transformed Gaussian model.

``X`` is a centred Gaussian field with covariance ``exp(-g |s-t|^2 / 2)``,
``S = X * h_tau`` its smoothing by a Gaussian kernel of variance ``tau``,
``Y = X + delta X S`` and ``Z = (Y - E Y) / omega``.  Every N-point function of
``Z`` is a finite sum of terms ``c * exp(-sum_e r_e x_e)`` in the half squared
distances ``x_e``, so its derivatives at the origin are sums of ``c * prod(-r_e)``.

Two sources of exponential terms are kept side by side:

* the closed forms of the model (``*_model`` functions and :func:`model_terms`),
* a Wick-pairing enumeration of the cumulants of ``Z`` (:func:`wick_terms`).

They agree for the 2- and 3-point functions at every ``tau`` and for the
4-point function at ``tau = 0``.  For ``tau > 0`` the closed 4-point form
keeps only part of the pairings, so the two differ; ``variant`` selects which
one feeds :func:`analytic_cumulants`.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .theory import CumulantSet

# argument order of the 3- and 4-point functions
EDGES3 = ((0, 1), (0, 2), (1, 2))
EDGES4 = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))

# representative derivative patterns (one entry per edge slot)
PATTERNS = {
    "k0": (0, 0, 0),
    "k1": (1, 0, 0),
    "k11": (1, 1, 0),
    "K0": (0, 0, 0, 0, 0, 0),
    "K1": (1, 0, 0, 0, 0, 0),
    "K11a": (1, 1, 0, 0, 0, 0),
    "K11aa": (1, 0, 0, 0, 0, 1),
    "K111a": (1, 1, 0, 0, 1, 0),
    "K111d": (1, 1, 1, 0, 0, 0),
}

Terms = list[tuple[float, tuple[float, ...]]]


@dataclass(frozen=True)
class KernelModelParams:
    g: float
    tau: float = 0.0
    delta: float = 0.0
    n: int = 2

    def __post_init__(self):
        if not self.g > 0:
            raise ValueError(f"g must be positive, got {self.g}")
        if not self.tau >= 0:
            raise ValueError(f"tau must be nonnegative, got {self.tau}")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n}")
        object.__setattr__(self, "n", int(self.n))

    # frequently used constants
    @property
    def a1(self) -> float:
        """``1 + g tau``."""
        return 1 + self.g * self.tau

    @property
    def a2(self) -> float:
        """``1 + 2 g tau``."""
        return 1 + 2 * self.g * self.tau


def edge_index(edges: Sequence[tuple[int, int]]) -> dict[frozenset, int]:
    return {frozenset(e): i for i, e in enumerate(edges)}


def directed_chains4() -> list[tuple[int, int, int]]:
    """Directed Hamiltonian paths on 4 vertices as triples of edge slots (24 of them)."""
    idx = edge_index(EDGES4)
    out = []
    for p in itertools.permutations(range(4)):
        out.append(tuple(idx[frozenset((p[i], p[i + 1]))] for i in range(3)))
    return out


def loops4() -> list[tuple[int, int, int, int]]:
    """Undirected 4-cycles through vertices 0..3 as edge-slot quadruples (3 of them)."""
    idx = edge_index(EDGES4)
    seen = set()
    out = []
    for p in itertools.permutations(range(1, 4)):
        cyc = (0,) + p
        slots = tuple(idx[frozenset((cyc[i], cyc[(i + 1) % 4]))] for i in range(4))
        key = frozenset(slots)
        if key not in seen:
            seen.add(key)
            out.append(slots)
    return out


def omega_delta_sq(p: KernelModelParams) -> float:
    """Variance of ``Y``."""
    return 1 + p.delta**2 * p.a2 ** (-p.n / 2) + p.delta**2 * p.a1 ** (-p.n)


# direct evaluation of the closed forms ----------------------------------------

def rho_model(x: float, p: KernelModelParams) -> float:
    g, d, n = p.g, p.delta, p.n
    val = (
        math.exp(-g * x)
        + d**2 * p.a2 ** (-n / 2) * math.exp(-2 * g * p.a1 / p.a2 * x)
        + d**2 * p.a1 ** (-n) * math.exp(-2 * g / p.a1 * x)
    )
    return val / omega_delta_sq(p)


def kappa3_model(x1: float, x2: float, x3: float, p: KernelModelParams) -> float:
    g, d, n = p.g, p.delta, p.n
    gs, gss = g / p.a1, g / p.a2
    x = (x1, x2, x3)
    total = 0.0
    for i, j in itertools.permutations(range(3), 2):
        total += d * p.a1 ** (-n / 2) * math.exp(-g * x[i]) * math.exp(-gs * x[j])
    for i, j, k in itertools.permutations(range(3)):
        total += (
            d**3 * p.a1 ** (-n / 2) * p.a2 ** (-n / 2)
            * math.exp(-g * x[i] - gs * x[j] - gss * x[k])
        )
    total += 2 * d**3 * p.a1 ** (-3 * n / 2) * math.exp(-gs * (x1 + x2 + x3))
    return total / omega_delta_sq(p) ** 1.5


def kappa4_model(x: Sequence[float], p: KernelModelParams) -> float:
    """Closed 4-point form; ``x`` in slot order (12, 13, 14, 23, 24, 34)."""
    if len(x) != 6:
        raise ValueError("kappa4 takes six edge arguments")
    g, d, n = p.g, p.delta, p.n
    gs = g / p.a1
    total = 0.0
    for e1, e2, e3 in directed_chains4():
        total += 2 * d**2 * p.a1 ** (-n) * math.exp(-g * x[e1]) * math.exp(-gs * (x[e2] + x[e3]))
    for loop in loops4():
        total += 16 * d**4 * p.a1 ** (-2 * n) * math.exp(-gs * sum(x[e] for e in loop))
    return total / omega_delta_sq(p) ** 2


# exponential-term representation --------------------------------------------

def model_terms(N: int, p: KernelModelParams) -> Terms:
    """Exponential terms of the closed form of the N-point function."""
    g, d, n = p.g, p.delta, p.n
    gs, gss = g / p.a1, g / p.a2
    w = omega_delta_sq(p)
    if N == 2:
        return [
            (1 / w, (g,)),
            (d**2 * p.a2 ** (-n / 2) / w, (2 * g * p.a1 / p.a2,)),
            (d**2 * p.a1 ** (-n) / w, (2 * gs,)),
        ]
    if N == 3:
        norm = w**1.5
        terms: Terms = []
        for i, j in itertools.permutations(range(3), 2):
            r = [0.0] * 3
            r[i], r[j] = g, gs
            terms.append((d * p.a1 ** (-n / 2) / norm, tuple(r)))
        for i, j, k in itertools.permutations(range(3)):
            r = [0.0] * 3
            r[i], r[j], r[k] = g, gs, gss
            terms.append((d**3 * p.a1 ** (-n / 2) * p.a2 ** (-n / 2) / norm, tuple(r)))
        terms.append((2 * d**3 * p.a1 ** (-3 * n / 2) / norm, (gs, gs, gs)))
        return terms
    if N == 4:
        norm = w**2
        terms = []
        for e1, e2, e3 in directed_chains4():
            r = [0.0] * 6
            r[e1] += g
            r[e2] += gs
            r[e3] += gs
            terms.append((2 * d**2 * p.a1 ** (-n) / norm, tuple(r)))
        for loop in loops4():
            r = [0.0] * 6
            for e in loop:
                r[e] += gs
            terms.append((16 * d**4 * p.a1 ** (-2 * n) / norm, tuple(r)))
        return terms
    raise ValueError(f"closed forms exist for N = 2, 3, 4; got {N}")


def _perfect_matchings(items: list):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for i, other in enumerate(rest):
        for m in _perfect_matchings(rest[:i] + rest[i + 1:]):
            yield [(first, other)] + m


def _connected(N: int, pairs) -> bool:
    parent = list(range(N))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for (a, _), (b, _) in pairs:
        parent[find(a)] = find(b)
    return len({find(a) for a in range(N)}) == 1


def wick_terms(N: int, p: KernelModelParams) -> Terms:
    """Exponential terms of ``cum(Z_1, ..., Z_N)`` from the Gaussian pairing expansion.

    Each vertex contributes ``X`` or ``delta X S``; a term is a connected perfect
    matching of the resulting Gaussian factors with no pair inside one vertex.
    """
    if N < 2:
        raise ValueError("need N >= 2")
    g, n = p.g, p.n
    cov = {
        ("X", "X"): (1.0, g),
        ("X", "S"): (p.a1 ** (-n / 2), g / p.a1),
        ("S", "X"): (p.a1 ** (-n / 2), g / p.a1),
        ("S", "S"): (p.a2 ** (-n / 2), g / p.a2),
    }
    edges = list(itertools.combinations(range(N), 2))
    idx = edge_index(edges)
    norm = omega_delta_sq(p) ** (N / 2)
    acc: dict[tuple[float, ...], float] = {}
    for carriers in itertools.product((False, True), repeat=N):
        nc = sum(carriers)
        if p.delta == 0 and nc:
            continue
        factors = []
        for a, c in enumerate(carriers):
            factors.append((a, "X"))
            if c:
                factors.append((a, "S"))
        if len(factors) % 2:
            continue
        for match in _perfect_matchings(factors):
            if any(a == b for (a, _), (b, _) in match):
                continue
            if not _connected(N, match):
                continue
            coef = p.delta**nc / norm
            rates = [0.0] * len(edges)
            for (a, ta), (b, tb) in match:
                c, r = cov[(ta, tb)]
                coef *= c
                rates[idx[frozenset((a, b))]] += r
            key = tuple(round(r, 12) for r in rates)
            acc[key] = acc.get(key, 0.0) + coef
    return [(c, r) for r, c in acc.items() if c != 0]


def eval_terms(terms: Terms, x: Sequence[float]) -> float:
    x = np.asarray(x, dtype=float)
    return float(sum(c * math.exp(-float(np.dot(r, x))) for c, r in terms))


def derivative_at_origin(terms: Terms, pattern: Sequence[int]) -> float:
    """``prod_e (d/dx_e)^{pattern_e}`` of an exponential sum, at the origin."""
    total = 0.0
    for c, r in terms:
        prod = c
        for re, k in zip(r, pattern):
            if k:
                prod *= (-re) ** k
        total += prod
    return total


def kappa4_wick(x: Sequence[float], p: KernelModelParams) -> float:
    return eval_terms(wick_terms(4, p), x)


def point_terms(N: int, p: KernelModelParams, variant: str = "closed") -> Terms:
    if variant == "closed":
        return model_terms(N, p)
    if variant == "wick":
        return wick_terms(N, p)
    raise ValueError(f"unknown kernel variant {variant!r}; use 'closed' (closed forms) or 'wick' (pairing expansion)")


def hessian_moments(p: KernelModelParams, variant: str = "closed") -> tuple[float, float, float]:
    """``(gamma, alpha, beta)`` with ``gamma = -rho'(0)``, ``alpha = 2 rho''(0)``,
    ``beta = rho''(0) - rho'(0)^2``."""
    t = point_terms(2, p, variant)
    r1 = derivative_at_origin(t, (1,))
    r2 = derivative_at_origin(t, (2,))
    return -r1, 2 * r2, r2 - r1**2


def check_positivity(p: KernelModelParams, variant: str = "closed") -> None:
    """Raise if the limiting Hessian law is improper (``alpha > 0``, ``alpha + n beta > 0``)."""
    _, alpha, beta = hessian_moments(p, variant)
    if not (alpha > 0 and alpha + p.n * beta > 0):
        raise ValueError(
            f"model violates the Hessian positivity window: alpha={alpha:.6g}, "
            f"alpha + n*beta={alpha + p.n * beta:.6g}"
        )


def analytic_cumulants(p: KernelModelParams, variant: str = "closed") -> CumulantSet:
    """Loop-free derivatives at the origin, by term-wise differentiation."""
    t3 = point_terms(3, p, variant)
    t4 = point_terms(4, p, variant)
    gamma = -derivative_at_origin(point_terms(2, p, variant), (1,))
    vals = {k: derivative_at_origin(t3 if len(pat) == 3 else t4, pat) for k, pat in PATTERNS.items()}
    return CumulantSet(gamma=gamma, **vals)


# finite-difference oracle -----------------------------------------------------

def _mixed_central(f: Callable[[np.ndarray], float], dim: int, pattern: Sequence[int], h: float) -> float:
    """Central-difference mixed partial at the origin for 0/1 patterns."""
    active = [i for i, k in enumerate(pattern) if k]
    if any(k > 1 for k in pattern):
        raise ValueError("finite-difference oracle handles first order per slot only")
    if not active:
        return f(np.zeros(dim))
    total = 0.0
    for signs in itertools.product((1, -1), repeat=len(active)):
        x = np.zeros(dim)
        for i, s in zip(active, signs):
            x[i] = s * h
        total += math.prod(signs) * f(x)
    return total / (2 * h) ** len(active)


def fd_derivative(f: Callable[[np.ndarray], float], dim: int, pattern: Sequence[int], h: float,
                  levels: int = 2) -> float:
    """Mixed partial with ``levels`` Richardson steps (error ``O(h^{2 levels + 2})``)."""
    table = [_mixed_central(f, dim, pattern, h / 2**i) for i in range(levels + 1)]
    for j in range(1, levels + 1):
        table = [(4**j * table[i + 1] - table[i]) / (4**j - 1) for i in range(len(table) - 1)]
    return table[0]


def fd_cumulants(p: KernelModelParams, h: float | None = None, variant: str = "closed",
                 levels: int = 2) -> CumulantSet:
    """Finite differences of the point functions at the origin.

    The closed forms are entire in their arguments, so the symmetric stencil may
    evaluate at small negative distances.  Third-order mixed partials lose about
    ``eps / (g h)^3`` to round-off, which is why the default step is a sizeable
    fraction of the correlation length and the truncation error is pushed down
    by Richardson extrapolation instead.
    """
    if h is None:
        h = 0.08 / p.g
    if not 0 < h < 0.1 / p.g:
        raise ValueError(f"step must satisfy 0 < h < 0.1/g = {0.1 / p.g:.3g}, got {h}")
    rho = lambda x: rho_model(x[0], p)
    k3 = lambda x: kappa3_model(x[0], x[1], x[2], p)
    if variant == "closed":
        k4 = lambda x: kappa4_model(x, p)
    elif variant == "wick":
        terms4 = wick_terms(4, p)
        k4 = lambda x: eval_terms(terms4, x)
    else:
        raise ValueError(f"unknown kernel variant {variant!r}")
    gamma = -fd_derivative(rho, 1, (1,), h, levels)
    vals = {}
    for k, pat in PATTERNS.items():
        f, dim = (k3, 3) if len(pat) == 3 else (k4, 6)
        vals[k] = fd_derivative(f, dim, pat, h, levels)
    return CumulantSet(gamma=gamma, **vals)


def site_moments(p: KernelModelParams, variant: str = "closed") -> tuple[float, float]:
    """Third and fourth cumulants of ``Z`` at a single site."""
    return eval_terms(point_terms(3, p, variant), (0, 0, 0)), eval_terms(point_terms(4, p, variant), (0,) * 6)
