"""Exact truncated polynomials in the entries of a symmetric matrix.

A :class:`Jet` is a polynomial in the ``n(n+1)/2`` variables ``theta_ij``
(``i <= j``, lexicographic order) with :class:`fractions.Fraction`
coefficients, truncated above a total degree cap.  The symmetric matrix
``Theta`` has ``Theta[i, j] = Theta[j, i] = theta_ij``.

The differential operator ``D`` has entries ``D_ii = d/dtheta_ii`` and
``D_ij = (1/2) d/dtheta_ij`` for ``i != j``, so that ``D tr(Theta B) = B``.
Determinants of ``s*D + c*I`` are expanded by the Leibniz sum (the entries
commute) and applied to a jet at ``Theta = 0``.  Only monomials of degree
``<= n`` survive that evaluation, which is why a cap of ``n`` is already exact.

The ``verify_*`` functions check the Hermite identities used by the
perturbation expansion.  Both sides are polynomials in ``x`` of degree at most
``n``, so agreement at ``n + 1`` distinct rational points proves them.
"""
from __future__ import annotations

import itertools
import math
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

Number = int | Fraction


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


def num_vars(n: int) -> int:
    return n * (n + 1) // 2


@lru_cache(maxsize=None)
def var_index(n: int) -> dict[tuple[int, int], int]:
    """Map ``(i, j)`` with ``i <= j`` to the variable slot."""
    pairs = [(i, j) for i in range(n) for j in range(i, n)]
    return {p: k for k, p in enumerate(pairs)}


def _slot(n: int, i: int, j: int) -> int:
    if i > j:
        i, j = j, i
    return var_index(n)[(i, j)]


class Jet:
    """Immutable truncated polynomial over ``Theta`` with rational coefficients."""

    __slots__ = ("n", "cap", "terms")

    def __init__(self, n: int, cap: int, terms: dict | None = None):
        if not 1 <= n <= 4:
            raise ValueError(f"matrix dimension must be in 1..4, got {n}")
        if cap < 0:
            raise ValueError("degree cap must be nonnegative")
        self.n = n
        self.cap = cap
        clean = {}
        for exp, c in (terms or {}).items():
            if c != 0 and sum(exp) <= cap:
                clean[tuple(exp)] = _frac(c)
        self.terms = clean

    # constructors -----------------------------------------------------------
    @classmethod
    def constant(cls, n: int, cap: int, value: Number = 1) -> "Jet":
        return cls(n, cap, {(0,) * num_vars(n): value})

    @classmethod
    def variable(cls, n: int, cap: int, i: int, j: int) -> "Jet":
        exp = [0] * num_vars(n)
        exp[_slot(n, i, j)] = 1
        return cls(n, cap, {tuple(exp): 1})

    # arithmetic -------------------------------------------------------------
    def _check(self, other: "Jet") -> None:
        if self.n != other.n or self.cap != other.cap:
            raise ValueError(
                f"jet mismatch: (n={self.n}, cap={self.cap}) vs (n={other.n}, cap={other.cap})"
            )

    def _coerce(self, other) -> "Jet":
        if isinstance(other, Jet):
            self._check(other)
            return other
        return Jet.constant(self.n, self.cap, _frac(other))

    def __add__(self, other) -> "Jet":
        other = self._coerce(other)
        out = dict(self.terms)
        for e, c in other.terms.items():
            out[e] = out.get(e, 0) + c
        return Jet(self.n, self.cap, out)

    __radd__ = __add__

    def __neg__(self) -> "Jet":
        return Jet(self.n, self.cap, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other) -> "Jet":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "Jet":
        return self._coerce(other) - self

    def __mul__(self, other) -> "Jet":
        if not isinstance(other, Jet):
            c = _frac(other)
            return Jet(self.n, self.cap, {e: c * v for e, v in self.terms.items()})
        self._check(other)
        cap = self.cap
        out: dict[tuple, Fraction] = {}
        right = [(e, sum(e), c) for e, c in other.terms.items()]
        for ea, ca in self.terms.items():
            da = sum(ea)
            for eb, db, cb in right:
                if da + db > cap:
                    continue
                e = tuple(a + b for a, b in zip(ea, eb))
                out[e] = out.get(e, 0) + ca * cb
        return Jet(self.n, cap, out)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "Jet":
        if k < 0:
            raise ValueError("negative power")
        out = Jet.constant(self.n, self.cap)
        for _ in range(k):
            out = out * self
        return out

    def __eq__(self, other) -> bool:
        if not isinstance(other, Jet):
            other = Jet.constant(self.n, self.cap, _frac(other)) if isinstance(other, (int, Fraction)) else None
            if other is None:
                return NotImplemented
        return (self.n, self.cap, self.terms) == (other.n, other.cap, other.terms)

    def __hash__(self):
        return hash((self.n, self.cap, frozenset(self.terms.items())))

    def __repr__(self) -> str:
        if not self.terms:
            return f"Jet(n={self.n}, cap={self.cap}, 0)"
        names = [f"t{i + 1}{j + 1}" for (i, j) in var_index(self.n)]
        parts = []
        for e, c in sorted(self.terms.items(), key=lambda t: (sum(t[0]), t[0])):
            mono = "*".join(
                name if p == 1 else f"{name}^{p}" for name, p in zip(names, e) if p
            )
            parts.append(f"{c}" + (f"*{mono}" if mono else ""))
        return f"Jet(n={self.n}, cap={self.cap}, " + " + ".join(parts) + ")"

    @property
    def constant_term(self) -> Fraction:
        return self.terms.get((0,) * num_vars(self.n), Fraction(0))

    def coefficient(self, exp: Sequence[int]) -> Fraction:
        return self.terms.get(tuple(exp), Fraction(0))


def jet_add(a: Jet, b: Jet) -> Jet:
    return a + b


def jet_mul(a: Jet, b: Jet) -> Jet:
    return a * b


def jet_exp(a: Jet) -> Jet:
    """``sum_{m <= cap} a^m / m!``; requires a zero constant term."""
    if a.constant_term != 0:
        raise ValueError("jet_exp needs a jet with zero constant term")
    out = Jet.constant(a.n, a.cap)
    power = Jet.constant(a.n, a.cap)
    for m in range(1, a.cap + 1):
        power = power * a
        if not power.terms:
            break
        out = out + power * Fraction(1, math.factorial(m))
    return out


def theta_matrix(n: int, cap: int) -> list[list[Jet]]:
    return [[Jet.variable(n, cap, i, j) for j in range(n)] for i in range(n)]


def _matmul(a: list[list[Jet]], b: list[list[Jet]]) -> list[list[Jet]]:
    n = len(a)
    zero = Jet(a[0][0].n, a[0][0].cap)
    out = []
    for i in range(n):
        row = []
        for j in range(n):
            acc = zero
            for k in range(n):
                acc = acc + a[i][k] * b[k][j]
            row.append(acc)
        out.append(row)
    return out


def trace_power(n: int, k: int, cap: int) -> Jet:
    """The polynomial ``tr(Theta^k)``."""
    if k < 1:
        raise ValueError("trace power needs k >= 1")
    theta = theta_matrix(n, cap)
    mat = theta
    for _ in range(k - 1):
        mat = _matmul(mat, theta)
    out = Jet(n, cap)
    for i in range(n):
        out = out + mat[i][i]
    return out


def trace_product(n: int, cycles: Iterable[int], cap: int) -> Jet:
    """``prod_i tr(Theta^{c_i})`` (empty product is 1)."""
    out = Jet.constant(n, cap)
    for c in cycles:
        out = out * trace_power(n, c, cap)
    return out


def loop_polynomial(n: int, K: int, cap: int) -> Jet:
    """``tr(Theta)^K - (-2)^(K-1) tr(Theta^K)``."""
    if K < 2:
        raise ValueError(f"loop length must be >= 2, got {K}")
    return trace_power(n, 1, cap) ** K - trace_power(n, K, cap) * ((-2) ** (K - 1))


# determinant operators -------------------------------------------------------

@lru_cache(maxsize=None)
def _det_operator(n: int, sign: int) -> dict[tuple[int, tuple[int, ...]], Fraction]:
    """Expand ``det(sign*D + c*I)`` as ``{(power of c, derivative multi-index): coeff}``."""
    nv = num_vars(n)
    ops: dict[tuple[int, tuple[int, ...]], Fraction] = {}
    for perm in itertools.permutations(range(n)):
        # parity via inversion count
        inv = sum(1 for a in range(n) for b in range(a + 1, n) if perm[a] > perm[b])
        sgn = -1 if inv % 2 else 1
        # each factor is a list of (c-power, slot or None, weight)
        factors = []
        for i in range(n):
            j = perm[i]
            w = Fraction(sign) if i == j else Fraction(sign, 2)
            choice = [(0, _slot(n, i, j), w)]
            if i == j:
                choice.append((1, None, Fraction(1)))
            factors.append(choice)
        for combo in itertools.product(*factors):
            cpow = 0
            exp = [0] * nv
            coef = Fraction(sgn)
            for p, slot, w in combo:
                cpow += p
                coef *= w
                if slot is not None:
                    exp[slot] += 1
            key = (cpow, tuple(exp))
            ops[key] = ops.get(key, 0) + coef
    return {k: v for k, v in ops.items() if v != 0}


def _apply_det(jet: Jet, diag: Number, sign: int) -> Fraction:
    """``det(sign*D + diag*I) jet |_{Theta=0}``, exactly."""
    if jet.cap < jet.n:
        raise ValueError(f"degree cap {jet.cap} is below matrix dimension {jet.n}")
    diag = _frac(diag)
    total = Fraction(0)
    for (cpow, exp), coef in _det_operator(jet.n, sign).items():
        c = jet.terms.get(exp)
        if c is None:
            continue
        mult = 1
        for p in exp:
            mult *= math.factorial(p)
        total += coef * diag**cpow * mult * c
    return total


def det_diffop_apply(x: Number, gamma: Number, jet: Jet) -> Fraction:
    """``det(-D + gamma*x*I) jet |_{Theta=0}``."""
    return _apply_det(jet, _frac(gamma) * _frac(x), -1)


def det_plus_apply(x: Number, jet: Jet) -> Fraction:
    """``det(x*I + D) jet |_{Theta=0}`` (the orientation of the Hermite determinant identities)."""
    return _apply_det(jet, _frac(x), +1)


# exact Hermite values and falling factorials ----------------------------------

def hermite_exact(k: int, x: Number) -> Fraction:
    if k < 0:
        raise ValueError("exact Hermite needs k >= 0")
    x = _frac(x)
    prev, cur = Fraction(1), x
    if k == 0:
        return prev
    for j in range(1, k):
        prev, cur = cur, x * cur - j * prev
    return cur


def falling(n: int, m: int) -> int:
    out = 1
    for i in range(m):
        out *= n - i
    return out


def _hermite_rhs(n: int, m: int) -> "callable":
    ff = falling(n, m)
    if ff == 0:
        return lambda x: Fraction(0)
    return lambda x: ff * hermite_exact(n - m, x)


def sample_points(n: int, extra: int = 1) -> list[Fraction]:
    """``n + 1 + extra`` distinct rational abscissae."""
    return [Fraction(2 * i - n, 3) + Fraction(1, 7) for i in range(n + 1 + extra)]


def _default_cap(n: int, degree_cap: int | None) -> int:
    return n if degree_cap is None else degree_cap


def hermite_det_lhs(n: int, cycles: Sequence[int], x: Number, degree_cap: int | None = None) -> Fraction:
    cap = _default_cap(n, degree_cap)
    kernel = jet_exp(trace_power(n, 2, cap))
    return det_plus_apply(x, kernel * trace_product(n, cycles, cap))


def hermite_det_rhs(n: int, cycles: Sequence[int], x: Number) -> Fraction:
    """``(-1/2)^(m - l) (n)_m H_{n-m}(x)``."""
    m, ell = sum(cycles), len(cycles)
    return Fraction(-1, 2) ** (m - ell) * _hermite_rhs(n, m)(_frac(x))


def verify_lemma_a1(n: int, cycles: Sequence[int] = (), degree_cap: int | None = None,
                    points: Sequence[Number] | None = None) -> bool:
    """``det(xI + D)(e^{tr Theta^2} prod tr Theta^{c_i})|_0 == (-1/2)^{m-l}(n)_m H_{n-m}(x)``."""
    cap = _default_cap(n, degree_cap)
    body = jet_exp(trace_power(n, 2, cap)) * trace_product(n, cycles, cap)
    xs = sample_points(n) if points is None else points
    return all(det_plus_apply(x, body) == hermite_det_rhs(n, cycles, x) for x in xs)


def deformed_kernel(n: int, beta: Number, cap: int) -> Jet:
    beta = _frac(beta)
    arg = trace_power(n, 2, cap) * (1 + beta) + trace_power(n, 1, cap) ** 2 * (beta / 2)
    return jet_exp(arg)


def verify_lemma_a2(n: int, beta: Number, cycles: Sequence[int] = (),
                    degree_cap: int | None = None,
                    points: Sequence[Number] | None = None) -> bool:
    """The Hermite determinant identity with the beta-deformed kernel ``e^{(1+b) tr Theta^2 + (b/2) tr(Theta)^2}``."""
    cap = _default_cap(n, degree_cap)
    body = deformed_kernel(n, beta, cap) * trace_product(n, cycles, cap)
    xs = sample_points(n) if points is None else points
    return all(det_plus_apply(x, body) == hermite_det_rhs(n, cycles, x) for x in xs)


def hessian_kernel(n: int, gamma: Number, beta: Number, cap: int) -> Jet:
    """``e^{(alpha/2) tr Theta^2 + (beta_R/2) tr(Theta)^2}`` with ``alpha = 2 gamma^2 (1 + beta)``
    and ``beta_R = beta gamma^2``.

    ``beta`` is the dimensionless shape parameter, so ``gamma^2 = alpha/2 - beta_R``.
    Rejects parameters for which the Hessian law is improper.
    """
    gamma, beta = _frac(gamma), _frac(beta)
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    alpha = 2 * gamma**2 * (1 + beta)
    beta_r = beta * gamma**2
    if not (alpha > 0 and alpha + n * beta_r > 0):
        raise ValueError(
            f"improper Hessian law: alpha={alpha}, alpha + n*beta={alpha + n * beta_r} must be > 0"
        )
    arg = trace_power(n, 2, cap) * (alpha / 2) + trace_power(n, 1, cap) ** 2 * (beta_r / 2)
    return jet_exp(arg)


def hessian_det_rhs(n: int, gamma: Number, cycles: Sequence[int], x: Number) -> Fraction:
    """``(-1)^m gamma^{n-m} (-1/2)^{m-k} (n)_m H_{n-m}(x)``."""
    gamma = _frac(gamma)
    m, k = sum(cycles), len(cycles)
    ff = falling(n, m)
    if ff == 0:
        return Fraction(0)
    return (-1) ** m * gamma ** (n - m) * Fraction(-1, 2) ** (m - k) * ff * hermite_exact(n - m, x)


def verify_prop31(n: int, gamma: Number, beta: Number, cycles: Sequence[int] = (),
                  degree_cap: int | None = None,
                  points: Sequence[Number] | None = None) -> bool:
    """``det(-D + gamma x I)`` of the Hessian-law kernel times trace powers equals a scaled Hermite value."""
    cap = _default_cap(n, degree_cap)
    body = hessian_kernel(n, gamma, beta, cap) * trace_product(n, cycles, cap)
    xs = sample_points(n) if points is None else points
    return all(det_diffop_apply(x, gamma, body) == hessian_det_rhs(n, gamma, cycles, x) for x in xs)


def verify_loop_annihilation(n: int, gamma: Number, beta: Number, K: int,
                             cycles: Sequence[int] = (), degree_cap: int | None = None,
                             points: Sequence[Number] | None = None) -> bool:
    """The loop factor ``Pi_K`` kills the determinant functional for every ``x``."""
    if K < 2:
        raise ValueError(f"loop length must be >= 2, got {K}")
    cap = _default_cap(n, degree_cap)
    body = hessian_kernel(n, gamma, beta, cap) * trace_product(n, cycles, cap) * loop_polynomial(n, K, cap)
    xs = sample_points(n) if points is None else points
    return all(det_diffop_apply(x, gamma, body) == 0 for x in xs)


def cycle_multisets(max_m: int) -> list[tuple[int, ...]]:
    """All integer partitions with total ``<= max_m``, parts in nonincreasing order."""
    out: list[tuple[int, ...]] = []

    def rec(remaining: int, largest: int, prefix: tuple[int, ...]):
        out.append(prefix)
        for part in range(min(remaining, largest), 0, -1):
            rec(remaining - part, part, prefix + (part,))

    rec(max_m, max_m, ())
    return sorted(out, key=lambda c: (sum(c), len(c), tuple(-p for p in c)))


# Monte Carlo face of the identity ---------------------------------------------

def sample_scaled_goe(n: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """``size`` draws of ``sqrt(2) * GOE(n)``: diagonal N(0, 2), off-diagonal N(0, 1)."""
    a = rng.standard_normal((size, n, n))
    iu = np.triu_indices(n, 1)
    upper = a[:, iu[0], iu[1]]
    out = np.zeros((size, n, n))
    out[:, iu[0], iu[1]] = upper
    out[:, iu[1], iu[0]] = upper
    idx = np.arange(n)
    out[:, idx, idx] = math.sqrt(2.0) * a[:, idx, idx]
    return out


def goe_hermite_mc(n: int, x: float, samples: int = 100_000, seed: int = 0) -> tuple[float, float]:
    """Monte Carlo mean and standard error of ``E[det(x I + sqrt(2) GOE(n))]``."""
    if samples < 100:
        raise ValueError("need at least 100 samples")
    rng = np.random.default_rng(seed)
    mats = sample_scaled_goe(n, samples, rng)
    mats += x * np.eye(n)
    dets = np.linalg.det(mats)
    return float(dets.mean()), float(dets.std(ddof=1) / math.sqrt(samples))
