"""Euler characteristic curves and 2-D Minkowski functionals of lattice excursion sets.

The lattice is split into simplices by the Freudenthal (Kuhn) rule: in each
unit cell, one simplex per coordinate ordering, running from the cell's lowest
corner to its highest.  Every simplex then has the form

    v0, v0 + e(S1), ..., v0 + e(Sk),   S1 < S2 < ... < Sk  (strictly nested)

with ``e(S)`` the 0/1 vector of the axis set ``S``.  In 2-D every square is cut
along the diagonal from ``(0, 0)`` to ``(1, 1)``.

The excursion complex at level ``v`` is the full subcomplex spanned by the
vertices with value ``>= v``, so a simplex enters the sweep when its lowest
vertex does.  Vertices are ordered by value, ties by flat index; equal values
are always reported together.

Three interchangeable kernels produce the same curve:

* ``"incremental"`` (compiled) walks the vertices in order and counts the
  incident simplices whose other vertices are already active;
* ``"compiled"`` assigns each simplex to its last vertex in one fused pass and
  takes a cumulative sum (torus mode uses the incremental kernel);
* ``"python"`` is the same birth-time computation vectorized with NumPy.

``BACKEND`` names the default chosen at import: ``"compiled"`` when the
extension module loads, else ``"python"``.  Setting ``MINKOWSKI_LAB_PURE=1``
forces the NumPy path.
"""
from __future__ import annotations

import functools
import itertools
import math
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .fields import FieldGrid

try:
    if os.environ.get("MINKOWSKI_LAB_PURE"):
        raise ImportError("pure mode requested")
    from ._sweep import birth_chi as _compiled_birth
    from ._sweep import sweep_chi as _compiled_sweep
    BACKEND = "compiled"
except ImportError:
    _compiled_sweep = _compiled_birth = None
    BACKEND = "python"

#: accepted ``backend`` names
BACKENDS = ("compiled", "incremental", "python")


@dataclass(frozen=True)
class ECCurve:
    """Piecewise-constant Euler characteristic of ``{X >= v}``.

    ``chi[i]`` holds for ``v`` in ``(thresholds[i+1], thresholds[i]]``; above the
    first threshold the excursion is empty.
    """

    thresholds: np.ndarray
    chi: np.ndarray

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        # number of thresholds >= v
        cnt = self.thresholds.size - np.searchsorted(self.thresholds[::-1], v, side="left")
        padded = np.concatenate(([0], self.chi))
        out = padded[cnt]
        return int(out) if out.ndim == 0 else out

    @property
    def chi_below_min(self) -> int:
        return int(self.chi[-1])


# ---------------------------------------------------------------------------
# simplex templates

@functools.lru_cache(maxsize=None)
def kuhn_chains(n: int) -> tuple[tuple[tuple[int, ...], ...], ...]:
    """All strictly nested chains ``S1 < ... < Sk`` of nonempty axis sets, ``k = 0..n``.

    Each chain is returned as the list of 0/1 increment vectors ``e(S1), ..., e(Sk)``.
    """
    out = [()]
    sets = [frozenset(c) for r in range(1, n + 1) for c in itertools.combinations(range(n), r)]

    def extend(chain):
        last = chain[-1] if chain else frozenset()
        for s in sets:
            if last < s:
                new = chain + (s,)
                out.append(tuple(tuple(int(a in t) for a in range(n)) for t in new))
                extend(new)

    extend(())
    return tuple(out)


@functools.lru_cache(maxsize=None)
def incident_template(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Simplices incident to a vertex, as (dimension, offsets of the other vertices)."""
    dims, offs = [], []
    for chain in kuhn_chains(n):
        verts = [(0,) * n] + list(chain)
        k = len(chain)
        for j in range(k + 1):
            me = np.array(verts[j])
            others = [np.array(verts[i]) - me for i in range(k + 1) if i != j]
            block = np.zeros((n, n), dtype=np.int64)
            for r, o in enumerate(others):
                block[r] = o
            dims.append(k)
            offs.append(block)
    return np.array(dims, dtype=np.int64), np.ascontiguousarray(np.array(offs, dtype=np.int64))


def _check_field(values: np.ndarray, periodic: bool) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("empty field")
    if not 1 <= values.ndim <= 3:
        raise ValueError(f"fields must be 1- to 3-dimensional, got {values.ndim}")
    if periodic and min(values.shape) < 3:
        raise ValueError("periodic mode needs every extent >= 3")
    return values


def _activation_order(flat: np.ndarray) -> np.ndarray:
    # descending value, ties by ascending flat index
    return np.argsort(-flat, kind="stable").astype(np.int64)


def _sweep_python(values: np.ndarray, order: np.ndarray, periodic: bool) -> np.ndarray:
    n = values.ndim
    shape = values.shape
    rank = np.empty(values.size, dtype=np.int64)
    rank[order] = np.arange(values.size)
    rank = rank.reshape(shape)
    contrib = np.zeros(values.size, dtype=np.int64)
    for chain in kuhn_chains(n):
        k = len(chain)
        sign = -1 if k % 2 else 1
        if periodic:
            last = rank
            for inc in chain:
                last = np.maximum(last, np.roll(rank, [-i for i in inc], axis=tuple(range(n))))
        else:
            top = chain[-1] if chain else (0,) * n
            base = tuple(slice(0, s - t) for s, t in zip(shape, top))
            last = rank[base]
            for inc in chain:
                sl = tuple(slice(i, s - t + i) for i, s, t in zip(inc, shape, top))
                last = np.maximum(last, rank[sl])
        contrib += sign * np.bincount(last.ravel(), minlength=values.size)
    return np.cumsum(contrib)


@functools.lru_cache(maxsize=None)
def _chain_tree(n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Chains in parent-first order as (parent index, new corner bit mask, sign)."""
    chains = kuhn_chains(n)
    where = {c: q for q, c in enumerate(chains)}
    parent = np.zeros(len(chains), dtype=np.int64)
    mask = np.zeros(len(chains), dtype=np.int64)
    sign = np.zeros(len(chains), dtype=np.int64)
    for q, c in enumerate(chains):
        sign[q] = -1 if len(c) % 2 else 1
        if c:
            parent[q] = where[c[:-1]]
            mask[q] = sum(1 << a for a, bit in enumerate(c[-1]) if bit)
    # kuhn_chains lists every chain after its prefix
    assert np.all(parent[1:] < np.arange(1, len(chains)))
    return parent, mask, sign


def _chi_sequence(values: np.ndarray, order: np.ndarray, periodic: bool, backend: str) -> np.ndarray:
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}; expected one of {BACKENDS}")
    if backend == "python":
        return _sweep_python(values, order, periodic)
    if _compiled_sweep is None:
        raise RuntimeError("compiled sweep kernels are not available")
    shape = np.array(values.shape, dtype=np.int64)
    if backend == "compiled" and not periodic:
        rank = np.empty(values.size, dtype=np.int64)
        rank[order] = np.arange(values.size)
        return np.asarray(_compiled_birth(rank, shape, *_chain_tree(values.ndim)))
    dims, offs = incident_template(values.ndim)
    return np.asarray(_compiled_sweep(order, shape, periodic, dims, offs))


def ec_curve_sweep(field: FieldGrid | np.ndarray, periodic: bool = False,
                   diagonal: str = "main", backend: str | None = None) -> ECCurve:
    """Euler characteristic of the excursion complex at every critical level.

    Parameters
    ----------
    field : FieldGrid or array of values.
    periodic : glue opposite faces (torus); every extent must be >= 3.
    diagonal : ``"main"`` cuts 2-D cells along (0,0)-(1,1); ``"anti"`` mirrors
        axis 0 first, which cuts along (0,1)-(1,0).
    backend : one of :data:`BACKENDS`; defaults to :data:`BACKEND`.
    """
    values = field.cropped().values if isinstance(field, FieldGrid) else field
    values = _check_field(values, periodic)
    if diagonal == "anti":
        values = values[::-1]
    elif diagonal != "main":
        raise ValueError(f"diagonal must be 'main' or 'anti', got {diagonal!r}")
    values = np.ascontiguousarray(values)
    flat = values.ravel()
    order = _activation_order(flat)
    seq = _chi_sequence(values, order, periodic, backend or BACKEND)
    sorted_vals = flat[order]
    # last position of each tie batch
    ends = np.flatnonzero(np.append(sorted_vals[1:] != sorted_vals[:-1], True))
    return ECCurve(sorted_vals[ends].copy(), seq[ends].astype(np.int64))


# ---------------------------------------------------------------------------
# brute-force oracle

@functools.lru_cache(maxsize=64)
def _all_simplices(shape: tuple[int, ...], periodic: bool) -> tuple[np.ndarray, ...]:
    """Every simplex of the lattice complex, grouped by dimension, as vertex index arrays.

    Built independently of the chain template: the n! top simplices of each
    cell are generated from coordinate permutations and all their faces are
    collected as vertex sets.
    """
    n = len(shape)
    faces: set[frozenset] = set()
    cell_ranges = [range(s) if periodic else range(s - 1) for s in shape]
    for base in itertools.product(*cell_ranges):
        for perm in itertools.permutations(range(n)):
            pts = [list(base)]
            for ax in perm:
                nxt = list(pts[-1])
                nxt[ax] += 1
                pts.append(nxt)
            ids = []
            for p in pts:
                q = [c % s for c, s in zip(p, shape)]
                ids.append(int(np.ravel_multi_index(q, shape)))
            for r in range(1, n + 2):
                for sub in itertools.combinations(ids, r):
                    faces.add(frozenset(sub))
    by_dim: list[list] = [[] for _ in range(n + 1)]
    for f in faces:
        by_dim[len(f) - 1].append(sorted(f))
    return tuple(np.array(b, dtype=np.int64).reshape(len(b), k + 1) for k, b in enumerate(by_dim))


def ec_bruteforce(field: FieldGrid | np.ndarray, v: float, periodic: bool = False,
                  diagonal: str = "main") -> int:
    """Alternating count of simplices whose vertices all have value ``>= v``."""
    values = field.cropped().values if isinstance(field, FieldGrid) else field
    values = _check_field(values, periodic)
    if diagonal == "anti":
        values = values[::-1]
    flat = np.ascontiguousarray(values).ravel()
    total = 0
    for k, simp in enumerate(_all_simplices(values.shape, periodic)):
        if simp.size == 0:
            continue
        inside = np.all(flat[simp] >= v, axis=1)
        total += (-1) ** k * int(np.count_nonzero(inside))
    return total


def lattice_simplex_counts(shape: Sequence[int], periodic: bool = False) -> list[int]:
    return [len(s) for s in _all_simplices(tuple(int(s) for s in shape), periodic)]


# ---------------------------------------------------------------------------
# 2-D area and boundary length

def _tri_parts(P, Q, R, a, b, c, v):
    """Area above ``v`` and iso-segment length of linear interpolants on triangles.

    ``P, Q, R`` are (m, 2) vertex positions and ``a, b, c`` the (m,) values.
    """
    full = 0.5 * np.abs((Q[:, 0] - P[:, 0]) * (R[:, 1] - P[:, 1])
                        - (Q[:, 1] - P[:, 1]) * (R[:, 0] - P[:, 0]))
    up = np.stack([a >= v, b >= v, c >= v], axis=1)
    cnt = up.sum(axis=1)
    area = np.where(cnt == 3, full, 0.0)
    length = np.zeros_like(full)
    pos = np.stack([P, Q, R], axis=1)
    val = np.stack([a, b, c], axis=1)
    for odd_up in (True, False):
        # triangles with exactly one vertex on the odd side
        mask = cnt == (1 if odd_up else 2)
        if not np.any(mask):
            continue
        u = up[mask] if odd_up else ~up[mask]
        iso = np.argmax(u, axis=1)
        rows = np.arange(iso.size)
        o1, o2 = (iso + 1) % 3, (iso + 2) % 3
        p0, p1, p2 = pos[mask][rows, iso], pos[mask][rows, o1], pos[mask][rows, o2]
        f0, f1, f2 = val[mask][rows, iso], val[mask][rows, o1], val[mask][rows, o2]
        t1 = (f0 - v) / (f0 - f1)
        t2 = (f0 - v) / (f0 - f2)
        q1 = p0 + t1[:, None] * (p1 - p0)
        q2 = p0 + t2[:, None] * (p2 - p0)
        corner = full[mask] * t1 * t2
        area[mask] = corner if odd_up else full[mask] - corner
        length[mask] = np.hypot(*(q1 - q2).T)
    return area, length


def _triangles(field: FieldGrid):
    x = field.values
    hx, hy = field.spacing
    s0, s1 = x.shape
    i, j = np.meshgrid(np.arange(s0 - 1), np.arange(s1 - 1), indexing="ij")
    i, j = i.ravel(), j.ravel()
    p00 = np.stack([i * hx, j * hy], axis=1).astype(float)
    p10 = p00 + [hx, 0.0]
    p01 = p00 + [0.0, hy]
    p11 = p00 + [hx, hy]
    f00, f10, f01, f11 = x[i, j], x[i + 1, j], x[i, j + 1], x[i + 1, j + 1]
    # the two halves of each cell, split along (0,0)-(1,1)
    return (p00, p10, p11, f00, f10, f11), (p00, p01, p11, f00, f01, f11)


def _check_2d(field) -> FieldGrid:
    if not isinstance(field, FieldGrid):
        raise TypeError("2-D Minkowski functionals need a FieldGrid")
    field = field.cropped()
    if field.n != 2:
        raise ValueError(f"2-D Minkowski functionals need a 2-D field, got {field.n}-D")
    return field


def mf2d_curves(field: FieldGrid, v_grid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Area, half boundary length and Euler characteristic at each level of ``v_grid``."""
    field = _check_2d(field)
    v = np.atleast_1d(np.asarray(v_grid, dtype=float))
    lower, upper = _triangles(field)
    area = np.empty(v.size)
    half = np.empty(v.size)
    for i, vi in enumerate(v):
        a1, l1 = _tri_parts(*lower, vi)
        a2, l2 = _tri_parts(*upper, vi)
        area[i] = a1.sum() + a2.sum()
        half[i] = 0.5 * (l1.sum() + l2.sum())
    chi = np.atleast_1d(ec_curve_sweep(field)(v))
    return area, half, chi


def mf2d_estimate(field: FieldGrid, v: float) -> tuple[float, float, int]:
    """``(area, half_boundary, chi)`` of the excursion set at ``v`` on a 2-D grid.

    Area and boundary come from linear interpolation over each triangle;
    ``half_boundary`` is half the length of the interior level curve (the
    domain's own boundary is not counted).  ``chi`` counts the excursion complex.
    """
    area, half, chi = mf2d_curves(field, [v])
    return float(area[0]), float(half[0]), int(chi[0])


# ---------------------------------------------------------------------------
# ensemble aggregation

def mean_curves(samples, v_grid) -> np.ndarray:
    """Per-threshold mean and standard error over an ensemble.

    ``samples`` is a sequence of :class:`ECCurve` (resampled as step functions
    on ``v_grid``) or a 2-D array with one row per realization already on the
    grid.  Returns an array with columns ``(v, mean, stderr)``.
    """
    v = np.atleast_1d(np.asarray(v_grid, dtype=float))
    if len(samples) == 0:
        raise ValueError("empty ensemble")
    if isinstance(samples[0], ECCurve):
        rows = np.array([c(v) for c in samples], dtype=float).reshape(len(samples), v.size)
    else:
        rows = np.asarray(samples, dtype=float).reshape(len(samples), -1)
        if rows.shape[1] != v.size:
            raise ValueError("sample rows do not match the threshold grid")
    if rows.shape[0] < 2:
        raise ValueError("need at least two realizations for a standard error")
    mean = rows.mean(axis=0)
    se = rows.std(axis=0, ddof=1) / math.sqrt(rows.shape[0])
    return np.column_stack([v, mean, se])
