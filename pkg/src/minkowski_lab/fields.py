"""Lattice synthesis of smooth Gaussian fields and their quadratic transforms.

A Gaussian field with covariance ``exp(-g r^2 / 2)`` is white noise smoothed by
a Gaussian kernel of variance ``1 / (2g)``.  Convolutions run through the FFT on
a periodically padded grid; the padding is wide enough that wrap-around never
reaches the region that is kept.
"""
from __future__ import annotations

import math
import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .kernel import KernelModelParams, omega_delta_sq

_MAGIC = b"MKLF"
_DUMP_VERSION = 1


@dataclass
class FieldGrid:
    """Field values on a regular lattice.

    ``margin`` counts extra lattice layers on each side of the region of
    interest; they exist only so that later convolutions see genuine field
    values near the edges, and :meth:`cropped` removes them.
    """

    values: np.ndarray
    spacing: tuple[float, ...]
    margin: tuple[int, ...] = field(default=())

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        nd = self.values.ndim
        if not 1 <= nd <= 3:
            raise ValueError(f"fields must be 1- to 3-dimensional, got {nd}")
        if np.isscalar(self.spacing):
            self.spacing = (float(self.spacing),) * nd
        self.spacing = tuple(float(s) for s in self.spacing)
        if len(self.spacing) != nd or any(not s > 0 for s in self.spacing):
            raise ValueError(f"need {nd} positive spacings, got {self.spacing}")
        if not self.margin:
            self.margin = (0,) * nd
        self.margin = tuple(int(m) for m in self.margin)
        if len(self.margin) != nd or any(m < 0 for m in self.margin):
            raise ValueError(f"bad margin {self.margin}")
        if any(s < 2 for s in self.shape):
            raise ValueError(f"every lattice extent must be >= 2, got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

    @property
    def n(self) -> int:
        return self.values.ndim

    @property
    def shape(self) -> tuple[int, ...]:
        """Extents of the region of interest (margin excluded)."""
        return tuple(s - 2 * m for s, m in zip(self.values.shape, self.margin))

    def cropped(self) -> "FieldGrid":
        if not any(self.margin):
            return self
        sl = tuple(slice(m, m + s) for m, s in zip(self.margin, self.shape))
        return FieldGrid(self.values[sl].copy(), self.spacing)

    @property
    def extents(self) -> tuple[float, ...]:
        """Physical side lengths of the region of interest."""
        return tuple((s - 1) * h for s, h in zip(self.shape, self.spacing))


def _as_tuple(x, nd: int, name: str) -> tuple:
    if np.isscalar(x):
        return (x,) * nd
    x = tuple(x)
    if len(x) != nd:
        raise ValueError(f"{name} needs {nd} entries, got {len(x)}")
    return x


def _gaussian_kernel_fft(shape, spacing, var: float, normalize: str) -> np.ndarray:
    """rFFT of a Gaussian of variance ``var`` sampled at wrapped lattice offsets."""
    k = np.ones(shape)
    for ax, (s, h) in enumerate(zip(shape, spacing)):
        off = np.minimum(np.arange(s), s - np.arange(s)) * h
        prof = np.exp(-0.5 * off**2 / var)
        k = k * prof.reshape([-1 if a == ax else 1 for a in range(len(shape))])
    if normalize == "l2":
        k /= math.sqrt(np.sum(k * k))
    elif normalize == "l1":
        k /= np.sum(k)
    return np.fft.rfftn(k, s=shape, axes=tuple(range(len(shape))))


def _convolve(values: np.ndarray, kernel_hat: np.ndarray) -> np.ndarray:
    axes = tuple(range(values.ndim))
    return np.fft.irfftn(np.fft.rfftn(values) * kernel_hat, s=values.shape, axes=axes)


def sample_gaussian_field(shape: Sequence[int] | int, spacing, g: float, seed=None,
                          margin: Sequence[int] | int = 0) -> FieldGrid:
    """Unit-variance Gaussian field with covariance ``exp(-g r^2 / 2)``.

    Parameters
    ----------
    shape : lattice extents of the region of interest (1 to 3 axes).
    spacing : lattice spacing per axis, physical units.
    g : covariance decay rate.
    seed : anything accepted by ``numpy.random.default_rng``.
    margin : extra layers kept on each side (see :class:`FieldGrid`).

    The smoothing kernel has standard deviation ``sigma = 1/sqrt(2g)``.  The
    spacing must resolve it (``spacing <= sigma / 2``); the discrete kernel is
    normalized in l2 so that every site has variance exactly one.
    """
    if not g > 0:
        raise ValueError(f"g must be positive, got {g}")
    shape = tuple(int(s) for s in np.atleast_1d(shape))
    nd = len(shape)
    if not 1 <= nd <= 3:
        raise ValueError("fields must be 1- to 3-dimensional")
    if any(s < 2 for s in shape):
        raise ValueError(f"grid too small: every extent must be >= 2, got {shape}")
    spacing = tuple(float(h) for h in _as_tuple(spacing, nd, "spacing"))
    margin = tuple(int(m) for m in _as_tuple(margin, nd, "margin"))
    sigma = 1 / math.sqrt(2 * g)
    if any(not 0 < h <= sigma / 2 for h in spacing):
        raise ValueError(
            f"spacing {spacing} does not resolve the smoothing scale sigma={sigma:.4g} "
            "(need spacing <= sigma/2)"
        )
    pad = tuple(math.ceil(6 * sigma / h) for h in spacing)
    full = tuple(s + 2 * m + 2 * p for s, m, p in zip(shape, margin, pad))
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(full)
    x = _convolve(noise, _gaussian_kernel_fft(full, spacing, sigma**2, "l2"))
    sl = tuple(slice(p, p + s + 2 * m) for p, s, m in zip(pad, shape, margin))
    return FieldGrid(np.ascontiguousarray(x[sl]), spacing, margin)


def transform_margin(tau: float, spacing) -> tuple[int, ...]:
    """Layers of genuine field needed around the region to smooth with variance ``tau``."""
    spacing = tuple(np.atleast_1d(spacing))
    if tau == 0:
        return (0,) * len(spacing)
    return tuple(math.ceil(6 * math.sqrt(tau) / h) for h in spacing)


def smooth(x: FieldGrid, tau: float) -> np.ndarray:
    """``X * h_tau`` on the full stored grid (zero-padded beyond it)."""
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    if tau == 0:
        return x.values.copy()
    pad = transform_margin(tau, x.spacing)
    padded = np.pad(x.values, [(p, p) for p in pad])
    s = _convolve(padded, _gaussian_kernel_fft(padded.shape, x.spacing, tau, "l1"))
    sl = tuple(slice(p, p + s_) for p, s_ in zip(pad, x.values.shape))
    return s[sl]


def apply_quadratic_transform(x: FieldGrid, delta: float, tau: float,
                              p: KernelModelParams | None = None) -> FieldGrid:
    """Standardized ``Z = (X + delta X S - m) / omega`` with ``S = X * h_tau``.

    ``x`` must carry a margin of at least :func:`transform_margin` layers for
    ``S`` to be correct up to the region's edge; with less, the smoothing sees
    zeros outside the stored grid and a warning is issued.  The returned field
    is cropped to the region of interest.  ``p`` supplies ``g`` and ``n`` for the
    analytic mean and variance; ``delta`` and ``tau`` override its fields.
    """
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    if p is None:
        raise ValueError("model parameters are needed for the analytic standardization")
    p = KernelModelParams(g=p.g, tau=tau, delta=delta, n=x.n)
    if delta == 0:
        return x.cropped()
    need = transform_margin(tau, x.spacing)
    if any(m < r for m, r in zip(x.margin, need)):
        warnings.warn(
            f"field margin {x.margin} is below the {need} layers needed for the smoothing; "
            "edge values are biased",
            stacklevel=2,
        )
    s = smooth(x, tau)
    y = x.values + delta * x.values * s
    mean = delta * (1 + p.g * tau) ** (-p.n / 2)
    z = (y - mean) / math.sqrt(omega_delta_sq(p))
    return FieldGrid(z, x.spacing, x.margin).cropped()


def sample_model_field(shape, spacing, p: KernelModelParams, seed=None) -> FieldGrid:
    """One realization of the standardized model field on the region of interest."""
    shape = tuple(int(s) for s in np.atleast_1d(shape))
    spacing = _as_tuple(spacing, len(shape), "spacing")
    if len(shape) != p.n:
        raise ValueError(f"grid dimension {len(shape)} does not match model dimension {p.n}")
    margin = transform_margin(p.tau, spacing) if p.delta != 0 else 0
    x = sample_gaussian_field(shape, spacing, p.g, seed, margin)
    return apply_quadratic_transform(x, p.delta, p.tau, p)


def empirical_covariance(fields: Sequence[FieldGrid], lags, base=None) -> list[tuple]:
    """Ensemble covariance at lattice lags, with standard errors.

    Values are centred by the ensemble mean at each site.  Each realization
    gives one spatially averaged product (or the product at ``base`` when a
    base site is given); the estimate is their mean rescaled by ``R/(R-1)``
    and the error is the standard error of that mean.

    ``lags`` holds integer offsets: an int is an offset along axis 0, a tuple
    one offset per axis.
    """
    if len(fields) < 2:
        raise ValueError("need at least two fields")
    shp, sp = fields[0].values.shape, fields[0].spacing
    for f in fields[1:]:
        if f.values.shape != shp or f.spacing != sp:
            raise ValueError("fields must share shape and spacing")
    R = len(fields)
    stack = np.stack([f.values for f in fields])
    stack = stack - stack.mean(axis=0)
    nd = len(shp)
    out = []
    for lag in lags:
        off = (int(lag),) + (0,) * (nd - 1) if np.isscalar(lag) else tuple(int(l) for l in lag)
        if len(off) != nd:
            raise ValueError(f"lag {lag} does not match dimension {nd}")
        if any(abs(o) >= s for o, s in zip(off, shp)):
            raise ValueError(f"lag {lag} exceeds the grid")
        a = tuple(slice(max(0, -o), s - max(0, o)) for o, s in zip(off, shp))
        b = tuple(slice(max(0, o), s - max(0, -o)) for o, s in zip(off, shp))
        prod = stack[(slice(None),) + a] * stack[(slice(None),) + b]
        if base is None:
            per = prod.reshape(R, -1).mean(axis=1)
        else:
            idx = tuple(int(i) - sl.start for i, sl in zip(base, a))
            per = prod[(slice(None),) + idx]
        per = per * R / (R - 1)
        se = float(per.std(ddof=1) / math.sqrt(R))
        out.append((lag, float(per.mean()), se))
    return out


def dump_field(path, f: FieldGrid) -> None:
    """Write the region of interest as little-endian float64 with a small header."""
    f = f.cropped()
    header = _MAGIC + struct.pack("<II", _DUMP_VERSION, f.n)
    header += struct.pack(f"<{f.n}q", *f.values.shape)
    header += struct.pack(f"<{f.n}d", *f.spacing)
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())
    except OSError as e:
        raise OSError(f"cannot write field dump {path}: {e}") from e


def load_field(path) -> FieldGrid:
    data = Path(path).read_bytes()
    if data[:4] != _MAGIC:
        raise ValueError(f"{path}: not a field dump")
    version, nd = struct.unpack_from("<II", data, 4)
    if version != _DUMP_VERSION:
        raise ValueError(f"{path}: unsupported dump version {version}")
    pos = 12
    shape = struct.unpack_from(f"<{nd}q", data, pos)
    pos += 8 * nd
    spacing = struct.unpack_from(f"<{nd}d", data, pos)
    pos += 8 * nd
    vals = np.frombuffer(data, dtype="<f8", offset=pos).reshape(shape)
    return FieldGrid(vals.astype(float), spacing)
