"""Experiment configuration: INI parsing, validation and serialization."""
from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .geometry import LKVector, lk_rectangle
from .kernel import KernelModelParams, analytic_cumulants, check_positivity
from .theory import LEVELS, CumulantSet


class ConfigError(ValueError):
    """A configuration value failed validation; the message names the key."""


@dataclass
class ExperimentConfig:
    # [model]
    g: float = 50.0
    tau: float = 0.1
    delta: float = 0.5
    n: int = 2
    kernel: str = "wick"
    # [cumulants]: when set, used instead of the model
    cumulants: CumulantSet | None = None
    # [grid]
    shape: tuple[int, ...] = (128, 128)
    extents: tuple[float, ...] = (1.0, 1.0)
    # [ensemble]
    count: int = 200
    base_seed: int = 2024
    # [thresholds]
    v_min: float = -3.0
    v_max: float = 3.0
    v_step: float = 0.5
    # [theory]
    level: str = "skewness+kurtosis"
    # [output]
    out_dir: str = "out"
    dump_fields: int = 0

    def __post_init__(self):
        self.validate()

    # -- derived -----------------------------------------------------------
    @property
    def model(self) -> KernelModelParams:
        return KernelModelParams(g=self.g, tau=self.tau, delta=self.delta, n=self.n)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(e / (s - 1) for e, s in zip(self.extents, self.shape))

    @property
    def lk(self) -> LKVector:
        return lk_rectangle(self.extents)

    def v_grid(self) -> np.ndarray:
        count = int(math.floor((self.v_max - self.v_min) / self.v_step + 1e-9)) + 1
        return np.round(self.v_min + self.v_step * np.arange(count), 12)

    def theory_cumulants(self) -> CumulantSet:
        if self.cumulants is not None:
            return self.cumulants
        return analytic_cumulants(self.model, self.kernel)

    # -- validation --------------------------------------------------------
    def validate(self) -> None:
        def need(cond, key, msg):
            if not cond:
                raise ConfigError(f"{key}: {msg}")

        need(self.g > 0, "model.g", f"must be positive, got {self.g}")
        need(self.tau >= 0, "model.tau", f"must be >= 0, got {self.tau}")
        need(math.isfinite(self.delta), "model.delta", "must be finite")
        need(self.n in (1, 2, 3), "model.n", f"must be 1, 2 or 3, got {self.n}")
        need(self.kernel in ("closed", "wick"), "model.kernel", f"must be 'closed' or 'wick', got {self.kernel!r}")
        need(len(self.shape) == self.n, "grid.shape", f"needs {self.n} entries, got {len(self.shape)}")
        need(all(s >= 2 for s in self.shape), "grid.shape", "every extent must be >= 2")
        need(len(self.extents) == self.n, "grid.extents", f"needs {self.n} entries")
        need(all(e > 0 for e in self.extents), "grid.extents", "must be positive")
        sigma = 1 / math.sqrt(2 * self.g)
        need(all(h <= sigma / 2 for h in self.spacing), "grid.shape",
             f"spacing {max(self.spacing):.4g} does not resolve the correlation scale; need <= {sigma / 2:.4g}")
        need(self.count >= 1, "ensemble.count", f"must be >= 1, got {self.count}")
        need(self.base_seed >= 0, "ensemble.base_seed", "must be >= 0")
        need(self.v_min < self.v_max, "thresholds", f"v_min ({self.v_min}) must be < v_max ({self.v_max})")
        need(self.v_step > 0, "thresholds.step", "must be positive")
        need(self.level in LEVELS, "theory.level", f"must be one of {LEVELS}, got {self.level!r}")
        need(self.dump_fields >= 0, "output.dump_fields", "must be >= 0")
        if self.cumulants is None:
            try:
                check_positivity(self.model, self.kernel)
            except ValueError as e:
                raise ConfigError(f"model: {e}") from None

    # -- INI round trip ----------------------------------------------------
    @classmethod
    def from_ini(cls, text: str) -> "ExperimentConfig":
        cp = configparser.ConfigParser()
        cp.optionxform = str  # cumulant names are case-sensitive (k0 vs K0)
        try:
            cp.read_string(text)
        except configparser.Error as e:
            raise ConfigError(f"config: {e}") from None
        known = {"model", "cumulants", "grid", "ensemble", "thresholds", "theory", "output"}
        for sec in cp.sections():
            if sec not in known:
                raise ConfigError(f"{sec}: unknown section")
        kw: dict = {}

        def get(sec, key, conv, dest=None):
            if cp.has_option(sec, key):
                raw = cp.get(sec, key)
                try:
                    kw[dest or key] = conv(raw)
                except ValueError:
                    raise ConfigError(f"{sec}.{key}: cannot parse {raw!r}") from None

        ints = lambda s: tuple(int(t) for t in s.replace(",", " ").split())
        floats = lambda s: tuple(float(t) for t in s.replace(",", " ").split())
        get("model", "g", float)
        get("model", "tau", float)
        get("model", "delta", float)
        get("model", "n", int)
        get("model", "kernel", str.strip)
        if cp.has_section("cumulants"):
            vals = {}
            for key, raw in cp.items("cumulants"):
                if key not in {f.name for f in fields(CumulantSet)}:
                    raise ConfigError(f"cumulants.{key}: unknown field")
                try:
                    vals[key] = float(raw)
                except ValueError:
                    raise ConfigError(f"cumulants.{key}: cannot parse {raw!r}") from None
            if "gamma" not in vals:
                raise ConfigError("cumulants.gamma: required when [cumulants] is given")
            try:
                kw["cumulants"] = CumulantSet(**vals)
            except ValueError as e:
                raise ConfigError(f"cumulants: {e}") from None
        get("grid", "shape", ints)
        get("grid", "extents", floats)
        get("ensemble", "count", int)
        get("ensemble", "base_seed", int)
        get("thresholds", "v_min", float)
        get("thresholds", "v_max", float)
        get("thresholds", "step", float, "v_step")
        get("theory", "level", str.strip)
        get("output", "dir", str.strip, "out_dir")
        get("output", "dump_fields", int)
        n = kw.get("n", 2)
        kw.setdefault("shape", (128,) * n)
        kw.setdefault("extents", (1.0,) * n)
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as e:
            raise ConfigError(f"config: cannot read {path}: {e}") from None
        return cls.from_ini(text)

    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        cp.optionxform = str  # cumulant names are case-sensitive (k0 vs K0)
        cp["model"] = {"g": repr(self.g), "tau": repr(self.tau), "delta": repr(self.delta),
                       "n": str(self.n), "kernel": self.kernel}
        if self.cumulants is not None:
            cp["cumulants"] = {k: repr(v) for k, v in self.cumulants.as_dict().items()}
        cp["grid"] = {"shape": ", ".join(map(str, self.shape)),
                      "extents": ", ".join(repr(e) for e in self.extents)}
        cp["ensemble"] = {"count": str(self.count), "base_seed": str(self.base_seed)}
        cp["thresholds"] = {"v_min": repr(self.v_min), "v_max": repr(self.v_max), "step": repr(self.v_step)}
        cp["theory"] = {"level": self.level}
        cp["output"] = {"dir": self.out_dir, "dump_fields": str(self.dump_fields)}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})
