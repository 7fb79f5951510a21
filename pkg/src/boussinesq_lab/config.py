"""Experiment configuration: dataclasses loaded from TOML or JSON."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

try:  # Python >= 3.11
    import tomllib as _toml
except ModuleNotFoundError:  # pragma: no cover - exercised on 3.10
    import tomli as _toml

__all__ = ["RandomFieldSpec", "KernelSettings", "ExperimentConfig", "KINDS", "load_config"]

KINDS = ("converge", "kernel", "strichartz", "selfcheck", "simulate")


@dataclass(frozen=True)
class RandomFieldSpec:
    """Seeded band-limited divergence-free data.

    ``localized`` aligns all Fourier phases at the origin (coefficient moduli
    are kept random), producing a field concentrated near ``x = 0``.
    ``exclude_flat`` drops the ``xi_h = 0`` modes.
    """

    seed: int = 0
    k_min: float = 1.0
    k_max: float = 8.0
    amplitude: float = 1.0
    components: tuple = (0, 1, 2, 3)
    localized: bool = True
    exclude_flat: bool = True

    def __post_init__(self):
        if not 0 <= self.k_min <= self.k_max:
            raise ValueError("need 0 <= k_min <= k_max")
        comps = tuple(sorted(int(c) for c in self.components))
        if not comps or any(c not in (0, 1, 2, 3) for c in comps):
            raise ValueError("components must be a non-empty subset of {0, 1, 2, 3}")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "seed", int(self.seed))


@dataclass(frozen=True)
class KernelSettings:
    r: float = 1.0
    R: float = 4.0
    eps: float = 1e-3
    nu: float = 1.0
    nu_p: float = 1.0
    tau_min: float = 10.0
    tau_max: float = 1e4
    n_tau: int = 13
    tau_t: float = 100.0
    t_values: tuple = (0.1, 0.5, 1.0)
    slope_bracket: tuple = (-0.65, -0.35)

    def __post_init__(self):
        if self.n_tau < 12:
            raise ValueError("the decay fit needs at least 12 tau values")
        object.__setattr__(self, "t_values", tuple(float(t) for t in self.t_values))
        object.__setattr__(self, "slope_bracket", tuple(float(b) for b in self.slope_bracket))


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved experiment description.

    Time steps: the nonlinear and wave solvers use ``min(dt, dt_eps_ratio * eps)``
    so the wave dephasing time ``~eps`` is resolved; the limit system is stored
    every ``limit_dt`` for forcing interpolation; snapshots every ``snapshot_dt``.
    """

    kind: str = "converge"
    dims: tuple = (32, 32, 32)
    box: tuple = (2 * math.pi, 2 * math.pi, 2 * math.pi)
    eps: tuple = (1 / 4, 1 / 8, 1 / 16, 1 / 32)
    nu: float = 0.1
    nu_p: float = 0.1
    r: float = 0.5
    R: float = 18.0
    t_end: float = 1.0
    dt: float = 1 / 64
    dt_eps_ratio: float = 1 / 8
    limit_dt: float = 1 / 256
    snapshot_dt: float = 1 / 64
    seed: int = 20240611
    data: RandomFieldSpec = field(default_factory=RandomFieldSpec)
    kernel: KernelSettings = field(default_factory=KernelSettings)
    strichartz_p: tuple = (1.0, 2.0, 4.0)
    eta: float = 0.1
    threads: int = 1
    out: str = "out"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        eps = tuple(float(e) for e in self.eps)
        if not eps or any(e <= 0 for e in eps):
            raise ValueError("eps list must be positive")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValueError("eps list must be strictly decreasing")
        object.__setattr__(self, "eps", eps)
        object.__setattr__(self, "dims", tuple(int(n) for n in self.dims))
        object.__setattr__(self, "box", tuple(float(L) for L in self.box))
        object.__setattr__(self, "strichartz_p", tuple(float(p) for p in self.strichartz_p))
        if not 0 < self.r < self.R:
            raise ValueError("need 0 < r < R")
        for name in ("t_end", "dt", "limit_dt", "snapshot_dt", "dt_eps_ratio"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        seed = int(self.seed)
        if not 0 <= seed < 2**64:
            raise ValueError("seed must fit in 64 bits")
        object.__setattr__(self, "seed", seed)
        # the experiment seed drives the data generator
        if self.data.seed != seed:
            object.__setattr__(self, "data", replace(self.data, seed=seed))

    def step_for(self, eps: float) -> float:
        return min(self.dt, self.dt_eps_ratio * eps)

    def to_dict(self) -> dict:
        d = asdict(self)
        return json.loads(json.dumps(d))

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown configuration keys: {sorted(unknown)}")
        if "data" in d and isinstance(d["data"], dict):
            d["data"] = RandomFieldSpec(**d["data"])
        if "kernel" in d and isinstance(d["kernel"], dict):
            d["kernel"] = KernelSettings(**d["kernel"])
        for key in ("dims", "box", "eps", "strichartz_p"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)

    def with_overrides(self, **kw) -> "ExperimentConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw) if kw else self


def load_config(path: str | Path | None, **overrides) -> ExperimentConfig:
    """Read a TOML (``.toml``) or JSON file; ``None`` yields the defaults."""
    d: dict = {}
    if path is not None:
        path = Path(path)
        raw = path.read_bytes()
        if path.suffix.lower() == ".toml":
            d = _toml.loads(raw.decode())
        else:
            d = json.loads(raw)
    d.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_dict(d)
