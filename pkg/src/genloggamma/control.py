"""Tuning constants shared by all estimators."""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from .exceptions import ParameterDomainError
from .robust_scale import RhoParams

__all__ = ["RafKind", "Control"]


class RafKind(str, enum.Enum):
    """Residual adjustment functions for the weighted likelihood."""

    NED = "NED"
    GKL = "GKL"
    PWD = "PWD"
    HD = "HD"
    SCHI2 = "SCHI2"

    @classmethod
    def parse(cls, value) -> "RafKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            names = ", ".join(k.value for k in cls)
            raise ParameterDomainError(f"unknown RAF {value!r}; choose from {names}") from None


@dataclass(frozen=True)
class Control:
    """All tuning knobs of the estimators.

    Only ``tuning_rho``, ``tuning_psi`` (and the M-scale target ``b = 0.5``)
    are fixed by the method; the remaining defaults are choices of this
    package.
    """

    tuning_rho: float = 1.548
    tuning_psi: float = 6.08
    n_resample: int = 500
    max_it: int = 100
    refine_tol: float = 1e-7
    lower: float = -3.0
    upper: float = 3.0
    grid_n: int = 61
    bw: float = 0.3
    subdivisions: int = 100
    raf: RafKind = RafKind.NED
    raf_tau: float = 1.0
    minw: float = 0.04
    nexp: int = 1000
    step: float = 1.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "raf", RafKind.parse(self.raf))
        if not self.lower < self.upper:
            raise ParameterDomainError("lower must be smaller than upper")
        for name in ("n_resample", "max_it", "grid_n", "subdivisions", "nexp"):
            if int(getattr(self, name)) < 1:
                raise ParameterDomainError(f"{name} must be >= 1")
        if not 0 <= self.minw < 1:
            raise ParameterDomainError("minw must lie in [0, 1)")
        if not self.step >= 0:
            raise ParameterDomainError("step must be nonnegative")
        if not self.bw > 0:
            raise ParameterDomainError("bw must be positive")
        if self.raf is RafKind.GKL and not 0 <= self.raf_tau <= 1:
            raise ParameterDomainError("GKL needs 0 <= raf_tau <= 1")
        if self.raf is RafKind.PWD and self.raf_tau == 0:
            raise ParameterDomainError("PWD needs raf_tau != 0")
        if self.seed < 0:
            raise ParameterDomainError("seed must be nonnegative")

    @property
    def rho_params(self) -> RhoParams:
        return RhoParams(self.tuning_rho, self.tuning_psi, 0.5)

    def lambda_grid(self) -> np.ndarray:
        grid = np.linspace(self.lower, self.upper, self.grid_n)
        # keep an exact zero when the grid straddles it
        grid[np.abs(grid) < 1e-12 * max(1.0, abs(self.lower), abs(self.upper))] = 0.0
        return grid

    def with_(self, **changes) -> "Control":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["raf"] = self.raf.value
        if math.isinf(self.raf_tau):
            out["raf_tau"] = "inf"
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "Control":
        known = {f.name for f in fields(cls)}
        kwargs = {k: v for k, v in data.items() if k in known}
        if kwargs.get("raf_tau") == "inf":
            kwargs["raf_tau"] = math.inf
        return cls(**kwargs)
