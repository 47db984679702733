from __future__ import annotations

import math
from enum import Enum
from typing import Any, Dict, List, Literal, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, PrivateAttr, field_validator, model_validator


class GridSpec(BaseModel):
    """Periodic tensor-product grid; the LAST k axes are the regularized y-directions"""

    model_config = ConfigDict(frozen=True)

    d: int
    k: int
    dims: Tuple[int, ...]
    lengths: Tuple[float, ...]

    @model_validator(mode="after")
    def _check(self) -> "GridSpec":
        if not 1 <= self.d <= 3:
            raise ValueError(f"dimension d must be 1, 2 or 3, got {self.d}")
        if not 0 <= self.k <= self.d:
            raise ValueError(f"need 0 <= k <= d, got k={self.k}, d={self.d}")
        if len(self.dims) != self.d or len(self.lengths) != self.d:
            raise ValueError("dims and lengths must have one entry per axis")
        for n in self.dims:
            if n < 8 or n % 2:
                raise ValueError(f"points per axis must be even and >= 8, got {n}")
        for length in self.lengths:
            if not (length > 0 and math.isfinite(length)):
                raise ValueError(f"box lengths must be positive, got {length}")
        return self

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.dims)

    @property
    def npoints(self) -> int:
        return int(np.prod(self.dims))

    @property
    def spacing(self) -> Tuple[float, ...]:
        return tuple(length / n for length, n in zip(self.lengths, self.dims))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def y_axes(self) -> Tuple[int, ...]:
        return tuple(range(self.d - self.k, self.d))


class Field(BaseModel):
    """Complex samples on a grid, row-major with the last axis fastest"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: GridSpec
    values: np.ndarray
    domain: Literal["physical", "spectral"] = "physical"

    @field_validator("values", mode="before")
    @classmethod
    def _as_complex(cls, value: Any) -> np.ndarray:
        return np.ascontiguousarray(value, dtype=np.complex128)

    @model_validator(mode="after")
    def _check(self) -> "Field":
        if self.values.shape != self.grid.shape:
            raise ValueError(f"values shape {self.values.shape} does not match grid {self.grid.shape}")
        if not np.isfinite(self.values).all():
            raise ValueError("field contains non-finite entries")
        return self

    @property
    def real(self) -> np.ndarray:
        return self.values.real

    def with_values(self, values: np.ndarray) -> "Field":
        return Field(grid=self.grid, values=values, domain=self.domain)


class MultiplierKind(str, Enum):
    LAPLACIAN = "laplacian"
    GRAD = "grad"
    PBETA = "pbeta"
    PBETA_INV = "pbeta_inv"
    H1_WEIGHT = "h1_weight"


class SpectralMultiplier(BaseModel):
    """Fourier symbol sampled on the wavenumber lattice of a grid"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: GridSpec
    kind: MultiplierKind
    beta: float = 0.0
    axis: Optional[int] = None
    symbol: np.ndarray


class ModelParams(BaseModel):
    """Physical parameters of i(P_beta u)_t + Δu + |u|^p u = 0"""

    model_config = ConfigDict(frozen=True)

    d: int
    k: int
    p: float
    beta: float = 1.0
    omega: Optional[float] = None
    m: Optional[float] = None

    @model_validator(mode="after")
    def _check(self) -> "ModelParams":
        if self.d < 1:
            raise ValueError(f"dimension must be positive, got {self.d}")
        if not 0 <= self.k <= self.d:
            raise ValueError(f"need 0 <= k <= d, got k={self.k}, d={self.d}")
        if not self.p > 0:
            raise ValueError(f"nonlinearity exponent must be positive, got {self.p}")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.omega is not None and not self.omega > 0:
            raise ValueError(f"omega must be positive, got {self.omega}")
        if self.m is not None and not self.m > 0:
            raise ValueError(f"mass must be positive, got {self.m}")
        return self

    def with_omega(self, omega: float) -> "ModelParams":
        return ModelParams(d=self.d, k=self.k, p=self.p, beta=self.beta, omega=omega, m=self.m)

    @property
    def focusing_threshold(self) -> float:
        return 4.0 / self.d

    @property
    def anisotropic_threshold(self) -> float:
        return math.inf if self.k == self.d else 4.0 / (self.d - self.k)

    def require_omega(self) -> float:
        if self.omega is None:
            raise ValueError("this operation needs omega")
        return self.omega


class RadialProfile(BaseModel):
    """Radial table of Q_{d,p} with its derivative on r_i = i*h_r"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    d: int
    p: float
    h_r: float
    r: np.ndarray
    values: np.ndarray
    derivative: np.ndarray
    amplitude: float
    decay: float
    r_match: float
    tail_constant: float

    _spline: Any = PrivateAttr(default=None)


class FlowOptions(BaseModel):
    model_config = ConfigDict(frozen=True)

    tau: float = 0.5
    tol: float = 1e-9
    max_iter: int = 20000
    seed: int = 0
    check_stride: int = 50
    vanish_spread: float = 0.2
    divergence_floor: float = -1e6


class MinimizerResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    minimizer: Field
    energy: float
    mass: float
    constraint_residual: float
    omega_hat: float
    el_residual: float
    iterations: int
    converged: bool
    status: Literal["converged", "max_iterations", "stalled", "infimum_not_attained"]
    seed: int
    energy_history: List[float] = []

    def sidecar(self, params: "ModelParams", m: float) -> Dict[str, Any]:
        return {
            "params": params.model_dump(),
            "m": m,
            "E": self.energy,
            "omega_hat": self.omega_hat,
            "residual": self.el_residual,
            "iterations": self.iterations,
            "converged": self.converged,
            "status": self.status,
            "seed": self.seed,
        }


class FunctionalReport(BaseModel):
    energy: float
    mass: float
    action: float
    omega: float
    grad_sq: float
    grad_y_sq: float
    l2_sq: float
    lp_power: float
    rho1: float
    rho2: float
    el_residual: float


class RegimeLabel(str, Enum):
    SUBCRITICAL_ALL_STABLE = "subcritical_all_stable"
    CRITICAL_K0 = "critical_k0"
    SUPERCRITICAL_K0 = "supercritical_k0"
    BAND_WITH_M0 = "k>=1_band_with_m0"
    SUPERCRITICAL_K1 = "k>=1_supercritical"
    BOUNDARY_UNCOVERED = "boundary_uncovered"


class RegimeReport(BaseModel):
    d: int
    k: int
    p: float
    beta: float
    classification: RegimeLabel
    im_verdict: str
    im_finite: Optional[bool]
    p_critical: float
    omega0: Optional[float] = None
    omega1: Optional[float] = None
    omega2: Optional[float] = None
    omega3: Optional[float] = None
    m0: Optional[float] = None
    m1: Optional[float] = None
    sampled_slope_signs: List[Tuple[float, int]] = []

    def admits_minimization(self, m: float) -> bool:
        """True when I_m is finite, so a descent flow cannot run off to -inf"""
        if self.classification in (RegimeLabel.SUBCRITICAL_ALL_STABLE, RegimeLabel.BAND_WITH_M0):
            return True
        if self.classification is RegimeLabel.CRITICAL_K0:
            return self.m0 is not None and m <= self.m0
        return False


class SlopeTestReport(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    omega: float
    delta_omega: float
    psi: Field
    l1_form: float
    m_prime_closed: float
    residual: float
    translation_overlap: List[float]


class EvolveConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    dt: float = 1e-3
    T: float = 20.0
    snapshot_stride: int = 0
    dealias: bool = True
    monitor_stride: int = 100
    reverse: bool = False
    blowup_threshold: float = 1e6

    @model_validator(mode="after")
    def _check(self) -> "EvolveConfig":
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.T < self.dt:
            raise ValueError(f"horizon T={self.T} shorter than dt={self.dt}")
        if self.monitor_stride < 1 or self.snapshot_stride < 0:
            raise ValueError("strides must be non-negative (monitor stride >= 1)")
        return self

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))


class ConservationLog(BaseModel):
    t: List[float] = []
    mass: List[float] = []
    energy: List[float] = []
    linf: List[float] = []
    grad_l2: List[float] = []

    def append(self, t: float, mass: float, energy: float, linf: float, grad_l2: float) -> None:
        if self.t and t <= self.t[-1]:
            raise ValueError(f"log times must increase: {t} after {self.t[-1]}")
        self.t.append(t)
        self.mass.append(mass)
        self.energy.append(energy)
        self.linf.append(linf)
        self.grad_l2.append(grad_l2)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "t": self.t, "M": self.mass, "E": self.energy,
            "linf": self.linf, "grad_l2": self.grad_l2,
        })


class EvolutionResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    final: Field
    log: ConservationLog
    snapshots: List[Tuple[float, Field]] = []
    blowup: bool = False
    blowup_time: Optional[float] = None
    mass_drift: float = 0.0
    energy_drift: float = 0.0
    steps: int = 0


class OrbitalFit(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    theta: float
    shift: Tuple[float, ...]
    shift_index: Tuple[int, ...]
    aligned: Field
    distance: float
    candidate_distance: float


class PerturbSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["scale", "bandlimited_noise", "mode"] = "bandlimited_noise"
    amplitude: float = 0.01
    seed: int = 0
    mode_index: int = 0

    @model_validator(mode="after")
    def _check(self) -> "PerturbSpec":
        if not self.amplitude > 0:
            raise ValueError(f"perturbation amplitude must be positive, got {self.amplitude}")
        return self


class StabilityVerdict(BaseModel):
    times: List[float] = []
    distances: List[float] = []
    masses: List[float] = []
    energies: List[float] = []
    initial_distance: float = 0.0
    max_distance: float = 0.0
    growth_ratio: float = 0.0
    ratio_threshold: float = 5.0
    verdict: Literal["bounded", "growing", "blowup"] = "bounded"

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "t": self.times, "orbital_distance": self.distances,
            "M": self.masses, "E": self.energies,
        })


class SweepSpec(BaseModel):
    ds: List[int] = [1]
    ks: List[int] = [0]
    ps: List[float] = [2.0]
    betas: List[float] = [1.0]
    omegas: List[float] = [1.0]
    experiments: bool = False
    n: Optional[int] = None
    T: float = 20.0
    dt: float = 1e-3
    amplitude: float = 0.01
    seed: int = 0
    ratio_threshold: float = 5.0
    jobs: int = 1


class RunSettings(BaseModel):
    """Resolved CLI settings after defaults < config file < command line"""

    subcommand: str
    d: int = 1
    k: int = 0
    p: float = 2.0
    beta: float = 1.0
    omega: float = 1.0
    m: Optional[float] = None
    n: Optional[int] = None
    L: Optional[float] = None
    dt: float = 1e-3
    T: float = 20.0
    seed: int = 0
    out: str = "out"
    snapshot_stride: int = 0
    method: Literal["shoot", "flow"] = "shoot"
    op: Literal["L1", "L2"] = "L1"
    neigs: int = 4
    perturb: Literal["scale", "bandlimited_noise", "mode"] = "bandlimited_noise"
    amplitude: float = 0.01
    input: Optional[str] = None
    omega_min: float = 0.01
    omega_max: float = 2.0
    num: int = 200
    ds: List[int] = [1]
    ks: List[int] = [0]
    ps: List[float] = [2.0]
    betas: List[float] = [1.0]
    omegas: List[float] = [1.0]
    experiments: bool = False
    jobs: int = 1
    log_level: str = "INFO"

    @field_validator("ds", "ks", "ps", "betas", "omegas", mode="before")
    @classmethod
    def _split_list(cls, value: Any) -> Any:
        if isinstance(value, str):
            return [item for item in value.replace(" ", "").split(",") if item]
        return value

    @model_validator(mode="after")
    def _check(self) -> "RunSettings":
        if not 0 <= self.k <= self.d:
            raise ValueError(f"inconsistent (d, k) = ({self.d}, {self.k}): need 0 <= k <= d")
        if not 1 <= self.neigs <= 8:
            raise ValueError(f"--neigs must be between 1 and 8, got {self.neigs}")
        if self.num < 2:
            raise ValueError("--num must be at least 2")
        return self


class RunManifest(BaseModel):
    subcommand: str
    parameters: Dict[str, Any]
    grid: Optional[Dict[str, Any]] = None
    seeds: List[int] = []
    tool_version: str
    format_version: str
    started_at: str
    finished_at: Optional[str] = None
    outputs: List[str] = []
    status: str = "ok"
    error: Optional[str] = None
