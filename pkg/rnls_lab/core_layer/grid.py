"""Periodic tensor-product grids and the spectral operators built on them.

Conventions:
    grid points        x_j = -L/2 + j*h, so the origin sits at index n/2
    forward transform  unnormalized; inverse divides by the point count
    wavenumbers        2*pi*{-n/2, ..., n/2-1}/L in numpy fftfreq order
"""

from __future__ import annotations

import math
from typing import List, Literal, Optional, Sequence, Union

import numpy as np
from scipy.fft import fftn, ifftn

from rnls_lab.config import DEFAULT_POINTS
from rnls_lab.models import Field, GridSpec, ModelParams, MultiplierKind, SpectralMultiplier
from rnls_lab.utils.cache import cached
from rnls_lab.utils.logger import get_logger

log = get_logger("Grid")

Weight = Literal["L2", "H1", "Mform"]

# Box half-width in units of the profile decay length
DECAY_HALF_WIDTH = 32.0


def make_grid(d: int, k: int, dims: Sequence[int], lengths: Sequence[float]) -> GridSpec:
    return GridSpec(d=d, k=k, dims=tuple(int(n) for n in dims), lengths=tuple(float(x) for x in lengths))


def auto_grid(params: ModelParams, n: Optional[int] = None, omega: Optional[float] = None) -> GridSpec:
    """Box sized so phi_omega decays far below round-off at the boundary.

    x axes get L = 64/sqrt(omega); the y axes are stretched by sqrt(1 + beta*omega).
    """
    omega = params.require_omega() if omega is None else omega
    n = n or DEFAULT_POINTS[params.d]
    base = 2.0 * DECAY_HALF_WIDTH / math.sqrt(omega)
    stretch = math.sqrt(1.0 + params.beta * omega)
    lengths = [base * (stretch if axis >= params.d - params.k else 1.0) for axis in range(params.d)]
    return make_grid(params.d, params.k, [n] * params.d, lengths)


def coordinates(grid: GridSpec) -> List[np.ndarray]:
    return [-0.5 * length + np.arange(n) * (length / n) for n, length in zip(grid.dims, grid.lengths)]


def mesh(grid: GridSpec) -> List[np.ndarray]:
    return np.meshgrid(*coordinates(grid), indexing="ij")


@cached("grid")
def wavenumbers(grid: GridSpec, axis: int) -> np.ndarray:
    n, length = grid.dims[axis], grid.lengths[axis]
    return 2.0 * np.pi * np.fft.fftfreq(n, d=length / n)


def _broadcast(grid: GridSpec, axis: int, values: np.ndarray) -> np.ndarray:
    shape = [1] * grid.d
    shape[axis] = grid.dims[axis]
    return values.reshape(shape)


@cached("grid")
def kappa_squared(grid: GridSpec, axes: Optional[tuple] = None) -> np.ndarray:
    """|kappa|^2 summed over the given axes (all axes by default), Nyquist retained"""
    axes = tuple(range(grid.d)) if axes is None else axes
    total = np.zeros(grid.shape)
    for axis in axes:
        total = total + _broadcast(grid, axis, wavenumbers(grid, axis) ** 2)
    return total


def kappa_y_squared(grid: GridSpec) -> np.ndarray:
    return kappa_squared(grid, grid.y_axes)


@cached("grid")
def dealias_mask(grid: GridSpec) -> np.ndarray:
    """2/3-rule mask: keep modes with |kappa_j| <= (2/3) kappa_max,j on every axis"""
    mask = np.ones(grid.shape, dtype=bool)
    for axis in range(grid.d):
        kappa = np.abs(wavenumbers(grid, axis))
        keep = kappa <= (2.0 / 3.0) * kappa.max()
        mask = mask & _broadcast(grid, axis, keep)
    return mask


@cached("grid")
def _symbol(grid: GridSpec, kind: MultiplierKind, beta: float, axis: Optional[int]) -> np.ndarray:
    if kind is MultiplierKind.LAPLACIAN:
        return -kappa_squared(grid)
    if kind is MultiplierKind.GRAD:
        kappa = wavenumbers(grid, axis).copy()
        # odd symbol: Nyquist zeroed to keep differentiation skew-symmetric
        kappa[grid.dims[axis] // 2] = 0.0
        return _broadcast(grid, axis, 1j * kappa) * np.ones(grid.shape)
    if kind is MultiplierKind.PBETA:
        return 1.0 + beta * kappa_y_squared(grid)
    if kind is MultiplierKind.PBETA_INV:
        return 1.0 / (1.0 + beta * kappa_y_squared(grid))
    if kind is MultiplierKind.H1_WEIGHT:
        return 1.0 + kappa_squared(grid)
    raise ValueError(f"unknown multiplier kind: {kind}")


def multiplier(grid: GridSpec, kind: Union[str, MultiplierKind], beta: float = 0.0,
               axis: Optional[int] = None) -> SpectralMultiplier:
    kind = MultiplierKind(kind)
    if kind in (MultiplierKind.PBETA, MultiplierKind.PBETA_INV):
        if grid.k == 0:
            # P_beta is the identity without regularized directions
            beta = 0.0
        elif not beta > 0:
            raise ValueError(f"P_beta needs beta > 0, got {beta}")
    else:
        beta = 0.0
    if kind is MultiplierKind.GRAD:
        if axis is None or not 0 <= axis < grid.d:
            raise ValueError(f"gradient needs an axis in [0, {grid.d}), got {axis}")
    else:
        axis = None
    return SpectralMultiplier(grid=grid, kind=kind, beta=float(beta), axis=axis,
                              symbol=_symbol(grid, kind, float(beta), axis))


def forward(values: np.ndarray) -> np.ndarray:
    return fftn(values)


def inverse(values: np.ndarray) -> np.ndarray:
    return ifftn(values)


def transform(field: Field, direction: Literal["forward", "inverse"] = "forward") -> Field:
    if direction == "forward":
        if field.domain != "physical":
            raise ValueError("forward transform expects a physical-space field")
        return Field(grid=field.grid, values=forward(field.values), domain="spectral")
    if direction == "inverse":
        if field.domain != "spectral":
            raise ValueError("inverse transform expects a spectral field")
        return Field(grid=field.grid, values=inverse(field.values), domain="physical")
    raise ValueError(f"unknown transform direction: {direction}")


def apply_symbol(values: np.ndarray, symbol: np.ndarray) -> np.ndarray:
    return inverse(symbol * forward(values))


def apply_multiplier(field: Field, kind: Union[str, MultiplierKind], beta: float = 0.0,
                     axis: Optional[int] = None) -> Field:
    op = multiplier(field.grid, kind, beta, axis)
    return field.with_values(apply_symbol(field.values, op.symbol))


def gradient(field: Field) -> List[Field]:
    return [apply_multiplier(field, MultiplierKind.GRAD, axis=axis) for axis in range(field.grid.d)]


def _pair(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # Re(a * conj(b)), written so that swapping a and b is bit-identical
    return a.real * b.real + a.imag * b.imag


def _spectral_sum(grid: GridSpec, weight: np.ndarray, u: np.ndarray, v: np.ndarray) -> float:
    return float(np.sum(weight * _pair(forward(u), forward(v)))) * grid.cell_volume / grid.npoints


def inner_values(grid: GridSpec, u: np.ndarray, v: np.ndarray, weight: Weight = "L2",
                 beta: float = 1.0) -> float:
    """Array-level inner product used by the solvers' inner loops"""
    l2 = float(np.sum(_pair(u, v))) * grid.cell_volume
    if weight == "L2":
        return l2
    if weight == "H1":
        return l2 + _spectral_sum(grid, kappa_squared(grid), u, v)
    if weight == "Mform":
        if grid.k == 0:
            return 0.5 * l2
        return 0.5 * (l2 + beta * _spectral_sum(grid, kappa_y_squared(grid), u, v))
    raise ValueError(f"unknown weight: {weight}")


def inner(u: Field, v: Field, weight: Weight = "L2", beta: float = 1.0) -> float:
    """Real symmetric bilinear form; inner(u, u, "Mform") equals M(u)"""
    if u.grid != v.grid:
        raise ValueError("fields live on different grids")
    return inner_values(u.grid, u.values, v.values, weight, beta)


def norm(u: Field, weight: Weight = "L2", beta: float = 1.0) -> float:
    return math.sqrt(max(inner(u, u, weight, beta), 0.0))


def spectral_l2_norm(field: Field) -> float:
    """L2 norm evaluated from the spectrum, for Parseval checks"""
    coeffs = forward(field.values)
    return math.sqrt(float(np.sum(np.abs(coeffs) ** 2)) * field.grid.cell_volume / field.grid.npoints)


def boundary_max(values: np.ndarray) -> float:
    """Largest modulus over the outer faces of the box"""
    peak = 0.0
    for axis in range(values.ndim):
        for index in (0, -1):
            face = np.take(values, index, axis=axis)
            peak = max(peak, float(np.max(np.abs(face))))
    return peak
