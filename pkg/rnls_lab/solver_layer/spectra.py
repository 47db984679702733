"""Linearized operators L1, L2 at a bound state, their lowest eigenpairs and
the slope identity <L1 ψ, ψ> = -m'(ω) with ψ = ∂φ_ω/∂ω."""

import math
from typing import List, Literal, NamedTuple, Optional

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, cg, eigsh

from rnls_lab.core_layer.grid import forward, gradient, inner_values, inverse, kappa_squared, kappa_y_squared
from rnls_lab.errors import EigenConvergenceError, UsageError
from rnls_lab.models import Field, GridSpec, ModelParams, SlopeTestReport
from rnls_lab.theory_layer.closed_forms import mass_curve, phi_profile, q_exact_1d
from rnls_lab.utils.logger import get_logger

log = get_logger("Spectra")

OperatorKind = Literal["L1", "L2"]


class EigenPair(NamedTuple):
    value: float
    field: Field
    residual: float


class LinearizedOperator:
    """L1 v = -Δv + ωP_β v - (p+1)φ^p v,  L2 v = -Δv + ωP_β v - φ^p v"""

    def __init__(self, kind: OperatorKind, profile: Field, params: ModelParams):
        if kind not in ("L1", "L2"):
            raise UsageError(f"operator kind must be L1 or L2, got {kind}")
        if (profile.grid.d, profile.grid.k) != (params.d, params.k):
            raise UsageError("profile grid and parameters disagree on (d, k)")
        self.kind = kind
        self.profile = profile
        self.params = params
        self.omega = params.require_omega()

        grid = profile.grid
        phi_p = np.abs(profile.values) ** params.p
        self.potential = (params.p + 1.0) * phi_p if kind == "L1" else phi_p
        pbeta = 1.0 + params.beta * kappa_y_squared(grid) if grid.k else 1.0
        self.symbol = kappa_squared(grid) + self.omega * pbeta
        # L + shift is positive definite: the symbol is >= ω > 0
        self.shift = float(np.max(self.potential)) + 1.0

    @property
    def grid(self) -> GridSpec:
        return self.profile.grid

    @property
    def scale(self) -> float:
        return self.shift

    def apply_values(self, values: np.ndarray) -> np.ndarray:
        return inverse(self.symbol * forward(values)) - self.potential * values

    def form(self, u: np.ndarray, v: np.ndarray) -> float:
        """<L u, v>_2"""
        return inner_values(self.grid, self.apply_values(u), v)

    def _real_operator(self, shift: float = 0.0) -> LinearOperator:
        shape = self.grid.shape
        size = self.grid.npoints

        def matvec(x):
            values = np.asarray(x, dtype=float).reshape(shape)
            return (self.apply_values(values).real + shift * values).ravel()

        return LinearOperator((size, size), matvec=matvec, dtype=float)

    def _preconditioner(self) -> LinearOperator:
        shape = self.grid.shape
        size = self.grid.npoints
        inverse_symbol = 1.0 / (self.symbol + self.shift)

        def matvec(x):
            values = np.asarray(x, dtype=float).reshape(shape)
            return inverse(inverse_symbol * forward(values)).real.ravel()

        return LinearOperator((size, size), matvec=matvec, dtype=float)


def apply_linop(op: LinearizedOperator, v: Field) -> Field:
    if v.grid != op.grid:
        raise UsageError("field and operator live on different grids")
    return v.with_values(op.apply_values(v.values))


def _normalize(grid: GridSpec, vector: np.ndarray) -> np.ndarray:
    values = vector.reshape(grid.shape)
    values = values / math.sqrt(inner_values(grid, values, values))
    # sign convention: largest entry positive
    if values.flat[int(np.argmax(np.abs(values)))] < 0:
        values = -values
    return values


def lowest_eigs(op: LinearizedOperator, n_eigs: int = 4, tol: float = 1e-8, seed: int = 0,
                maxiter: int = 2000) -> List[EigenPair]:
    """Smallest eigenpairs by shift-invert Lanczos.

    The shift sits below the spectrum; each inverse application is a
    conjugate-gradient solve preconditioned by the Fourier symbol.
    """
    if not 1 <= n_eigs <= 8:
        raise UsageError(f"n_eigs must be between 1 and 8, got {n_eigs}")
    size = op.grid.npoints
    sigma = -op.shift
    shifted = op._real_operator(op.shift)
    preconditioner = op._preconditioner()

    def solve(x):
        solution, info = cg(shifted, x, rtol=1e-13, atol=0.0, maxiter=maxiter, M=preconditioner)
        if info != 0:
            raise EigenConvergenceError(f"inner CG solve did not converge (info={info})")
        return solution

    inverse_op = LinearOperator((size, size), matvec=solve, dtype=float)
    v0 = preconditioner.matvec(np.random.default_rng(seed).standard_normal(size))
    ncv = min(size - 1, max(30, 2 * n_eigs + 1))
    try:
        values, vectors = eigsh(op._real_operator(), k=n_eigs, sigma=sigma, which="LM", OPinv=inverse_op,
                                v0=v0, ncv=ncv, maxiter=maxiter, tol=tol * 1e-3)
    except ArpackNoConvergence as e:
        log.error(f"❌ Lanczos did not converge for {op.kind}: {e}")
        raise EigenConvergenceError(f"eigen-solve for {op.kind} did not converge after {maxiter} iterations") from e

    pairs = []
    for index in np.argsort(values):
        # one inverse-iteration sweep strips leftover rough components of v0
        field_values = _normalize(op.grid, solve(vectors[:, index]))
        lam = op.form(field_values, field_values)
        defect = op.apply_values(field_values).real - lam * field_values
        residual = math.sqrt(inner_values(op.grid, defect, defect))
        if residual > tol * op.scale:
            raise EigenConvergenceError(
                f"eigenpair {lam:.6g} of {op.kind} has residual {residual:.3e} > {tol * op.scale:.3e}"
            )
        pairs.append(EigenPair(lam, Field(grid=op.grid, values=field_values), residual))
    log.info(f"✅ {op.kind}: lowest eigenvalues {[round(p.value, 10) for p in pairs]}")
    return pairs


def translation_rayleigh(op: LinearizedOperator) -> List[float]:
    """Rayleigh quotients <L ∂_jφ, ∂_jφ> / |∂_jφ|^2 for every axis"""
    quotients = []
    for partial in gradient(op.profile):
        values = partial.values.real
        quotients.append(op.form(values, values) / inner_values(op.grid, values, values))
    return quotients


def l1_negative_eigenvalue_1d(p: float, omega: float) -> float:
    """Exact negative eigenvalue of L1 for d = 1, k = 0: ω(1 - (p+2)^2/4)"""
    return omega * (1.0 - (p + 2.0) ** 2 / 4.0)


def dense_fd_l1_oracle(p: float, omega: float, half_width: float = 20.0, h: float = 0.004,
                       n_eigs: int = 3) -> np.ndarray:
    """Lowest eigenvalues of L1 (d = 1, k = 0) by second-order finite differences
    with Dirichlet ends, solved as a dense symmetric tridiagonal problem."""
    n = int(round(2.0 * half_width / h)) - 1
    x = -half_width + h * np.arange(1, n + 1)
    phi = omega ** (1.0 / p) * q_exact_1d(p, math.sqrt(omega) * x)
    diagonal = 2.0 / h ** 2 + omega - (p + 1.0) * phi ** p
    off = -np.ones(n - 1) / h ** 2
    return eigh_tridiagonal(diagonal, off, select="i", select_range=(0, n_eigs - 1), eigvals_only=True)


def vk_slope_test(params: ModelParams, grid: GridSpec, delta_omega: Optional[float] = None) -> SlopeTestReport:
    """Compare <L1 ψ, ψ> with -m'(ω), ψ by central difference of φ_ω in ω"""
    omega = params.require_omega()
    delta = omega * 1e-4 if delta_omega is None else delta_omega
    if not 0 < delta < omega:
        raise UsageError(f"need 0 < delta_omega < omega, got {delta}")

    phi = phi_profile(params, grid)
    upper = phi_profile(params.with_omega(omega + delta), grid)
    lower = phi_profile(params.with_omega(omega - delta), grid)
    psi = (upper.values.real - lower.values.real) / (2.0 * delta)

    op = LinearizedOperator("L1", phi, params)
    form = op.form(psi, psi)
    slope = float(mass_curve(params).m_prime(omega))
    residual = abs(form + slope) / abs(slope) if slope != 0 else abs(form)
    if residual > 1e-2:
        log.warning(f"⚠️ Slope identity residual {residual:.3e} at omega={omega}; delta_omega may be too large")

    psi_norm = math.sqrt(inner_values(grid, psi, psi))
    overlaps = []
    for partial in gradient(phi):
        values = partial.values.real
        size = math.sqrt(inner_values(grid, values, values))
        overlaps.append(inner_values(grid, psi, values) / (psi_norm * size) if size > 0 else 0.0)

    return SlopeTestReport(
        omega=omega,
        delta_omega=delta,
        psi=Field(grid=grid, values=psi),
        l1_form=form,
        m_prime_closed=slope,
        residual=residual,
        translation_overlap=overlaps,
    )
