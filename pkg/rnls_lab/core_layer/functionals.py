"""Conserved functionals E and M, the action, their gradients and the
Pohozaev / Gagliardo-Nirenberg diagnostics."""

import math
from typing import Dict, Tuple

import numpy as np

from rnls_lab.core_layer.grid import (
    forward,
    inner_values,
    inverse,
    kappa_squared,
    kappa_y_squared,
    multiplier,
)
from rnls_lab.errors import UsageError
from rnls_lab.models import Field, FunctionalReport, MultiplierKind
from rnls_lab.theory_layer.closed_forms import p_critical, profile_norms

# Floor for zero denominators in the ratio diagnostics
_TINY = 1e-300


def _quadratic(field: Field, weight: np.ndarray) -> float:
    coeffs = forward(field.values)
    return float(np.sum(weight * np.abs(coeffs) ** 2)) * field.grid.cell_volume / field.grid.npoints


def l2_sq(u: Field) -> float:
    return inner_values(u.grid, u.values, u.values)


def grad_sq(u: Field) -> float:
    """|∇u|_2^2 by Parseval"""
    return _quadratic(u, kappa_squared(u.grid))


def grad_y_sq(u: Field) -> float:
    if u.grid.k == 0:
        return 0.0
    return _quadratic(u, kappa_y_squared(u.grid))


def axis_grad_sq(u: Field, axis: int) -> float:
    return _quadratic(u, kappa_squared(u.grid, (axis,)))


def lp_power(u: Field, p: float) -> float:
    """∫|u|^{p+2}, pointwise modulus power so real p is allowed"""
    return float(np.sum(np.abs(u.values) ** (p + 2.0))) * u.grid.cell_volume


def energy(u: Field, p: float) -> float:
    return 0.5 * grad_sq(u) - lp_power(u, p) / (p + 2.0)


def mass(u: Field, beta: float = 1.0) -> float:
    """M(u) = ½∫|u|^2 + β|∇_y u|^2; the y term vanishes when k = 0"""
    if u.grid.k == 0:
        return 0.5 * l2_sq(u)
    return 0.5 * (l2_sq(u) + beta * grad_y_sq(u))


def action(u: Field, p: float, beta: float, omega: float) -> float:
    return energy(u, p) + omega * mass(u, beta)


def grad_E_values(values: np.ndarray, grid, p: float) -> np.ndarray:
    return inverse(kappa_squared(grid) * forward(values)) - np.abs(values) ** p * values


def grad_M_values(values: np.ndarray, grid, beta: float) -> np.ndarray:
    if grid.k == 0:
        return values.copy()
    return inverse(multiplier(grid, MultiplierKind.PBETA, beta).symbol * forward(values))


def grad_E(u: Field, p: float) -> Field:
    """E'(u) = -Δu - |u|^p u"""
    return u.with_values(grad_E_values(u.values, u.grid, p))


def grad_M(u: Field, beta: float = 1.0) -> Field:
    """M'(u) = P_β u"""
    return u.with_values(grad_M_values(u.values, u.grid, beta))


def el_residual(u: Field, p: float, beta: float, omega: float) -> float:
    """‖E'(u) + ωM'(u)‖_2 / ‖u‖_2"""
    size = math.sqrt(l2_sq(u))
    if size == 0:
        raise UsageError("Euler-Lagrange residual of the zero field is undefined")
    residual = grad_E_values(u.values, u.grid, p) + omega * grad_M_values(u.values, u.grid, beta)
    return math.sqrt(inner_values(u.grid, residual, residual)) / size


def pohozaev_check(u: Field, omega: float, p: float, beta: float = 1.0) -> Tuple[float, float]:
    """Relative residuals of the two Pohozaev identities of -Δφ + ωP_βφ = |φ|^p φ.

    Each residual is normalized by the largest term of its identity.
    """
    d = u.grid.d
    quad = grad_sq(u) + (beta * omega * grad_y_sq(u) if u.grid.k else 0.0)
    l2 = l2_sq(u)
    power = lp_power(u, p)

    terms1 = (quad, omega * l2, -power)
    terms2 = ((d - 2) * quad, omega * d * l2, -2.0 * d * power / (p + 2.0))
    rho1 = abs(sum(terms1)) / max(max(abs(t) for t in terms1), _TINY)
    rho2 = abs(sum(terms2)) / max(max(abs(t) for t in terms2), _TINY)
    return rho1, rho2


def gn_ratio(u: Field, p: float) -> float:
    """|u|_{p+2} / (|u|_2^{1-θ} |∇u|_2^θ), θ = pd/(2p+4); maximal at Q_{d,p}"""
    d = u.grid.d
    theta = p * d / (2.0 * p + 4.0)
    l2 = math.sqrt(l2_sq(u))
    grad = math.sqrt(grad_sq(u))
    if l2 < _TINY or grad < _TINY:
        raise UsageError("gn_ratio needs a nonzero field with nonzero gradient")
    return lp_power(u, p) ** (1.0 / (p + 2.0)) / (l2 ** (1.0 - theta) * grad ** theta)


def aniso_gn_ratio(u: Field, p: float) -> float:
    """Per-axis anisotropic ratio |u|_{p+2} / (|u|_2^{μ0} ∏_j |∂_j u|_2^{μ}).

    μ0 = 1 - pd/(2p+4) and μ = p/(2p+4) make it invariant under independent
    rescaling of every axis.
    """
    d = u.grid.d
    mu0 = 1.0 - p * d / (2.0 * p + 4.0)
    mu = p / (2.0 * p + 4.0)
    denominator = math.sqrt(l2_sq(u)) ** mu0
    for axis in range(d):
        partial = math.sqrt(axis_grad_sq(u, axis))
        if partial < _TINY:
            raise UsageError(f"aniso_gn_ratio needs a nonzero derivative along axis {axis}")
        denominator *= partial ** mu
    if denominator < _TINY:
        raise UsageError("aniso_gn_ratio needs a nonzero field")
    return lp_power(u, p) ** (1.0 / (p + 2.0)) / denominator


def gn_constant_report(d: int, p: float) -> Dict[str, float]:
    """Best-constant diagnostics for the Gagliardo-Nirenberg inequality.

    Reports the textbook closed-form constant next to the ratio attained at
    Q_{d,p}, which is the value this package treats as the best constant of
    the |u|_{p+2} form. The two differ (2/sqrt(3) against 3^{-1/8} for d=1,
    p=2); only the ratio at Q is asserted anywhere.
    """
    if not 0 < p < p_critical(d):
        raise UsageError(f"need 0 < p < p_c({d}), got p={p}")
    norms = profile_norms(d, p)
    theta = p * d / (2.0 * p + 4.0)
    l2, grad, power = norms["l2_sq"], norms["grad_sq"], norms["lp_power"]
    ratio_at_q = power ** (1.0 / (p + 2.0)) / (math.sqrt(l2) ** (1.0 - theta) * math.sqrt(grad) ** theta)
    lead = 4.0 + p * (2.0 - d)
    printed = 2.0 * (p + 2.0) / lead * (lead / (p * d)) ** (p * d / 4.0) / math.sqrt(l2)
    power_form = power / (math.sqrt(l2) ** (p + 2.0 - p * d / 2.0) * math.sqrt(grad) ** (p * d / 2.0))
    return {
        "d": float(d),
        "p": p,
        "ratio_at_Q": ratio_at_q,
        "printed_constant": printed,
        "power_form_constant": power_form,
    }


def functional_report(u: Field, p: float, beta: float, omega: float) -> FunctionalReport:
    e = energy(u, p)
    m = mass(u, beta)
    rho1, rho2 = pohozaev_check(u, omega, p, beta)
    return FunctionalReport(
        energy=e,
        mass=m,
        action=e + omega * m,
        omega=omega,
        grad_sq=grad_sq(u),
        grad_y_sq=grad_y_sq(u),
        l2_sq=l2_sq(u),
        lp_power=lp_power(u, p),
        rho1=rho1,
        rho2=rho2,
        el_residual=el_residual(u, p, beta, omega),
    )
