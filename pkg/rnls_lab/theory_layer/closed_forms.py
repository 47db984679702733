"""Explicit formulas: critical exponents, sech profiles, the φ_ω scaling map,
the mass curve m(ω) and the regime classifier built on it.

Everything here is pure. Q_{d,p} norms for d >= 2 come from one cached
radial shooting run; every other quantity is closed-form.
"""

import math
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict
from scipy.optimize import brentq
from scipy.special import gammaln

from rnls_lab.core_layer.grid import boundary_max, mesh
from rnls_lab.errors import ProfileDecayError, UsageError
from rnls_lab.models import Field, GridSpec, ModelParams, RadialProfile, RegimeLabel, RegimeReport
from rnls_lab.utils.cache import cached
from rnls_lab.utils.logger import get_logger

log = get_logger("ClosedForms")

ArrayLike = Union[float, np.ndarray]

# Boundary modulus allowed relative to the profile peak
DECAY_TOLERANCE = 1e-10
# Step of the central-difference m'(ω), relative to ω
FD_RELATIVE_STEP = 1e-5
# Stand-in for ω -> 0+ limits
OMEGA_LIMIT = 1e-8
# Log-spaced sample points for the reported slope signs
SLOPE_SAMPLES = tuple(10.0 ** e for e in range(-3, 4))


def p_critical(d: int) -> float:
    if d < 1:
        raise UsageError(f"dimension must be positive, got {d}")
    return math.inf if d <= 2 else 4.0 / (d - 2)


def _require_subcritical(d: int, p: float) -> None:
    if not 0 < p < p_critical(d):
        raise UsageError(f"need 0 < p < p_c({d}) = {p_critical(d)}, got p={p}")


def _sech(z: np.ndarray) -> np.ndarray:
    # 2e^{-|z|}/(1+e^{-2|z|}) never overflows
    t = np.exp(-np.abs(z))
    return 2.0 * t / (1.0 + t * t)


def _amplitude(p: float) -> float:
    return ((p + 2.0) / 2.0) ** (1.0 / p)


def q_exact_1d(p: float, x: ArrayLike) -> ArrayLike:
    """Q_{1,p}(x) = ((p+2)/2)^{1/p} sech^{2/p}(px/2)"""
    if not p > 0:
        raise UsageError(f"p must be positive, got {p}")
    values = _amplitude(p) * _sech(0.5 * p * np.asarray(x, dtype=float)) ** (2.0 / p)
    return float(values) if np.ndim(values) == 0 else values


def q_exact_1d_derivatives(p: float, x: ArrayLike) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(Q, Q', Q'') of the 1D profile, differentiated analytically"""
    z = 0.5 * p * np.asarray(x, dtype=float)
    q = np.asarray(q_exact_1d(p, x))
    tanh = np.tanh(z)
    sech_sq = _sech(z) ** 2
    return q, -q * tanh, q * tanh ** 2 - 0.5 * p * q * sech_sq


def c_p(p: float) -> float:
    """Γ(½)Γ(2/p)/Γ(2/p+½), the integral of sech^{4/p}"""
    return math.exp(gammaln(0.5) + gammaln(2.0 / p) - gammaln(2.0 / p + 0.5))


def gradient_ratio(d: int, p: float, k: int) -> float:
    """|∇_y Q|^2 / |Q|^2 = kp/(4+2p-dp)"""
    return k * p / (4.0 + 2.0 * p - d * p)


@cached("closed_forms")
def profile_norms(d: int, p: float) -> Dict[str, float]:
    """|Q|^2, |∇Q|^2 and |Q|_{p+2}^{p+2} of Q_{d,p}.

    |Q|^2 is exact for d = 1 and a radial quadrature of the shooting profile
    otherwise; the other two follow from the Pohozaev identities of Q.
    """
    _require_subcritical(d, p)
    if d == 1:
        l2 = _amplitude(p) ** 2 * (2.0 / p) * c_p(p)
    else:
        from rnls_lab.solver_layer.ground_state import radial_l2_sq, shoot_radial

        l2 = radial_l2_sq(shoot_radial(d, p))
    grad = l2 * d * p / (4.0 + 2.0 * p - d * p)
    return {"l2_sq": l2, "grad_sq": grad, "lp_power": grad + l2}


def check_decay(values: np.ndarray, what: str = "profile") -> None:
    peak = float(np.max(np.abs(values)))
    edge = boundary_max(values)
    if peak > 0 and edge >= DECAY_TOLERANCE * peak:
        log.warning(f"⚠️ {what} has not decayed at the box boundary: {edge:.3e} vs peak {peak:.3e}")
        raise ProfileDecayError(
            f"{what} boundary value {edge:.3e} exceeds {DECAY_TOLERANCE:g} x peak {peak:.3e}; enlarge L"
        )


def phi_profile(params: ModelParams, grid: GridSpec, profile: Optional[RadialProfile] = None) -> Field:
    """Sample φ_ω(x, y) = ω^{1/p} Q(√ω x, √ω (1+βω)^{-1/2} y) on the grid"""
    omega = params.require_omega()
    _require_subcritical(params.d, params.p)
    if (grid.d, grid.k) != (params.d, params.k):
        raise UsageError(f"grid (d, k) = ({grid.d}, {grid.k}) does not match parameters ({params.d}, {params.k})")

    y_scale = math.sqrt(omega / (1.0 + params.beta * omega))
    radius_sq = np.zeros(grid.shape)
    for axis, coord in enumerate(mesh(grid)):
        scale = y_scale if axis in grid.y_axes else math.sqrt(omega)
        radius_sq = radius_sq + (scale * coord) ** 2
    radius = np.sqrt(radius_sq)

    if params.d == 1:
        shape = q_exact_1d(params.p, radius)
    else:
        from rnls_lab.solver_layer.ground_state import evaluate_profile, shoot_radial

        shape = evaluate_profile(profile or shoot_radial(params.d, params.p), radius)
    values = omega ** (1.0 / params.p) * shape
    check_decay(values, f"phi_omega (omega={omega:g})")
    return Field(grid=grid, values=values)


class MassCurve(BaseModel):
    """m(ω) = M(φ_ω) and its closed-form slope.

    For k >= 1, m(ω) = f(βω) with f(x) = x^a (1+x)^b (A + Bx) and
    f'(x) = x^{a-1} (1+x)^{b-1} (c0 + c1 x + c2 x^2).
    """

    model_config = ConfigDict(frozen=True)

    d: int
    k: int
    p: float
    beta: float
    l2_sq: float
    grad_sq: float

    @property
    def grad_y_sq(self) -> float:
        return self.grad_sq * self.k / self.d

    @property
    def lp_power(self) -> float:
        return self.grad_sq + self.l2_sq

    @property
    def a(self) -> float:
        return (4.0 - self.p * self.d) / (2.0 * self.p)

    @property
    def b(self) -> float:
        return (self.k - 2.0) / 2.0

    @property
    def A(self) -> float:
        return 0.5 * self.beta ** (-self.a) * self.l2_sq

    @property
    def B(self) -> float:
        return self.A + 0.5 * self.beta ** (-self.a) * self.grad_y_sq

    @property
    def coefficients(self) -> Tuple[float, float, float]:
        a, b, A, B = self.a, self.b, self.A, self.B
        return a * A, a * (A + B) + b * A + B, (a + b + 1.0) * B

    def _check_omega(self, omega: ArrayLike) -> np.ndarray:
        values = np.asarray(omega, dtype=float)
        if np.any(values <= 0):
            raise UsageError("the mass curve is defined for omega > 0 only")
        return values

    @staticmethod
    def _out(values: np.ndarray) -> ArrayLike:
        return float(values) if np.ndim(values) == 0 else values

    def m(self, omega: ArrayLike) -> ArrayLike:
        w = self._check_omega(omega)
        if self.k == 0:
            return self._out(0.5 * self.l2_sq * w ** self.a)
        x = self.beta * w
        return self._out(x ** self.a * (1.0 + x) ** self.b * (self.A + self.B * x))

    def m_prime(self, omega: ArrayLike) -> ArrayLike:
        w = self._check_omega(omega)
        if self.k == 0:
            return self._out(self.a * 0.5 * self.l2_sq * w ** (self.a - 1.0))
        c0, c1, c2 = self.coefficients
        x = self.beta * w
        slope = x ** (self.a - 1.0) * (1.0 + x) ** (self.b - 1.0) * (c0 + c1 * x + c2 * x * x)
        return self._out(self.beta * slope)

    def m_prime_fd(self, omega: ArrayLike) -> ArrayLike:
        w = self._check_omega(omega)
        step = FD_RELATIVE_STEP * w
        return self._out((np.asarray(self.m(w + step)) - np.asarray(self.m(w - step))) / (2.0 * step))

    def energy(self, omega: ArrayLike) -> ArrayLike:
        """E(φ_ω) from the scaling map and the Pohozaev identities of Q"""
        w = self._check_omega(omega)
        stretch = 1.0 + self.beta * w if self.k else np.ones_like(w)
        g_x = self.grad_sq - self.grad_y_sq
        bracket = 0.5 * (g_x + self.grad_y_sq / stretch) - self.lp_power / (self.p + 2.0)
        scale = w ** (2.0 / self.p + 1.0 - 0.5 * self.d) * stretch ** (0.5 * self.k)
        return self._out(scale * bracket)

    def positive_root(self) -> Optional[float]:
        """Positive zero x0 of c0 + c1 x + c2 x^2 when the quadratic has exactly one"""
        if self.k == 0:
            return None
        c0, c1, c2 = self.coefficients
        if not c0 * c2 < 0:
            return None
        disc = math.sqrt(c1 * c1 - 4.0 * c0 * c2)
        if c1 > 0:
            return 2.0 * c0 / (-c1 - disc)
        return (-c1 + disc) / (2.0 * c2)

    def omega0(self) -> Optional[float]:
        x0 = self.positive_root()
        return None if x0 is None else x0 / self.beta

    def minimum(self) -> Optional[float]:
        """min over ω of m(ω), attained at ω0"""
        omega0 = self.omega0()
        return None if omega0 is None else self.m(omega0)

    def table(self, omegas: np.ndarray) -> pd.DataFrame:
        """Rows of the mass-curve CSV"""
        return pd.DataFrame({
            "omega": omegas,
            "m": self.m(omegas),
            "m_prime_closed": self.m_prime(omegas),
            "m_prime_fd": self.m_prime_fd(omegas),
            "E": self.energy(omegas),
        })


def mass_curve(params: ModelParams, norms: Optional[Dict[str, float]] = None) -> MassCurve:
    norms = norms or profile_norms(params.d, params.p)
    return MassCurve(d=params.d, k=params.k, p=params.p, beta=params.beta,
                     l2_sq=norms["l2_sq"], grad_sq=norms["grad_sq"])


def me_explicit_d1k1(p: float, beta: float, omega: float) -> Tuple[float, float]:
    """(M, E) of φ_ω for d = k = 1 from the sech integrals.

    θ = sqrt(ω/(1+βω)); sign(E) = sign(p - 4(1+βω)).
    """
    if not (p > 0 and beta > 0 and omega > 0):
        raise UsageError("me_explicit_d1k1 needs p, beta, omega > 0")
    theta = math.sqrt(omega / (1.0 + beta * omega))
    lead = (omega * (p + 2.0) / 2.0) ** (2.0 / p) * c_p(p) / (p * theta)
    m = lead * (1.0 + beta * omega * p / ((1.0 + beta * omega) * (4.0 + p)))
    e = lead * omega / (4.0 + p) * (p / (1.0 + beta * omega) - 4.0)
    return m, e


def omega_thresholds(p: float, beta: float) -> Optional[Tuple[float, float]]:
    """(ω1, ω2) for d = k = 1 and p > 4: m' changes sign at ω1, E(φ_ω) at ω2"""
    if p <= 4:
        return None
    root = math.sqrt(4.0 + p)
    omega1 = (p - 4.0) * root / ((4.0 * root + math.sqrt(8.0) * p) * beta)
    omega2 = (p - 4.0) / (4.0 * beta)
    return omega1, omega2


def omega3(p: float, beta: float) -> Optional[float]:
    """The root ω3 < ω1 of m(ω) = m(ω2), d = k = 1"""
    thresholds = omega_thresholds(p, beta)
    if thresholds is None:
        return None
    omega1, omega2 = thresholds
    curve = mass_curve(ModelParams(d=1, k=1, p=p, beta=beta))
    target = curve.m(omega2)
    lower = omega1 * 0.5
    while curve.m(lower) <= target:
        lower *= 0.5
        if lower < 1e-300:
            raise UsageError("could not bracket omega3")
    return brentq(lambda w: curve.m(w) - target, lower, omega1, xtol=1e-15, rtol=1e-14)


def im_scaling_exponent(d: int, p: float) -> float:
    """Exponent γ in I_m = I_1 m^γ for k = 0 and p < 4/d"""
    if not 0 < p < 4.0 / d:
        raise UsageError(f"the I_m scaling law needs 0 < p < 4/d, got p={p}, d={d}")
    return (4.0 + (2.0 - d) * p) / (4.0 - d * p)


def sampled_slope_signs(curve: MassCurve, omegas=SLOPE_SAMPLES) -> List[Tuple[float, int]]:
    return [(float(w), int(np.sign(curve.m_prime(w)))) for w in omegas]


def classify_regime(params: ModelParams) -> RegimeReport:
    d, k, p, beta = params.d, params.k, params.p, params.beta
    pc = p_critical(d)
    _require_subcritical(d, p)
    focusing = params.focusing_threshold
    base = dict(d=d, k=k, p=p, beta=beta, p_critical=pc)

    at_focusing = math.isclose(p, focusing, rel_tol=1e-12)
    if k == 0:
        if p < focusing and not at_focusing:
            return RegimeReport(classification=RegimeLabel.SUBCRITICAL_ALL_STABLE, im_verdict="-inf < I_m < 0 for all m > 0",
                                im_finite=True, sampled_slope_signs=sampled_slope_signs(mass_curve(params)), **base)
        if at_focusing:
            m0 = 0.5 * profile_norms(d, p)["l2_sq"]
            return RegimeReport(classification=RegimeLabel.CRITICAL_K0, im_verdict="I_m = 0 for m <= m0, I_m = -inf for m > m0",
                                im_finite=None, m0=m0, **base)
        return RegimeReport(classification=RegimeLabel.SUPERCRITICAL_K0, im_verdict="I_m = -inf for all m > 0",
                            im_finite=False, **base)

    aniso = params.anisotropic_threshold
    if k < d and math.isclose(p, aniso, rel_tol=1e-12):
        return RegimeReport(classification=RegimeLabel.BOUNDARY_UNCOVERED, im_verdict="p = 4/(d-k) is not covered",
                            im_finite=None, **base)
    if p > aniso:
        return RegimeReport(classification=RegimeLabel.SUPERCRITICAL_K1, im_verdict="I_m = -inf for all m > 0",
                            im_finite=False, **base)

    curve = mass_curve(params)
    signs = sampled_slope_signs(curve)
    if p < focusing and not at_focusing:
        return RegimeReport(classification=RegimeLabel.SUBCRITICAL_ALL_STABLE, im_verdict="-inf < I_m < 0 for all m > 0",
                            im_finite=True, sampled_slope_signs=signs, **base)

    report = dict(
        classification=RegimeLabel.BAND_WITH_M0,
        im_verdict="I_m = 0 for m < m0, -inf < I_m < 0 for m > m0",
        im_finite=True,
        omega0=curve.omega0(),
        m1=curve.minimum(),
        sampled_slope_signs=signs,
    )
    if d == 1:
        thresholds = omega_thresholds(p, beta)
        if thresholds is not None:
            omega1, omega2 = thresholds
            report.update(omega1=omega1, omega2=omega2, omega3=omega3(p, beta), m0=curve.m(omega2))
        elif math.isclose(p, 4.0, rel_tol=1e-12):
            report.update(m0=curve.m(OMEGA_LIMIT))
    return RegimeReport(**report, **base)
