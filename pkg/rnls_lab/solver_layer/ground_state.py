"""Ground states: radial shooting for Q_{d,p} and the constrained minimization
of E on {M = m} by a normalized Sobolev gradient flow."""

import math
from typing import Optional, Tuple

import numpy as np
from scipy.integrate import simpson, solve_ivp
from scipy.interpolate import CubicSpline
from scipy.special import kve

from rnls_lab.core_layer.functionals import energy, grad_E_values, grad_M_values, mass
from rnls_lab.core_layer.grid import forward, inner_values, inverse, kappa_squared, mesh
from rnls_lab.errors import FlowDivergenceError, RegimeMisuseError, ShootingError, UsageError
from rnls_lab.models import Field, FlowOptions, GridSpec, MinimizerResult, ModelParams, RadialProfile
from rnls_lab.theory_layer.closed_forms import classify_regime, p_critical
from rnls_lab.utils.cache import cached
from rnls_lab.utils.logger import get_logger

log = get_logger("GroundState")

SPHERE_AREA = {1: 2.0, 2: 2.0 * math.pi, 3: 4.0 * math.pi}

# Relative agreement of the bracketing trajectories that marks reliable radii
MATCH_TOLERANCE = 1e-6
ODE_OPTIONS = dict(method="DOP853", rtol=1e-12, atol=1e-14)
# The tail spans many decades, so only the relative tolerance may act there
TAIL_OPTIONS = dict(method="DOP853", rtol=1e-12, atol=1e-300)


def _radial_rhs(d: int, p: float):
    def rhs(r, y):
        q, dq = y
        return [dq, -(d - 1) * dq / r + q - abs(q) ** p * q]
    return rhs


def _crosses_zero(r, y):
    return y[0]


_crosses_zero.terminal = True
_crosses_zero.direction = -1


def _turns_upward(r, y):
    return y[1]


_turns_upward.terminal = True
_turns_upward.direction = 1


def _series_start(d: int, p: float, a: float, r0: float) -> list:
    curvature = (a - a ** (p + 1.0)) / d
    return [a + 0.5 * curvature * r0 * r0, curvature * r0]


def _integrate(d: int, p: float, a: float, r_grid: np.ndarray):
    r0 = r_grid[1] * 1e-2
    return solve_ivp(_radial_rhs(d, p), (r0, r_grid[-1]), _series_start(d, p, a, r0),
                     t_eval=r_grid[1:], events=(_crosses_zero, _turns_upward), **ODE_OPTIONS)


def _overshoots(d: int, p: float, a: float, r_grid: np.ndarray) -> bool:
    """True when Q crosses zero; turning upward (or never deciding) is an undershoot"""
    sol = _integrate(d, p, a, r_grid)
    return sol.t_events[0].size > 0


def _bessel_tail(nu: float, r: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """r^{-ν} K_ν(r) and its derivative -r^{-ν} K_{ν+1}(r)"""
    r = np.asarray(r, dtype=float)
    scale = r ** (-nu) * np.exp(-r)
    return scale * kve(nu, r), -scale * kve(nu + 1.0, r)


def _backward_tail(d: int, p: float, r_tail: np.ndarray, q_match: float) -> Tuple[np.ndarray, np.ndarray, float]:
    """Decaying solution on [r_match, r_max], integrated inward from the Bessel tail.

    Inward integration damps the growing mode, so nonlinear corrections of
    the tail are resolved without amplifying shooting error. The tail
    constant is fixed by matching Q at r_match.
    """
    nu = 0.5 * (d - 2)
    r_match, r_max = r_tail[0], r_tail[-1]
    value, _ = _bessel_tail(nu, r_match)
    constant = q_match / float(value)
    rhs = _radial_rhs(d, p)
    for _ in range(8):
        tail, slope = _bessel_tail(nu, r_max)
        sol = solve_ivp(rhs, (r_max, r_match), [constant * float(tail), constant * float(slope)],
                        t_eval=r_tail[::-1], **TAIL_OPTIONS)
        if not sol.success:
            raise ShootingError(f"tail integration failed: {sol.message}")
        correction = q_match / sol.y[0][-1]
        constant *= correction
        if abs(correction - 1.0) < 1e-13:
            break
    return sol.y[0][::-1] * correction, sol.y[1][::-1] * correction, constant


@cached("ground_state")
def shoot_radial(d: int, p: float, tol: float = 1e-12, h_r: float = 1e-3, r_max: float = 30.0) -> RadialProfile:
    """Positive radial solution of Q'' + (d-1)Q'/r - Q + |Q|^p Q = 0 by bisection on Q(0)"""
    if d not in SPHERE_AREA:
        raise UsageError(f"radial shooting supports d in 1..3, got {d}")
    if not 0 < p < p_critical(d):
        raise UsageError(f"need 0 < p < p_c({d}), got p={p}")

    r_grid = np.arange(int(round(r_max / h_r)) + 1) * h_r
    lo, hi = 1.0, 10.0 * ((p + 2.0) / 2.0) ** (1.0 / p)
    if _overshoots(d, p, lo, r_grid) or not _overshoots(d, p, hi, r_grid):
        log.error(f"❌ No shooting bracket in [{lo}, {hi}] for d={d}, p={p}")
        raise ShootingError(f"no shooting bracket found in a in [{lo}, {hi:.6g}] for d={d}, p={p}")

    iterations = 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if _overshoots(d, p, mid, r_grid):
            hi = mid
        else:
            lo = mid
        iterations += 1

    low_sol, high_sol = _integrate(d, p, lo, r_grid), _integrate(d, p, hi, r_grid)
    count = min(low_sol.t.size, high_sol.t.size)
    q_lo, q_hi = low_sol.y[0][:count], high_sol.y[0][:count]
    q_mid = 0.5 * (q_lo + q_hi)
    reliable = (np.abs(q_hi - q_lo) <= MATCH_TOLERANCE * np.abs(q_mid)) & (q_lo > 0) & (q_hi > 0)
    bad = np.flatnonzero(~reliable)
    match_index = min((bad[0] if bad.size else count) - 1, r_grid.size - 12)
    if match_index < 1:
        raise ShootingError(f"bracketing trajectories disagree immediately (d={d}, p={p})")

    amplitude = 0.5 * (lo + hi)
    values = np.empty_like(r_grid)
    derivative = np.empty_like(r_grid)
    values[0], derivative[0] = amplitude, 0.0
    values[1:match_index + 2] = q_mid[:match_index + 1]
    derivative[1:match_index + 2] = 0.5 * (low_sol.y[1][:match_index + 1] + high_sol.y[1][:match_index + 1])

    start = match_index + 1
    tail_q, tail_dq, constant = _backward_tail(d, p, r_grid[start:], values[start])
    values[start:] = tail_q
    derivative[start:] = tail_dq

    if np.any(values <= 0) or np.any(np.diff(values[1:]) >= 0):
        raise ShootingError(f"shooting profile is not positive and decreasing (d={d}, p={p})")

    log.info(f"✅ Shooting d={d} p={p}: Q(0)={amplitude:.15g} after {iterations} bisections, "
             f"r_match={r_grid[start]:.3f}")
    return RadialProfile(d=d, p=p, h_r=h_r, r=r_grid, values=values, derivative=derivative,
                         amplitude=amplitude, decay=float(values[-1]), r_match=float(r_grid[start]),
                         tail_constant=constant)


def _spline(profile: RadialProfile) -> CubicSpline:
    if profile._spline is None:
        profile._spline = CubicSpline(profile.r, profile.values,
                                      bc_type=((1, 0.0), (1, float(profile.derivative[-1]))))
    return profile._spline


def evaluate_profile(profile: RadialProfile, radius: np.ndarray) -> np.ndarray:
    """Q at arbitrary radii: clamped cubic spline inside the table, Bessel tail outside"""
    radius = np.asarray(radius, dtype=float)
    flat = radius.ravel()
    out = np.empty_like(flat)
    inside = flat <= profile.r[-1]
    out[inside] = _spline(profile)(flat[inside])
    if np.any(~inside):
        tail, _ = _bessel_tail(0.5 * (profile.d - 2), flat[~inside])
        out[~inside] = profile.tail_constant * tail
    return out.reshape(radius.shape)


def radial_l2_sq(profile: RadialProfile) -> float:
    """|Q|_2^2 = |S^{d-1}| ∫ Q^2 r^{d-1} dr"""
    weight = profile.r ** (profile.d - 1)
    return SPHERE_AREA[profile.d] * float(simpson(profile.values ** 2 * weight, x=profile.r))


def estimate_omega(u: Field, p: float, beta: float = 1.0) -> float:
    """Lagrange multiplier readout ω̂ = -(E'(u), u)_2 / (2M(u))"""
    m = mass(u, beta)
    if m <= 0:
        raise UsageError("estimate_omega needs a nonzero field")
    return -inner_values(u.grid, grad_E_values(u.values, u.grid, p), u.values) / (2.0 * m)


def _initial_guess(grid: GridSpec, seed: int) -> np.ndarray:
    """Seeded Gaussian bump centered on a lattice point"""
    rng = np.random.default_rng(seed)
    bump = np.ones(grid.shape)
    for axis, coord in enumerate(mesh(grid)):
        n = grid.dims[axis]
        center = (n // 2 + int(rng.integers(-n // 16, n // 16 + 1))) % n
        x0 = -0.5 * grid.lengths[axis] + center * grid.spacing[axis]
        width = rng.uniform(1.0, 2.0)
        offset = (coord - x0 + 0.5 * grid.lengths[axis]) % grid.lengths[axis] - 0.5 * grid.lengths[axis]
        bump = bump * np.exp(-0.5 * (offset / width) ** 2)
    return bump.astype(np.complex128)


def _spread(grid: GridSpec, values: np.ndarray) -> float:
    """RMS distance of |u|^2 from its peak, periodic"""
    density = np.abs(values) ** 2
    peak = np.unravel_index(int(np.argmax(density)), grid.shape)
    total = float(np.sum(density))
    second = 0.0
    for axis, coord in enumerate(mesh(grid)):
        length = grid.lengths[axis]
        x0 = -0.5 * length + peak[axis] * grid.spacing[axis]
        offset = (coord - x0 + 0.5 * length) % length - 0.5 * length
        second += float(np.sum(offset ** 2 * density)) / total
    return math.sqrt(second)


def _stationarity(grid: GridSpec, u: np.ndarray, p: float,
                  beta: float) -> Tuple[np.ndarray, np.ndarray, float, float]:
    """E'(u), M'(u), the multiplier ω̂ and |E'(u) + ω̂ M'(u)|_2 / |u|_2"""
    g_e = grad_E_values(u, grid, p)
    g_m = grad_M_values(u, grid, beta)
    omega_est = -inner_values(grid, g_e, u) / inner_values(grid, g_m, u)
    r = g_e + omega_est * g_m
    return g_e, g_m, omega_est, math.sqrt(inner_values(grid, r, r) / inner_values(grid, u, u))


def minimize_Im(params: ModelParams, grid: GridSpec, m: float,
                flow_opts: Optional[FlowOptions] = None) -> MinimizerResult:
    """Approximate a minimizer of E on {M = m}.

    Each step moves along the Sobolev gradient of E projected on the tangent
    space of the constraint, then rescales back onto M = m.
    """
    opts = flow_opts or FlowOptions()
    if not m > 0:
        raise UsageError(f"constraint mass must be positive, got {m}")
    if (grid.d, grid.k) != (params.d, params.k):
        raise UsageError("grid and parameters disagree on (d, k)")
    regime = classify_regime(params)
    if not regime.admits_minimization(m):
        raise RegimeMisuseError(
            f"I_m is not finite for {regime.classification.value} (d={params.d}, k={params.k}, "
            f"p={params.p}, m={m}): {regime.im_verdict}"
        )

    p, beta = params.p, params.beta
    precondition = 1.0 / (1.0 + kappa_squared(grid))
    min_length = min(grid.lengths)

    def field(values):
        return Field(grid=grid, values=values)

    def rescale(values):
        return values * math.sqrt(m / mass(field(values), beta))

    u = rescale(_initial_guess(grid, opts.seed))
    e = energy(field(u), p)
    tau = opts.tau
    history = [e]
    status = "max_iterations"
    residual = math.inf
    omega_est = 0.0
    log.info(f"Flow start: d={params.d} k={params.k} p={p} beta={beta} m={m} seed={opts.seed}")

    iteration = 0
    for iteration in range(1, opts.max_iter + 1):
        g_e, g_m, omega_est, residual = _stationarity(grid, u, p, beta)
        if residual < opts.tol:
            status = "converged"
            break

        h_e = inverse(precondition * forward(g_e))
        h_m = inverse(precondition * forward(g_m))
        multiplier = -inner_values(grid, h_e, g_m) / inner_values(grid, h_m, g_m)
        direction = h_e + multiplier * h_m

        while True:
            candidate = rescale(u - tau * direction)
            e_new = energy(field(candidate), p)
            if e_new <= e + 1e-14 * abs(e):
                break
            tau *= 0.5
            if tau < 1e-10:
                status = "stalled"
                break
        if status == "stalled":
            break
        u, e = candidate, e_new
        tau = min(1.25 * tau, opts.tau)
        history.append(e)

        if e < opts.divergence_floor:
            log.error(f"❌ Flow diverged: E={e:.3e}")
            raise FlowDivergenceError(f"energy fell below {opts.divergence_floor:g}; I_m is likely -inf here")
        if iteration % opts.check_stride == 0 and _spread(grid, u) >= opts.vanish_spread * min_length:
            status = "infimum_not_attained"
            log.warning(f"⚠️ Minimizing sequence spreads out (E={e:.3e}); infimum not attained for m={m}")
            break

    minimizer = field(u)
    converged = status == "converged"
    if not converged:
        # residual of the returned iterate, not the one before the last step
        _, _, omega_est, residual = _stationarity(grid, u, p, beta)
    if converged:
        log.info(f"✅ Flow converged in {iteration} iterations: E={e:.12g}, omega_hat={omega_est:.12g}")
    elif status != "infimum_not_attained":
        log.warning(f"⚠️ Flow stopped ({status}) after {iteration} iterations, residual {residual:.3e}")
    return MinimizerResult(
        minimizer=minimizer,
        energy=e,
        mass=mass(minimizer, beta),
        constraint_residual=abs(mass(minimizer, beta) - m),
        omega_hat=estimate_omega(minimizer, p, beta),
        el_residual=residual,
        iterations=iteration,
        converged=converged,
        status=status,
        seed=opts.seed,
        energy_history=history,
    )
