"""Integrating-factor RK4 time stepping for i(P_β u)_t + Δu + |u|^p u = 0.

In Fourier variables û_t = iAû + N(û) with A(κ) = -|κ|^2/(1+β|κ_y|^2) and
N(û) = i F(|u|^p u)/(1+β|κ_y|^2). The linear part is integrated exactly.
"""

import math
import time
from typing import Callable, Optional

import numpy as np

from rnls_lab.core_layer.functionals import energy, grad_sq, mass
from rnls_lab.core_layer.grid import dealias_mask, forward, inverse, kappa_squared, kappa_y_squared
from rnls_lab.errors import BlowUpError, UsageError
from rnls_lab.models import ConservationLog, EvolutionResult, EvolveConfig, Field, GridSpec, ModelParams
from rnls_lab.utils.logger import get_logger

log = get_logger("Evolution")

# Bound on dt * max|A(κ)|
STIFFNESS_LIMIT = 50.0

Monitor = Callable[[float, Field], None]


class IFRK4Integrator:
    """Integrating-factor RK4 on a periodic grid; state kept in Fourier space."""

    def __init__(self, grid: GridSpec, params: ModelParams, dt: float, dealias: bool = True,
                 blowup_threshold: float = 1e6):
        if (grid.d, grid.k) != (params.d, params.k):
            raise UsageError("grid and parameters disagree on (d, k)")
        self.grid = grid
        self.p = params.p
        self.dt = dt
        self.blowup_threshold = blowup_threshold

        pbeta = 1.0 + params.beta * kappa_y_squared(grid) if grid.k else np.ones(grid.shape)
        self.linear = -kappa_squared(grid) / pbeta
        stiffness = abs(dt) * float(np.max(np.abs(self.linear)))
        if stiffness > STIFFNESS_LIMIT:
            raise UsageError(f"dt*max|A| = {stiffness:.3g} exceeds {STIFFNESS_LIMIT:g}; reduce dt or refine less")
        # N(û) prefactor: i/(1+β|κ_y|^2), masked by the 2/3 rule when dealiasing
        self.nonlinear_factor = 1j / pbeta * (dealias_mask(grid) if dealias else 1.0)
        self.exp_half = np.exp(0.5j * dt * self.linear)
        self.exp_full = self.exp_half * self.exp_half

    def nonlinear(self, v: np.ndarray) -> np.ndarray:
        u = inverse(v)
        return self.nonlinear_factor * forward(np.abs(u) ** self.p * u)

    def step_fft(self, v: np.ndarray) -> np.ndarray:
        dt, e_half, e_full = self.dt, self.exp_half, self.exp_full
        n_a = self.nonlinear(v)
        n_b = self.nonlinear(e_half * (v + 0.5 * dt * n_a))
        n_c = self.nonlinear(e_half * v + 0.5 * dt * n_b)
        n_d = self.nonlinear(e_full * v + dt * e_half * n_c)
        return e_full * v + dt / 6.0 * (e_full * n_a + 2.0 * e_half * (n_b + n_c) + n_d)

    def check(self, v: np.ndarray, t: float, last_state: Field) -> np.ndarray:
        u = inverse(v)
        if not np.all(np.isfinite(u)) or float(np.max(np.abs(u))) > self.blowup_threshold:
            raise BlowUpError(f"solution blew up at t={t:.6g}", last_state=last_state, time=t)
        return u

    def forward_integrate(self, u: Field, n_steps: int = 1) -> Field:
        v = forward(u.values)
        state = u
        for s in range(n_steps):
            v = self.step_fft(v)
            state = Field(grid=self.grid, values=self.check(v, (s + 1) * abs(self.dt), state))
        return state


def step(u: Field, dt: float, params: ModelParams, dealias: bool = True) -> Field:
    """One integrating-factor RK4 step of size dt (negative dt runs backward)"""
    return IFRK4Integrator(u.grid, params, dt, dealias).forward_integrate(u)


def _record(conservation: ConservationLog, t: float, u: Field, params: ModelParams) -> None:
    conservation.append(
        t=t,
        mass=mass(u, params.beta),
        energy=energy(u, params.p),
        linf=float(np.max(np.abs(u.values))),
        grad_l2=math.sqrt(grad_sq(u)),
    )


def _relative_drift(series, reference: float) -> float:
    scale = abs(reference) if reference != 0 else 1.0
    return max(abs(x - reference) for x in series) / scale


def evolve(u0: Field, config: EvolveConfig, params: ModelParams,
           monitor: Optional[Monitor] = None) -> EvolutionResult:
    """Integrate u0 over config.T, logging conserved quantities every monitor stride.

    Blow-up does not raise: the result carries the flag, the last finite
    state and the log up to that point.
    """
    dt = -config.dt if config.reverse else config.dt
    integrator = IFRK4Integrator(u0.grid, params, dt, config.dealias, config.blowup_threshold)
    n_steps = config.n_steps
    conservation = ConservationLog()
    snapshots = []

    _record(conservation, 0.0, u0, params)
    if config.snapshot_stride:
        snapshots.append((0.0, u0))
    if monitor is not None:
        monitor(0.0, u0)

    log.info(f"Evolving {n_steps} steps of dt={dt:g} (d={params.d}, k={params.k}, p={params.p}, beta={params.beta})")
    started = time.perf_counter()
    v = forward(u0.values)
    state = u0
    blowup, blowup_time, taken = False, None, 0
    for index in range(1, n_steps + 1):
        elapsed = index * config.dt
        try:
            v = integrator.step_fft(v)
            state = Field(grid=u0.grid, values=integrator.check(v, elapsed, state))
        except BlowUpError as e:
            blowup, blowup_time = True, e.time
            log.warning(f"⚠️ Blow-up detected at t={e.time:.6g}; returning last finite state")
            break
        taken = index
        if index % config.monitor_stride == 0 or index == n_steps:
            _record(conservation, elapsed, state, params)
            if monitor is not None:
                monitor(elapsed, state)
        if config.snapshot_stride and index % config.snapshot_stride == 0:
            snapshots.append((elapsed, state))

    mass_drift = _relative_drift(conservation.mass, conservation.mass[0])
    energy_drift = _relative_drift(conservation.energy, conservation.energy[0])
    if not blowup:
        log.info(f"✅ Evolution done in {time.perf_counter() - started:.1f}s: "
                 f"mass drift {mass_drift:.2e}, energy drift {energy_drift:.2e}")
    return EvolutionResult(
        final=state,
        log=conservation,
        snapshots=snapshots,
        blowup=blowup,
        blowup_time=blowup_time,
        mass_drift=mass_drift,
        energy_drift=energy_drift,
        steps=taken,
    )
