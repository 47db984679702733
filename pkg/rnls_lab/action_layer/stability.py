"""Orbital distance to {e^{iθ}φ(· + y)}, perturbations of φ and the
perturb-evolve-measure stability experiment."""

import math
from typing import List, Optional

import numpy as np

from rnls_lab.core_layer.functionals import energy, mass
from rnls_lab.core_layer.grid import auto_grid, forward, inner_values, inverse, kappa_squared, norm, wavenumbers
from rnls_lab.errors import UsageError
from rnls_lab.models import (
    EvolveConfig,
    Field,
    GridSpec,
    ModelParams,
    OrbitalFit,
    PerturbSpec,
    StabilityVerdict,
)
from rnls_lab.solver_layer.evolution import evolve
from rnls_lab.solver_layer.spectra import LinearizedOperator, lowest_eigs
from rnls_lab.theory_layer.closed_forms import phi_profile
from rnls_lab.utils.logger import get_logger

log = get_logger("Stability")

DEFAULT_RATIO_THRESHOLD = 5.0


# Newton refinement of the lattice optimum
NEWTON_STEPS = 8


def _signed_index(index: int, n: int) -> int:
    return (index + n // 2) % n - n // 2


def _refine_shift(grid: GridSpec, spectrum: np.ndarray, start: np.ndarray) -> np.ndarray:
    """Maximize |c(s)|^2 near a lattice shift, c(s) = Σ X(κ) e^{iκ·s}.

    A step is kept only while it stays within one cell and raises |c|.
    """
    kappas = [np.broadcast_to(np.reshape(wavenumbers(grid, axis), [-1 if a == axis else 1 for a in range(grid.d)]),
                              grid.shape) for axis in range(grid.d)]
    spacing = np.asarray(grid.spacing)

    def moments(s):
        phase = spectrum * np.exp(1j * sum(k * x for k, x in zip(kappas, s)))
        c = phase.sum()
        first = np.array([(1j * k * phase).sum() for k in kappas])
        second = np.array([[-(ki * kj * phase).sum() for kj in kappas] for ki in kappas])
        return c, first, second

    shift = start.astype(float)
    c, first, second = moments(shift)
    for _ in range(NEWTON_STEPS):
        gradient = 2.0 * np.real(np.conj(c) * first)
        hessian = 2.0 * np.real(np.conj(first)[:, None] * first[None, :] + np.conj(c) * second)
        try:
            step = -np.linalg.solve(hessian, gradient)
        except np.linalg.LinAlgError:
            break
        candidate = shift + step
        if np.any(np.abs(candidate - start) > spacing) or not np.all(np.isfinite(step)):
            break
        c_new, first_new, second_new = moments(candidate)
        if abs(c_new) < abs(c):
            break
        shift, c, first, second = candidate, c_new, first_new, second_new
        if np.all(np.abs(step) <= 1e-15 * spacing):
            break
    return shift


def orbital_distance(u: Field, phi: Field) -> OrbitalFit:
    """H^1 distance from u to the orbit of φ over phases and shifts.

    c(s) = <u(· + s), φ>_{H^1} for every lattice shift s costs one inverse
    transform; the best phase for each s is -arg c(s). The lattice optimum
    is then polished to a continuous shift on the trigonometric interpolant.
    """
    grid = u.grid
    if phi.grid != grid:
        raise UsageError("orbital_distance needs u and phi on the same grid")
    u_hat = forward(u.values)
    spectrum = (1.0 + kappa_squared(grid)) * u_hat * np.conj(forward(phi.values))
    correlation = grid.cell_volume * inverse(spectrum)
    index = np.unravel_index(int(np.argmax(np.abs(correlation))), grid.shape)

    shift_index = tuple(_signed_index(int(j), n) for j, n in zip(index, grid.dims))
    lattice = np.array([j * h for j, h in zip(shift_index, grid.spacing)])
    shift = _refine_shift(grid, spectrum, lattice)

    phase = sum(_axis_phase(grid, axis, shift[axis]) for axis in range(grid.d))
    shifted = inverse(u_hat * np.exp(1j * phase))
    peak = grid.cell_volume / grid.npoints * np.sum(spectrum * np.exp(1j * phase))
    theta = float((-np.angle(peak)) % (2.0 * math.pi))
    aligned_values = np.exp(1j * theta) * shifted
    aligned = Field(grid=grid, values=aligned_values)

    return OrbitalFit(
        theta=theta,
        shift=tuple(float(s) for s in shift),
        shift_index=shift_index,
        aligned=aligned,
        distance=norm(aligned.with_values(aligned_values - phi.values), "H1"),
        candidate_distance=norm(u.with_values(u.values - phi.values), "H1"),
    )


def _axis_phase(grid: GridSpec, axis: int, shift: float) -> np.ndarray:
    shape = [1] * grid.d
    shape[axis] = grid.dims[axis]
    return (wavenumbers(grid, axis) * shift).reshape(shape)


def _bandlimited_noise(grid: GridSpec, seed: int) -> np.ndarray:
    """Complex Gaussian noise on the modes with |κ_j| <= κ_max,j / 4 on every axis"""
    rng = np.random.default_rng(seed)
    coeffs = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    keep = np.ones(grid.shape, dtype=bool)
    for axis in range(grid.d):
        kappa = np.abs(wavenumbers(grid, axis))
        shape = [1] * grid.d
        shape[axis] = grid.dims[axis]
        keep = keep & (kappa <= 0.25 * kappa.max()).reshape(shape)
    return inverse(coeffs * keep)


def perturb(phi: Field, kind: str, amplitude: float, seed: int = 0, params: Optional[ModelParams] = None,
            mode_index: int = 0) -> Field:
    """Perturbed initial state near φ.

    scale: (1 + amplitude)φ. bandlimited_noise and mode add a direction of
    H^1 size amplitude * |φ|_{H^1}; mode uses the mode_index-th lowest
    eigenfield of L1 and needs params.
    """
    spec = PerturbSpec(kind=kind, amplitude=amplitude, seed=seed, mode_index=mode_index)
    if spec.kind == "scale":
        return phi.with_values((1.0 + spec.amplitude) * phi.values)

    if spec.kind == "bandlimited_noise":
        direction = _bandlimited_noise(phi.grid, spec.seed)
    else:
        if params is None:
            raise UsageError("mode perturbations need the model parameters")
        op = LinearizedOperator("L1", Field(grid=phi.grid, values=phi.values.real), params)
        pairs = lowest_eigs(op, n_eigs=spec.mode_index + 1, seed=spec.seed)
        direction = pairs[spec.mode_index].field.values
    size = math.sqrt(inner_values(phi.grid, direction, direction, "H1"))
    scale = spec.amplitude * norm(phi, "H1") / size
    return phi.with_values(phi.values + scale * direction)


def stability_experiment(params: ModelParams, perturb_spec: PerturbSpec, evolve_cfg: EvolveConfig,
                         grid: Optional[GridSpec] = None,
                         ratio_threshold: float = DEFAULT_RATIO_THRESHOLD) -> StabilityVerdict:
    """Evolve a perturbed φ_ω and classify the orbital distance history"""
    grid = grid or auto_grid(params)
    phi = phi_profile(params, grid)
    u0 = perturb(phi, perturb_spec.kind, perturb_spec.amplitude, perturb_spec.seed, params, perturb_spec.mode_index)

    times: List[float] = []
    distances: List[float] = []
    masses: List[float] = []
    energies: List[float] = []

    def monitor(t: float, state: Field) -> None:
        times.append(t)
        distances.append(orbital_distance(state, phi).distance)
        masses.append(mass(state, params.beta))
        energies.append(energy(state, params.p))

    log.info(f"Stability run: d={params.d} k={params.k} p={params.p} beta={params.beta} "
             f"omega={params.omega} perturbation={perturb_spec.kind}@{perturb_spec.amplitude}")
    result = evolve(u0, evolve_cfg, params, monitor=monitor)

    initial = distances[0]
    largest = max(distances)
    growth = largest / initial if initial > 0 else math.inf
    if result.blowup:
        verdict = "blowup"
    elif largest <= ratio_threshold * initial:
        verdict = "bounded"
    else:
        verdict = "growing"
    log.info(f"✅ Verdict {verdict}: distance {initial:.3e} -> max {largest:.3e} (ratio {growth:.2f})")
    return StabilityVerdict(
        times=times,
        distances=distances,
        masses=masses,
        energies=energies,
        initial_distance=initial,
        max_distance=largest,
        growth_ratio=growth,
        ratio_threshold=ratio_threshold,
        verdict=verdict,
    )
