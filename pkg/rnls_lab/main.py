"""Command-line entry point: one subcommand per lab operation, outputs plus a
run manifest under --out."""

import argparse
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import ValidationError

from rnls_lab import FORMAT_VERSION, __version__
from rnls_lab.action_layer.stability import stability_experiment
from rnls_lab.action_layer.sweep import phase_diagram
from rnls_lab.config import DEFAULT_POINTS, DEFAULTS, load_run_config
from rnls_lab.core_layer.functionals import functional_report
from rnls_lab.core_layer.grid import auto_grid, make_grid
from rnls_lab.errors import NumericalFailure, RNLSError, UsageError
from rnls_lab.models import (
    EvolveConfig,
    FlowOptions,
    GridSpec,
    ModelParams,
    PerturbSpec,
    RunManifest,
    RunSettings,
    SweepSpec,
)
from rnls_lab.solver_layer.evolution import evolve
from rnls_lab.solver_layer.ground_state import minimize_Im
from rnls_lab.solver_layer.spectra import LinearizedOperator, lowest_eigs, translation_rayleigh
from rnls_lab.store import read_field, write_csv, write_field, write_json
from rnls_lab.theory_layer.closed_forms import classify_regime, mass_curve, me_explicit_d1k1, omega_thresholds, phi_profile
from rnls_lab.utils.logger import get_logger, set_level

log = get_logger("CLI")

SUBCOMMANDS = ("groundstate", "masscurve", "classify", "me-explicit", "spectrum", "evolve", "stability", "sweep")


class Run:
    """Resolved settings plus the manifest every output is registered in"""

    def __init__(self, settings: RunSettings):
        self.settings = settings
        self.out = Path(settings.out)
        self.manifest = RunManifest(
            subcommand=settings.subcommand,
            parameters=settings.model_dump(),
            seeds=[settings.seed],
            tool_version=__version__,
            format_version=FORMAT_VERSION,
            started_at=datetime.now(timezone.utc).isoformat(),
        )

    def path(self, name: str) -> Path:
        self.manifest.outputs.append(name)
        return self.out / name

    def use_grid(self, grid: GridSpec) -> GridSpec:
        self.manifest.grid = grid.model_dump()
        return grid

    def finish(self, status: str = "ok", error: Optional[str] = None) -> None:
        self.manifest.finished_at = datetime.now(timezone.utc).isoformat()
        self.manifest.status = status
        self.manifest.error = error
        write_json(self.manifest, self.out / "manifest.json")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="flat key=value file; command-line flags override it")
    common.add_argument("--d", type=int, help="spatial dimension")
    common.add_argument("--k", type=int, help="number of regularized directions")
    common.add_argument("--p", type=float, help="nonlinearity exponent")
    common.add_argument("--beta", type=float, help="regularization strength")
    common.add_argument("--omega", type=float, help="frequency of the bound state")
    common.add_argument("--m", type=float, help="constraint mass for the flow minimizer")
    common.add_argument("--n", type=int, help="points per axis")
    common.add_argument("--L", type=float, help="box length per axis (auto from omega if omitted)")
    common.add_argument("--dt", type=float, help="time step")
    common.add_argument("--T", type=float, help="time horizon")
    common.add_argument("--seed", type=int, help="random seed")
    common.add_argument("--out", help="output directory")
    common.add_argument("--log-level", dest="log_level", help="DEBUG, INFO, WARNING or ERROR")
    common.add_argument("--method", choices=["shoot", "flow"], help="ground state construction")
    common.add_argument("--op", choices=["L1", "L2"], help="linearized operator")
    common.add_argument("--neigs", type=int, help="number of eigenpairs")
    common.add_argument("--perturb", choices=["scale", "bandlimited_noise", "mode"], help="perturbation kind")
    common.add_argument("--amplitude", type=float, help="perturbation amplitude")
    common.add_argument("--input", help="RNLS1 snapshot to evolve")
    common.add_argument("--snapshot-stride", dest="snapshot_stride", type=int, help="steps between snapshots")
    common.add_argument("--omega-min", dest="omega_min", type=float, help="lower end of the omega range")
    common.add_argument("--omega-max", dest="omega_max", type=float, help="upper end of the omega range")
    common.add_argument("--num", type=int, help="number of omega samples")
    common.add_argument("--ds", help="comma-separated sweep dimensions")
    common.add_argument("--ks", help="comma-separated sweep k values")
    common.add_argument("--ps", help="comma-separated sweep exponents")
    common.add_argument("--betas", help="comma-separated sweep betas")
    common.add_argument("--omegas", help="comma-separated sweep frequencies")
    common.add_argument("--experiments", action="store_true", help="run stability experiments per sweep point")
    common.add_argument("--jobs", type=int, help="parallel sweep workers")

    parser = argparse.ArgumentParser(prog="rnls-lab", description="Partially regularized NLS numerical lab")
    parser.add_argument("--version", action="version",
                        version=f"rnls-lab {__version__} (snapshot format {FORMAT_VERSION})")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def resolve_settings(args: argparse.Namespace) -> RunSettings:
    """defaults < config file < command line"""
    flags = vars(args)
    from_file = load_run_config(flags.pop("config", None))
    unknown = sorted(set(from_file) - set(RunSettings.model_fields))
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    merged: Dict[str, Any] = dict(DEFAULTS)
    merged.update(from_file)
    merged.update(flags)
    return RunSettings(**merged)


def _params(settings: RunSettings, with_m: bool = False) -> ModelParams:
    return ModelParams(d=settings.d, k=settings.k, p=settings.p, beta=settings.beta,
                       omega=settings.omega, m=settings.m if with_m else None)


def _grid(settings: RunSettings, params: ModelParams) -> GridSpec:
    if settings.L is None:
        return auto_grid(params, n=settings.n)
    n = settings.n or DEFAULT_POINTS[params.d]
    return make_grid(params.d, params.k, [n] * params.d, [settings.L] * params.d)


def _omega_range(settings: RunSettings) -> np.ndarray:
    if not 0 < settings.omega_min < settings.omega_max:
        raise UsageError(f"need 0 < omega-min < omega-max, got {settings.omega_min}, {settings.omega_max}")
    return np.linspace(settings.omega_min, settings.omega_max, settings.num)


def cmd_groundstate(run: Run) -> None:
    s = run.settings
    if s.method == "flow":
        if s.m is None:
            raise UsageError("groundstate --method flow needs --m")
        params = _params(s, with_m=True)
        grid = run.use_grid(_grid(s, params))
        result = minimize_Im(params, grid, s.m, FlowOptions(seed=s.seed))
        write_field(result.minimizer, run.path("groundstate.rnls"))
        write_json(result.sidecar(params, s.m), run.path("groundstate.json"))
        return

    params = _params(s)
    grid = run.use_grid(_grid(s, params))
    phi = phi_profile(params, grid)
    write_field(phi, run.path("groundstate.rnls"))
    write_json({"params": params.model_dump(), "report": functional_report(phi, s.p, s.beta, s.omega)},
               run.path("groundstate.json"))


def cmd_masscurve(run: Run) -> None:
    curve = mass_curve(_params(run.settings))
    write_csv(curve.table(_omega_range(run.settings)), run.path("masscurve.csv"))


def cmd_classify(run: Run) -> None:
    write_json(classify_regime(_params(run.settings)), run.path("classify.json"))


def cmd_me_explicit(run: Run) -> None:
    s = run.settings
    omegas = _omega_range(s)
    rows = [me_explicit_d1k1(s.p, s.beta, w) for w in omegas]
    frame = pd.DataFrame({"omega": omegas, "M": [r[0] for r in rows], "E": [r[1] for r in rows]})
    write_csv(frame, run.path("me_explicit.csv"))
    thresholds = omega_thresholds(s.p, s.beta)
    write_json({"p": s.p, "beta": s.beta,
                "omega1": thresholds[0] if thresholds else None,
                "omega2": thresholds[1] if thresholds else None},
               run.path("me_explicit.json"))


def cmd_spectrum(run: Run) -> None:
    s = run.settings
    params = _params(s)
    grid = run.use_grid(_grid(s, params))
    op = LinearizedOperator(s.op, phi_profile(params, grid), params)
    pairs = lowest_eigs(op, n_eigs=s.neigs, seed=s.seed)
    frame = pd.DataFrame({
        "index": list(range(len(pairs))),
        "lambda": [pair.value for pair in pairs],
        "residual": [pair.residual for pair in pairs],
    })
    write_csv(frame, run.path("spectrum.csv"))
    write_json({
        "operator": s.op,
        "scale": op.scale,
        "negative_count": sum(1 for pair in pairs if pair.value < -1e-6 * op.scale),
        "translation_rayleigh": translation_rayleigh(op),
    }, run.path("spectrum.json"))


def cmd_evolve(run: Run) -> None:
    s = run.settings
    params = _params(s)
    if s.input:
        u0 = read_field(s.input)
        if (u0.grid.d, u0.grid.k) != (s.d, s.k):
            raise UsageError(f"{s.input} holds a (d, k) = ({u0.grid.d}, {u0.grid.k}) field, expected ({s.d}, {s.k})")
    else:
        u0 = phi_profile(params, _grid(s, params))
    run.use_grid(u0.grid)
    result = evolve(u0, EvolveConfig(dt=s.dt, T=s.T, snapshot_stride=s.snapshot_stride), params)
    write_csv(result.log.to_frame(), run.path("conservation.csv"))
    for index, (_, snapshot) in enumerate(result.snapshots):
        write_field(snapshot, run.path(f"snap_{index:06}.rnls"))
    write_field(result.final, run.path("final.rnls"))
    if result.blowup:
        raise NumericalFailure(f"solution blew up at t={result.blowup_time:.6g}; outputs hold the last finite state")


def cmd_stability(run: Run) -> None:
    s = run.settings
    params = _params(s)
    grid = run.use_grid(_grid(s, params))
    verdict = stability_experiment(params, PerturbSpec(kind=s.perturb, amplitude=s.amplitude, seed=s.seed),
                                   EvolveConfig(dt=s.dt, T=s.T), grid=grid)
    write_csv(verdict.to_frame(), run.path("stability.csv"))
    write_json(verdict.model_dump(exclude={"times", "distances", "masses", "energies"}),
               run.path("stability.json"))


def cmd_sweep(run: Run) -> None:
    s = run.settings
    spec = SweepSpec(ds=s.ds, ks=s.ks, ps=s.ps, betas=s.betas, omegas=s.omegas, experiments=s.experiments,
                     n=s.n, T=s.T, dt=s.dt, amplitude=s.amplitude, seed=s.seed, jobs=s.jobs)
    write_csv(phase_diagram(spec), run.path("sweep.csv"))


HANDLERS: Dict[str, Callable[[Run], None]] = {
    "groundstate": cmd_groundstate,
    "masscurve": cmd_masscurve,
    "classify": cmd_classify,
    "me-explicit": cmd_me_explicit,
    "spectrum": cmd_spectrum,
    "evolve": cmd_evolve,
    "stability": cmd_stability,
    "sweep": cmd_sweep,
}


def _record_usage_error(args: argparse.Namespace, lab_run: Optional[Run], error: str) -> None:
    """Usage errors still leave a manifest, from the raw flags when settings never resolved"""
    if lab_run is not None:
        lab_run.finish("usage_error", error)
        return
    flags = {key: value for key, value in vars(args).items() if key != "subcommand"}
    now = datetime.now(timezone.utc).isoformat()
    manifest = RunManifest(
        subcommand=args.subcommand,
        parameters=flags,
        tool_version=__version__,
        format_version=FORMAT_VERSION,
        started_at=now,
        finished_at=now,
        status="usage_error",
        error=error,
    )
    try:
        write_json(manifest, Path(str(flags.get("out", DEFAULTS["out"]))) / "manifest.json")
    except OSError as e:
        log.warning(f"⚠️ Could not write manifest: {e}")


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Exit codes: 0 success, 2 usage error, 3 numerical failure"""
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    lab_run: Optional[Run] = None
    try:
        settings = resolve_settings(args)
        set_level(settings.log_level)
        lab_run = Run(settings)
        log.info(f"Running {settings.subcommand} -> {lab_run.out}")
        HANDLERS[settings.subcommand](lab_run)
        lab_run.finish()
        log.info(f"✅ {settings.subcommand} wrote {len(lab_run.manifest.outputs)} file(s)")
        return 0
    except NumericalFailure as e:
        log.error(f"❌ Numerical failure: {e}")
        if lab_run is not None:
            lab_run.finish("numerical_failure", str(e))
        return 3
    except (UsageError, ValidationError, ValueError, FileNotFoundError) as e:
        log.error(f"❌ Usage error: {e}")
        _record_usage_error(args, lab_run, str(e))
        return 2
    except RNLSError as e:
        log.error(f"❌ {e}")
        _record_usage_error(args, lab_run, str(e))
        return 2


def main(argv: Optional[List[str]] = None) -> None:
    raise SystemExit(run(argv))


if __name__ == "__main__":
    main()
