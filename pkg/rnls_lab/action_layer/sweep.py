"""Regime phase diagram over (d, k, p, β, ω) parameter points."""

import asyncio
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Dict, List, Tuple

import numpy as np
import pandas as pd
from pydantic import ValidationError

from rnls_lab.core_layer.grid import auto_grid
from rnls_lab.errors import RNLSError
from rnls_lab.models import EvolveConfig, ModelParams, PerturbSpec, SweepSpec
from rnls_lab.theory_layer.closed_forms import classify_regime, mass_curve
from rnls_lab.action_layer.stability import stability_experiment
from rnls_lab.utils.cache import clear_cache
from rnls_lab.utils.logger import get_logger

log = get_logger("Sweep")

Point = Tuple[int, int, float, float, float]

COLUMNS = [
    "d", "k", "p", "beta", "omega", "regime", "im_verdict", "m", "m_prime", "m_prime_sign", "E",
    "omega0", "omega1", "omega2", "omega3", "m0", "m1", "stable_non_ground_state",
    "verdict", "growth_ratio", "error",
]


def sweep_points(spec: SweepSpec) -> List[Point]:
    """Sorted parameter points; combinations with k > d are not points"""
    points = {
        (int(d), int(k), float(p), float(beta), float(omega))
        for d, k, p, beta, omega in itertools.product(spec.ds, spec.ks, spec.ps, spec.betas, spec.omegas)
        if 0 <= k <= d
    }
    return sorted(points)


def _optional(value: Any) -> float:
    return math.nan if value is None else float(value)


def evaluate_point(point: Point, spec: SweepSpec) -> Dict[str, Any]:
    """One phase-diagram row; failures land in the error column"""
    d, k, p, beta, omega = point
    row: Dict[str, Any] = {column: math.nan for column in COLUMNS}
    row.update(d=d, k=k, p=p, beta=beta, omega=omega, regime="", im_verdict="",
               stable_non_ground_state=False, verdict="", error="")
    try:
        params = ModelParams(d=d, k=k, p=p, beta=beta, omega=omega)
        report = classify_regime(params)
        curve = mass_curve(params)
        slope = float(curve.m_prime(omega))
        e = float(curve.energy(omega))
        row.update(
            regime=report.classification.value,
            im_verdict=report.im_verdict,
            m=float(curve.m(omega)),
            m_prime=slope,
            m_prime_sign=int(np.sign(slope)),
            E=e,
            omega0=_optional(report.omega0),
            omega1=_optional(report.omega1),
            omega2=_optional(report.omega2),
            omega3=_optional(report.omega3),
            m0=_optional(report.m0),
            m1=_optional(report.m1),
            stable_non_ground_state=bool(e > 0 and slope > 0),
        )
        if spec.experiments:
            grid = auto_grid(params, n=spec.n)
            verdict = stability_experiment(
                params,
                PerturbSpec(kind="bandlimited_noise", amplitude=spec.amplitude, seed=spec.seed),
                EvolveConfig(dt=spec.dt, T=spec.T),
                grid=grid,
                ratio_threshold=spec.ratio_threshold,
            )
            row.update(verdict=verdict.verdict, growth_ratio=verdict.growth_ratio)
    except (RNLSError, ValidationError, ValueError) as e:
        log.error(f"❌ Sweep point {point} failed: {e}")
        row["error"] = str(e).splitlines()[0]
    finally:
        if spec.experiments:
            # grid symbols and fields of one experiment are never reused by the next point
            clear_cache()
    return row


async def _evaluate_parallel(points: List[Point], spec: SweepSpec, jobs: int) -> List[Dict[str, Any]]:
    loop = asyncio.get_running_loop()
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        tasks = [loop.run_in_executor(pool, evaluate_point, point, spec) for point in points]
        return list(await asyncio.gather(*tasks))


def phase_diagram(spec: SweepSpec) -> pd.DataFrame:
    """Rows in sorted (d, k, p, β, ω) order regardless of jobs"""
    points = sweep_points(spec)
    log.info(f"Sweeping {len(points)} points with {spec.jobs} job(s)"
             f"{' and stability experiments' if spec.experiments else ''}")
    if spec.jobs > 1 and len(points) > 1:
        rows = asyncio.run(_evaluate_parallel(points, spec, min(spec.jobs, len(points))))
    else:
        rows = [evaluate_point(point, spec) for point in points]

    failed = sum(1 for row in rows if row["error"])
    if failed:
        log.warning(f"⚠️ {failed} of {len(rows)} sweep points failed")
    else:
        log.info(f"✅ Sweep finished: {len(rows)} points")
    return pd.DataFrame(rows, columns=COLUMNS)
