"""End-to-end physics cases: lid-driven cavity and uniform-flow fixed point.

The cavity is the verification workhorse: a cubic box, five no-slip walls
and a moving top lid, started from the cold equilibrium state.  Acceptance
rests on fixed points, symmetry, conservation and frozen self-fixtures, not
on external reference profiles.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from .lattice import (
    D3Q19,
    RelaxationParams,
    density_reduction,
    momentum_reduction,
    velocity_from,
)
from .kernels import prepare_boundaries, set_equilibrium, timestep
from .storage import FlagField, Layout, PdfField

RHO_MIN, RHO_MAX = 0.5, 2.0


class SimulationDiverged(RuntimeError):
    def __init__(self, step: int, reason: str, rho_min=None, rho_max=None):
        self.step = step
        self.reason = reason
        self.rho_min = rho_min
        self.rho_max = rho_max
        detail = f" (rho range [{rho_min:.4g}, {rho_max:.4g}])" if rho_min is not None else ""
        super().__init__(f"diverged at step {step}: {reason}{detail}")


def macroscopic_fields(field_: PdfField, flags: FlagField):
    """Density and velocity of the current state; zero outside fluid."""
    views = field_.src_direction_views()
    rho = density_reduction(views)
    mom = momentum_reduction(views)
    ux, uy, uz = velocity_from(rho, mom)
    fluid = flags.fluid_mask
    rho = np.where(fluid, rho, 0.0)
    vel = np.stack([np.where(fluid, c, 0.0) for c in (ux, uy, uz)])
    return rho, vel


def total_mass(field_: PdfField, flags: FlagField) -> float:
    views = field_.src_direction_views()
    return float(density_reduction(views)[flags.fluid_mask].sum())


def check_divergence(field_: PdfField, flags: FlagField, step: int) -> None:
    """Abort on NaN or density outside the plausible band."""
    views = field_.src_direction_views()
    rho = density_reduction(views)[flags.fluid_mask]
    if rho.size == 0:
        return
    if not np.isfinite(rho).all():
        raise SimulationDiverged(step, "non-finite density in fluid cells")
    lo, hi = float(rho.min()), float(rho.max())
    if lo < RHO_MIN or hi > RHO_MAX:
        raise SimulationDiverged(step, "density left the stable band", lo, hi)


@dataclass
class CavityResult:
    dims: tuple
    u_lid: tuple
    tau: float
    steps_run: int
    velocity: np.ndarray                 # (3, nz, ny, nx), zero at solids
    density: np.ndarray                  # (nz, ny, nx), zero at solids
    mass_series: list = field(default_factory=list)      # (step, total mass)
    residual_series: list = field(default_factory=list)  # (step, max |du|)
    elapsed_seconds: float = 0.0
    converged_step: int | None = None
    checksum: str = ""


def lid_driven_cavity(n: int, u_lid=(0.05, 0.0, 0.0), tau: float = 0.6,
                      steps: int = 100, layout: Layout = Layout(),
                      workers: int = 1, residual_interval: int = 10,
                      check_interval: int = 10, stop_residual: float | None = None,
                      model=D3Q19) -> CavityResult:
    """Run the cubic lid-driven cavity and collect convergence diagnostics.

    The residual r(t) is the largest per-cell velocity change between
    consecutive samples taken every ``residual_interval`` steps.  When
    ``stop_residual`` is given the run ends early once r falls below it.
    """
    if n < 8:
        raise ValueError(f"cavity edge must be at least 8 cells, got {n}")
    u_lid = np.asarray(u_lid, dtype=np.float64)
    if np.linalg.norm(u_lid) > 0.1:
        raise ValueError("lid speed must stay at or below 0.1 lattice units")
    params = RelaxationParams(tau)

    flags = FlagField.cavity((n, n, n), u_lid)
    field_ = set_equilibrium(PdfField((n, n, n), layout, model))
    prepare_boundaries(field_, flags)

    result = CavityResult(dims=(n, n, n), u_lid=tuple(u_lid), tau=tau,
                          steps_run=0, velocity=None, density=None)
    result.mass_series.append((0, total_mass(field_, flags)))
    prev_vel = macroscopic_fields(field_, flags)[1]

    t0 = time.perf_counter()
    for step in range(1, steps + 1):
        timestep(field_, flags, params, workers)
        result.steps_run = step
        if check_interval and step % check_interval == 0:
            check_divergence(field_, flags, step)
        if residual_interval and step % residual_interval == 0:
            rho, vel = macroscopic_fields(field_, flags)
            r = float(np.abs(vel - prev_vel).max())
            prev_vel = vel
            result.mass_series.append((step, total_mass(field_, flags)))
            result.residual_series.append((step, r))
            if stop_residual is not None and r < stop_residual:
                result.converged_step = step
                break
    result.elapsed_seconds = time.perf_counter() - t0

    check_divergence(field_, flags, result.steps_run)
    result.density, result.velocity = macroscopic_fields(field_, flags)
    result.checksum = field_.checksum()
    return result


def periodic_uniform_flow(n: int, u0=(0.0, 0.0, 0.0), tau: float = 0.6,
                          steps: int = 100, layout: Layout = Layout(),
                          workers: int = 1, model=D3Q19) -> float:
    """Largest per-PDF deviation from the uniform equilibrium after stepping.

    A fully periodic domain initialized at equilibrium(rho=1, u0) is a fixed
    point of the update; the return value measures how far the state drifted.
    """
    u0 = np.asarray(u0, dtype=np.float64)
    if np.linalg.norm(u0) > 0.1:
        raise ValueError("bulk speed must stay at or below 0.1 lattice units")
    params = RelaxationParams(tau)
    flags = FlagField.all_fluid((n, n, n))
    field_ = set_equilibrium(PdfField((n, n, n), layout, model), 1.0, u0)
    reference = field_.values()
    for step in range(1, steps + 1):
        timestep(field_, flags, params, workers)
        if step % 20 == 0:
            check_divergence(field_, flags, step)
    return float(np.abs(field_.values() - reference).max())


def write_summary_csv(path, rows) -> None:
    """Summary series as (step, mass, residual, mlups) rows."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("step", "mass", "residual", "mlups"))
        for row in rows:
            writer.writerow(row)


def domain_sweep(edges, steps: int = 20, layouts=None, tau: float = 0.6,
                 u_lid=(0.05, 0.0, 0.0), workers: int = 1, warmup: int = 5):
    """Timed cavity runs over cubic edge sizes and layout variants.

    Yields one dict per (edge, layout) with the measured MLUPS and the field
    checksum, the raw material for performance-versus-size charts.  The
    default edge schedule elsewhere in the toolkit is 16..200 step 8.
    """
    from .report import make_run_report  # local import to keep deps one-way

    if layouts is None:
        layouts = [Layout()]
    rows = []
    for n in edges:
        for layout in layouts:
            params = RelaxationParams(tau)
            flags = FlagField.cavity((n, n, n), u_lid)
            field_ = set_equilibrium(PdfField((n, n, n), layout))
            prepare_boundaries(field_, flags)
            for _ in range(warmup):
                timestep(field_, flags, params, workers)
            t0 = time.perf_counter()
            for _ in range(steps):
                timestep(field_, flags, params, workers)
            elapsed = time.perf_counter() - t0
            check_divergence(field_, flags, warmup + steps)
            report = make_run_report(
                config={"edge": n, "scheme": layout.scheme.value,
                        "alignment_bytes": layout.alignment_bytes,
                        "value_bytes": layout.value_bytes,
                        "tau": tau, "steps": steps, "workers": workers},
                elapsed_seconds=elapsed, steps=steps,
                fluid_cells=flags.fluid_count, checksum=field_.checksum())
            rows.append(report)
    return rows
