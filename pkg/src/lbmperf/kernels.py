"""Full-grid update kernels: fused pull stream-collide plus boundary staging.

Buffers hold post-collision states.  One update of cell x gathers the 19
post-collision values streamed toward x (the pull), computes moments and the
equilibrium, relaxes, and stores all 19 results at x.  Only fluid cells are
written by the fused kernel.

Solid-cell treatment runs as a separate kernel: after the fused pass it
writes into each solid cell the values that adjacent fluid cells will pull
from it next step, i.e. the fluid cell's own opposite-direction
post-collision value (half-way bounce-back), plus the moving-wall momentum
correction for lid cells.  This keeps the hot kernel free of boundary
branches.  ``prepare_boundaries`` performs the same staging on the initial
state so the first pull already sees reflected values.

Gathers wrap periodically; closed domains embed their solid shell so the
wrap never reaches fluid.  Parallel execution partitions cells into
contiguous z-slabs with disjoint writes, so per-cell results are identical
for any worker count.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .lattice import (
    Q,
    RelaxationParams,
    density_reduction,
    momentum_reduction,
    equilibrium_parts,
    relax_parts,
    lid_pull_coefficients,
    KERNEL_FLOPS_PER_CELL,
)
from .storage import FlagField, PdfField

__all__ = [
    "StepStats",
    "stream_collide_pull",
    "boundary_kernel",
    "prepare_boundaries",
    "timestep",
    "set_equilibrium",
    "KERNEL_FLOPS_PER_CELL",
]


@dataclass(frozen=True)
class StepStats:
    seconds: float
    cells_updated: int


def set_equilibrium(field: PdfField, rho=1.0, velocity=(0.0, 0.0, 0.0)) -> PdfField:
    """Initialize both buffers to the equilibrium of (rho, velocity)."""
    dt = field.dtype
    rho = dt.type(rho)
    vel = tuple(dt.type(c) for c in np.asarray(velocity, dtype=np.float64))
    feq = equilibrium_parts(rho, vel)
    for views in (field.src_direction_views(), field.dst_direction_views()):
        for i in range(Q):
            views[i][...] = feq[i]
    return field


def _axis_pieces(n: int, t0: int, t1: int, shift: int):
    """Slice pairs mapping target range [t0, t1) to source (t - shift) mod n."""
    pieces = []
    t = t0
    while t < t1:
        s = (t - shift) % n
        run = min(t1 - t, n - s)
        pieces.append((slice(t, t + run), slice(s, s + run)))
        t += run
    return pieces


def _pull_direction(out, src, e, z0, z1):
    """out[z0:z1] <- src shifted by +e with periodic wrap (the pull gather)."""
    nz, ny, nx = src.shape
    ex, ey, ez = (int(c) for c in e)
    for tz, sz in _axis_pieces(nz, z0, z1, ez):
        oz = slice(tz.start - z0, tz.stop - z0)
        for ty, sy in _axis_pieces(ny, 0, ny, ey):
            for tx, sx in _axis_pieces(nx, 0, nx, ex):
                out[oz, ty, tx] = src[sz, sy, sx]


def _slab_ranges(nz: int, workers: int):
    workers = max(1, min(workers, nz))
    bounds = np.linspace(0, nz, workers + 1, dtype=int)
    return [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def _update_slab(src_views, dst_views, fluid, inv_tau, velocities, z0, z1):
    g = [np.empty_like(dst_views[i][z0:z1]) for i in range(Q)]
    for i in range(Q):
        _pull_direction(g[i], src_views[i], velocities[i], z0, z1)

    rho = density_reduction(g)
    mx, my, mz = momentum_reduction(g)
    inv_rho = np.zeros_like(rho)
    np.divide(1.0, rho, out=inv_rho, where=rho != 0)
    u = (mx * inv_rho, my * inv_rho, mz * inv_rho)
    feq = equilibrium_parts(rho, u)
    out = relax_parts(g, feq, inv_tau)

    mask = fluid[z0:z1]
    if mask.all():
        for i in range(Q):
            dst_views[i][z0:z1] = out[i]
    else:
        for i in range(Q):
            np.copyto(dst_views[i][z0:z1], out[i], where=mask)


def stream_collide_pull(field: PdfField, flags: FlagField,
                        params: RelaxationParams, workers: int = 1) -> None:
    """Fused pull-scheme stream-collide over all fluid cells (src -> dst)."""
    if flags.dims != field.dims:
        raise ValueError(f"flag dims {flags.dims} != field dims {field.dims}")
    src_views = field.src_direction_views()
    dst_views = field.dst_direction_views()
    assert field.src is not field.dst
    fluid = flags.fluid_mask
    inv_tau = params.inv_tau(field.dtype)
    velocities = field.model.velocities
    slabs = _slab_ranges(field.dims[2], workers)
    if len(slabs) == 1:
        _update_slab(src_views, dst_views, fluid, inv_tau, velocities, *slabs[0])
        return
    with ThreadPoolExecutor(max_workers=len(slabs)) as pool:
        futures = [
            pool.submit(_update_slab, src_views, dst_views, fluid, inv_tau,
                        velocities, z0, z1)
            for z0, z1 in slabs
        ]
        for fut in futures:
            fut.result()


def _stage_views(views, flags: FlagField, dtype, model) -> None:
    """Write reflected (and lid-corrected) populations into solid cells."""
    plan = flags.staging_plan(model)
    if not plan:
        return
    opposite = model.opposite
    coefs = None
    for i, (bz, by, bx), (fz, fy, fx), is_lid in plan:
        donor = views[opposite[i]][fz, fy, fx]
        if is_lid:
            if coefs is None:
                coefs = lid_pull_coefficients(flags.lid_velocity, dtype, model)
            rho_wall = density_reduction([views[j][fz, fy, fx] for j in range(Q)])
            donor = donor + coefs[i] * rho_wall
        views[i][bz, by, bx] = donor


def boundary_kernel(field: PdfField, flags: FlagField, workers: int = 1) -> None:
    """Stage bounce-back values in dst's solid cells for the next pull."""
    _stage_views(field.dst_direction_views(), flags, field.dtype, field.model)


def prepare_boundaries(field: PdfField, flags: FlagField) -> None:
    """Stage the initial state's solid cells (run once before stepping)."""
    _stage_views(field.src_direction_views(), flags, field.dtype, field.model)


def timestep(field: PdfField, flags: FlagField, params: RelaxationParams,
             workers: int = 1) -> StepStats:
    """One full update: fused kernel, boundary kernel, buffer swap."""
    t0 = time.perf_counter()
    stream_collide_pull(field, flags, params, workers)
    boundary_kernel(field, flags, workers)
    field.swap_buffers()
    return StepStats(time.perf_counter() - t0, flags.fluid_count)
