"""Naive single-threaded reference for the grid kernels.

This is the oracle the optimized kernels are checked against: an unpadded
array-of-structures state walked cell by cell with plain scalar arithmetic.
It resolves boundaries inline while gathering (fluid neighbor: take its
value; solid neighbor: take the cell's own opposite-direction value, plus
the moving-wall correction), which is the same physics the production path
realizes by staging solid cells; both follow the shared per-cell operation
order, so results agree bit for bit.

A push-scheme variant (collide locally, scatter to neighbors) exists for
periodic domains only.  The pull scheme stores post-collision states and the
push scheme pre-collision ones, so the two follow the same trajectory when
the pull run starts from the collided initial state:

    run_pull(collide_grid(f0), N) == collide_grid(run_push(f0, N))

holds bit for bit, and the macroscopic moments of the two final states agree
directly because collision conserves them.
"""

from __future__ import annotations

import numpy as np

from .lattice import (
    Q,
    D3Q19,
    RelaxationParams,
    density_reduction,
    momentum_reduction,
    velocity_from,
    equilibrium_parts,
    relax_parts,
    lid_pull_coefficients,
)
from .storage import CellKind, FlagField


def _collide_cell(g, inv_tau):
    rho = density_reduction(g)
    mom = momentum_reduction(g)
    u = velocity_from(rho, mom)
    feq = equilibrium_parts(rho, u)
    return relax_parts(g, feq, inv_tau)


def step_pull(f: np.ndarray, flags: FlagField, params: RelaxationParams,
              model=D3Q19) -> np.ndarray:
    """One pull-scheme update of an (nz, ny, nx, Q) state; solid cells keep
    their previous values."""
    nz, ny, nx, _ = f.shape
    kinds = flags.kinds
    inv_tau = params.inv_tau(f.dtype)
    coefs = lid_pull_coefficients(flags.lid_velocity, f.dtype, model)
    vel = model.velocities
    opp = model.opposite
    out = f.copy()
    for z in range(nz):
        for y in range(ny):
            for x in range(nx):
                if kinds[z, y, x] != CellKind.FLUID:
                    continue
                g = [None] * Q
                rho_here = None
                for i in range(Q):
                    ex, ey, ez = vel[i]
                    sz, sy, sx = (z - ez) % nz, (y - ey) % ny, (x - ex) % nx
                    kind = kinds[sz, sy, sx]
                    if kind == CellKind.FLUID:
                        g[i] = f[sz, sy, sx, i]
                    elif kind == CellKind.NO_SLIP:
                        g[i] = f[z, y, x, opp[i]]
                    else:  # moving lid
                        if rho_here is None:
                            rho_here = density_reduction(f[z, y, x])
                        g[i] = f[z, y, x, opp[i]] + coefs[i] * rho_here
                out[z, y, x] = _collide_cell(g, inv_tau)
    return out


def step_push(f: np.ndarray, params: RelaxationParams, model=D3Q19) -> np.ndarray:
    """One push-scheme update on a fully periodic domain."""
    nz, ny, nx, _ = f.shape
    inv_tau = params.inv_tau(f.dtype)
    vel = model.velocities
    out = np.empty_like(f)
    for z in range(nz):
        for y in range(ny):
            for x in range(nx):
                post = _collide_cell(f[z, y, x], inv_tau)
                for i in range(Q):
                    ex, ey, ez = vel[i]
                    out[(z + ez) % nz, (y + ey) % ny, (x + ex) % nx, i] = post[i]
    return out


def collide_grid(f: np.ndarray, params: RelaxationParams) -> np.ndarray:
    """Apply the collision alone to every cell (used by the push/pull check)."""
    nz, ny, nx, _ = f.shape
    inv_tau = params.inv_tau(f.dtype)
    out = np.empty_like(f)
    for z in range(nz):
        for y in range(ny):
            for x in range(nx):
                out[z, y, x] = _collide_cell(f[z, y, x], inv_tau)
    return out


def run_pull(f0: np.ndarray, flags: FlagField, params: RelaxationParams,
             steps: int, model=D3Q19) -> np.ndarray:
    f = f0.copy()
    for _ in range(steps):
        f = step_pull(f, flags, params, model)
    return f


def run_push(f0: np.ndarray, params: RelaxationParams, steps: int,
             model=D3Q19) -> np.ndarray:
    f = f0.copy()
    for _ in range(steps):
        f = step_push(f, params, model)
    return f


def field_to_reference(field) -> np.ndarray:
    """Copy a PdfField's current state into the oracle's (nz, ny, nx, Q) shape."""
    return np.ascontiguousarray(np.moveaxis(field.values(), 0, -1))


def reference_to_values(f: np.ndarray) -> np.ndarray:
    """Back to the canonical (Q, nz, ny, nx) value order."""
    return np.ascontiguousarray(np.moveaxis(f, -1, 0))
