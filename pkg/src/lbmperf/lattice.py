"""D3Q19 discrete-velocity model and the local cell physics.

The stencil uses a fixed canonical ordering: the rest direction first, then
the 6 axis directions in lexicographic order of their vectors, then the 12
diagonal directions in lexicographic order.  With that ordering the opposite
of direction ``i`` within each shell is the shell's mirror element, so
``OPPOSITE`` reads off directly.

All per-cell arithmetic (moment reductions, equilibrium, BGK relaxation) is
defined here with one fixed operation order.  The grid kernels apply these
functions to whole arrays and the naive reference applies them to scalars,
so the two produce bit-identical results.  The moment reductions combine
opposite directions first: this makes the first moment vanish exactly at
parity-symmetric states, and the paired tree sum of the weights is exactly
1.0 in both float32 and float64, which keeps uniform equilibrium an exact
fixed point of the update.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

Q = 19

_VELOCITY_TABLE = (
    (0, 0, 0),
    # axis directions, lexicographic
    (-1, 0, 0), (0, -1, 0), (0, 0, -1), (0, 0, 1), (0, 1, 0), (1, 0, 0),
    # diagonal directions, lexicographic
    (-1, -1, 0), (-1, 0, -1), (-1, 0, 1), (-1, 1, 0),
    (0, -1, -1), (0, -1, 1), (0, 1, -1), (0, 1, 1),
    (1, -1, 0), (1, 0, -1), (1, 0, 1), (1, 1, 0),
)

_WEIGHT_TABLE = (Fraction(1, 3),) + (Fraction(1, 18),) * 6 + (Fraction(1, 36),) * 12

# Negation reverses lexicographic order inside each shell.
_OPPOSITE_TABLE = (0, 6, 5, 4, 3, 2, 1, 18, 17, 16, 15, 14, 13, 12, 11, 10, 9, 8, 7)

# Opposite-direction pairs (low index, high index); the high member is the one
# whose leading nonzero velocity component is +1.
PAIRS = ((1, 6), (2, 5), (3, 4), (7, 18), (8, 17), (9, 16),
         (10, 15), (11, 14), (12, 13))


@dataclass(frozen=True, eq=False)
class LatticeModel:
    """Discrete velocity set: vectors, weights and the opposite-direction map."""

    velocities: np.ndarray  # (Q, 3) int
    weights: np.ndarray     # (Q,) float64
    opposite: np.ndarray    # (Q,) int

    @classmethod
    def d3q19(cls) -> "LatticeModel":
        return cls(
            velocities=np.array(_VELOCITY_TABLE, dtype=np.int64),
            weights=np.array([float(w) for w in _WEIGHT_TABLE]),
            opposite=np.array(_OPPOSITE_TABLE, dtype=np.int64),
        )

    @staticmethod
    def exact_weights() -> tuple[Fraction, ...]:
        """The weights as exact rationals (for invariant checking)."""
        return _WEIGHT_TABLE

    def weights_as(self, dtype) -> np.ndarray:
        return self.weights.astype(dtype)


D3Q19 = LatticeModel.d3q19()


def validate_model(model: LatticeModel) -> list[str]:
    """Return a list of violated stencil invariants (empty when sound)."""
    problems = []
    e = model.velocities
    w = model.weights
    opp = model.opposite
    if abs(w.sum() - 1.0) > 1e-14:
        problems.append("weight-normalization: sum(w) != 1")
    if np.abs(e.T @ w).max() > 1e-15:
        problems.append("first-moment-balance: sum(w*e) != 0")
    if not np.array_equal(opp[opp], np.arange(Q)):
        problems.append("opposite-involution: opposite[opposite[i]] != i")
    if not np.array_equal(e[opp], -e):
        problems.append("opposite-direction: e[opposite[i]] != -e[i]")
    sq = (e * e).sum(axis=1)
    counts = {k: int((sq == k).sum()) for k in (0, 1, 2)}
    if counts != {0: 1, 1: 6, 2: 12}:
        problems.append("shell-structure: |e|^2 counts differ from (1, 6, 12)")
    rest = np.flatnonzero(sq == 0)
    if len(rest) != 1 or opp[rest[0]] != rest[0]:
        problems.append("rest-direction: rest must be unique and self-opposite")
    if np.abs(w - w[opp]).max() != 0.0:
        problems.append("weight-symmetry: w[i] != w[opposite[i]]")
    return problems


@dataclass(frozen=True)
class Macroscopics:
    """First moments of a distribution: density, momentum and velocity.

    ``momentum`` is the bare first moment; ``velocity`` is momentum divided
    by density (zero where the density vanishes).
    """

    rho: object
    momentum: np.ndarray
    velocity: np.ndarray


@dataclass(frozen=True)
class RelaxationParams:
    """Single-relaxation-time parameter; tau > 0.5 for linear stability."""

    tau: float = 0.6

    def __post_init__(self):
        if not self.tau > 0.5:
            raise ValueError(f"tau must exceed 0.5, got {self.tau}")

    def inv_tau(self, dtype) -> object:
        """1/tau, computed in double precision and cast to the run dtype."""
        return np.dtype(dtype).type(1.0 / self.tau)


def density_reduction(f):
    """Density via opposite-pair sums and a fixed halving tree.

    Works elementwise on scalars or arrays.  At parity-symmetric states every
    pair sum is an exact doubling, and the tree sum of the D3Q19 weights is
    exactly 1.0 in both supported precisions.
    """
    p0 = f[0]
    p1 = f[1] + f[6]
    p2 = f[2] + f[5]
    p3 = f[3] + f[4]
    p4 = f[7] + f[18]
    p5 = f[8] + f[17]
    p6 = f[9] + f[16]
    p7 = f[10] + f[15]
    p8 = f[11] + f[14]
    p9 = f[12] + f[13]
    return (((p0 + p1) + (p2 + p3)) + ((p4 + p5) + (p6 + p7))) + (p8 + p9)


def momentum_reduction(f):
    """First moment via opposite-pair differences (exactly zero at rest).

    Each difference is taken along the pair's positive direction, so the
    component sums below carry the signs of the high member's velocity.
    """
    d16 = f[6] - f[1]    # (1, 0, 0)
    d25 = f[5] - f[2]    # (0, 1, 0)
    d34 = f[4] - f[3]    # (0, 0, 1)
    d7 = f[18] - f[7]    # (1, 1, 0)
    d8 = f[17] - f[8]    # (1, 0, 1)
    d9 = f[16] - f[9]    # (1, 0, -1)
    d10 = f[15] - f[10]  # (1, -1, 0)
    d11 = f[14] - f[11]  # (0, 1, 1)
    d12 = f[13] - f[12]  # (0, 1, -1)
    mx = ((d16 + d7) + (d8 + d9)) + d10
    my = ((d25 + d7) - d10) + (d11 + d12)
    mz = ((d34 + d8) - d9) + (d11 - d12)
    return mx, my, mz


def equilibrium_parts(rho, velocity):
    """Second-order equilibrium, returned as a list of 19 entries.

    ``rho`` and the three velocity components may be scalars or arrays.  The
    classic form w_i * rho * (1 + 3 e.u + 4.5 (e.u)^2 - 1.5 u.u) is evaluated
    pairwise so that opposite directions share the quadratic term.
    """
    ux, uy, uz = velocity[0], velocity[1], velocity[2]
    dt = np.result_type(rho, ux)
    w_rest = dt.type(float(_WEIGHT_TABLE[0]))
    w_axis = dt.type(float(_WEIGHT_TABLE[1]))
    w_diag = dt.type(float(_WEIGHT_TABLE[7]))

    usq = (ux * ux + uy * uy) + uz * uz
    omusq = 1.0 - 1.5 * usq
    wr_rest = w_rest * rho
    wr_axis = w_axis * rho
    wr_diag = w_diag * rho

    feq = [None] * Q
    feq[0] = wr_rest * omusq
    # axis pairs: (1,6)=x, (2,5)=y, (3,4)=z
    for (lo, hi), eu in (((1, 6), ux), ((2, 5), uy), ((3, 4), uz)):
        cu = 3.0 * eu
        c2 = 4.5 * (eu * eu)
        feq[hi] = wr_axis * ((omusq + cu) + c2)
        feq[lo] = wr_axis * ((omusq - cu) + c2)
    # diagonal pairs, eu taken along the high member's direction
    for (lo, hi), eu in (
        ((7, 18), ux + uy),
        ((8, 17), ux + uz),
        ((9, 16), ux - uz),
        ((10, 15), ux - uy),
        ((11, 14), uy + uz),
        ((12, 13), uy - uz),
    ):
        cu = 3.0 * eu
        c2 = 4.5 * (eu * eu)
        feq[hi] = wr_diag * ((omusq + cu) + c2)
        feq[lo] = wr_diag * ((omusq - cu) + c2)
    return feq


def relax_parts(f, feq, inv_tau):
    """BGK relaxation f - (1/tau)(f - feq), entrywise."""
    return [f[i] - inv_tau * (f[i] - feq[i]) for i in range(Q)]


def velocity_from(rho, momentum):
    """Momentum over density; zero where density vanishes."""
    mx, my, mz = momentum
    if np.ndim(rho) == 0:
        inv = type(rho)(0) if rho == 0 else 1.0 / rho
    else:
        inv = np.zeros_like(rho)
        np.divide(1.0, rho, out=inv, where=rho != 0)
    return mx * inv, my * inv, mz * inv


def moments(f, model: LatticeModel = D3Q19) -> Macroscopics:
    """Macroscopic density, momentum and velocity of a distribution.

    ``f`` is indexable by direction: a (19,) vector or a (19, ...) field.
    """
    rho = density_reduction(f)
    mom = momentum_reduction(f)
    vel = velocity_from(rho, mom)
    if np.ndim(rho) == 0:
        return Macroscopics(rho=rho, momentum=np.array(mom), velocity=np.array(vel))
    return Macroscopics(rho=rho, momentum=np.stack(mom), velocity=np.stack(vel))


def equilibrium(rho, velocity, model: LatticeModel = D3Q19) -> np.ndarray:
    """Equilibrium distribution as a (19,) or (19, ...) array."""
    dt = np.result_type(np.asarray(rho), np.asarray(velocity), np.float32)
    rho = np.asarray(rho, dtype=dt)
    velocity = np.asarray(velocity, dtype=dt)
    return np.stack(np.broadcast_arrays(*equilibrium_parts(rho, velocity)))


def bgk_collide(f, params: RelaxationParams, model: LatticeModel = D3Q19) -> np.ndarray:
    """Relax a distribution toward its own equilibrium.

    Mass and momentum of the result equal those of the input up to rounding.
    """
    f = np.asarray(f, dtype=np.result_type(np.asarray(f), np.float32))
    m = moments(f, model)
    feq = equilibrium_parts(m.rho, (m.velocity[0], m.velocity[1], m.velocity[2]))
    return np.stack(relax_parts(f, feq, params.inv_tau(f.dtype)))


def lid_pull_coefficients(u_lid, dtype, model: LatticeModel = D3Q19) -> np.ndarray:
    """Per-direction moving-wall corrections for reflected populations.

    Entry ``i`` is added (scaled by the wall-adjacent fluid density) to the
    population a fluid cell receives along direction ``i`` from a moving-lid
    neighbor: -2 * w_j * 3 * (e_j . u_lid) with j = opposite(i), the
    direction that points into the wall.
    """
    u = np.asarray(u_lid, dtype=np.float64)
    e_opp = model.velocities[model.opposite].astype(np.float64)
    w_opp = model.weights[model.opposite]
    return (-6.0 * w_opp * (e_opp @ u)).astype(dtype)


def flops_per_update() -> int:
    """Floating-point operations of one cell update, counted from the
    expression tree above (reductions 39, velocity 4, equilibrium 98,
    relaxation 57)."""
    reductions = 18 + 21
    velocity = 1 + 3
    equilibrium_ops = 5 + 2 + 3 + 1 + 3 * 9 + 6 * 10
    relaxation = 3 * Q
    return reductions + velocity + equilibrium_ops + relaxation


KERNEL_FLOPS_PER_CELL = flops_per_update()
