"""Invariant suites behind the ``verify`` command.

Each check returns a named pass/fail result so the command can print one
line per invariant and exit nonzero as soon as any of them breaks.  A fault
can be injected deliberately (a perturbed stencil weight or opposite table)
to demonstrate that the checks do fail loudly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import reference as ref
from .lattice import (
    D3Q19,
    LatticeModel,
    RelaxationParams,
    density_reduction,
    equilibrium,
    moments,
    validate_model,
)
from .kernels import prepare_boundaries, set_equilibrium, timestep
from .storage import CellKind, FlagField, Layout, LayoutScheme, PdfField
from .validation import periodic_uniform_flow

FAULTS = ("none", "weight", "opposite")


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


def _model_with_fault(fault: str) -> LatticeModel:
    model = LatticeModel(velocities=D3Q19.velocities.copy(),
                         weights=D3Q19.weights.copy(),
                         opposite=D3Q19.opposite.copy())
    if fault == "weight":
        model.weights[3] *= 1.0 + 1e-6
    elif fault == "opposite":
        model.opposite[1], model.opposite[2] = model.opposite[2], model.opposite[1]
    elif fault != "none":
        raise ValueError(f"unknown fault {fault!r}; choose from {FAULTS}")
    return model


def check_stencil(model: LatticeModel) -> CheckResult:
    problems = validate_model(model)
    if problems:
        return CheckResult("stencil-invariants", False, "; ".join(problems))
    return CheckResult("stencil-invariants", True,
                       "weights, opposite table and shells are sound")


def check_equilibrium_moments(samples: int = 200, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        rho = rng.uniform(0.8, 1.2)
        u = rng.uniform(-1, 1, 3)
        u *= rng.uniform(0, 0.1) / max(float(np.linalg.norm(u)), 1e-30)
        m = moments(equilibrium(rho, u))
        worst = max(worst, abs(m.rho - rho) / rho,
                    float(np.abs(m.momentum - rho * u).max()))
    ok = worst <= 1e-13
    return CheckResult("equilibrium-moment-consistency", ok,
                       f"worst deviation {worst:.2e} over {samples} samples")


def check_oracle_equivalence(max_edge: int = 6, patterns: int = 6, steps: int = 5,
                             value_bytes: int = 8, seed: int = 0,
                             rtol: float = 1e-13) -> CheckResult:
    """Fused parallel kernel versus the naive reference on random obstacles."""
    rng = np.random.default_rng(seed)
    params = RelaxationParams(0.6)
    layout = Layout(LayoutScheme.SOA, 0, value_bytes)
    worst = 0.0
    for p in range(patterns):
        dims = tuple(int(rng.integers(4, max_edge + 1)) for _ in range(3))
        nx, ny, nz = dims
        flags = FlagField(dims, lid_velocity=(0.04, 0.01, 0.0))
        flags.kinds[rng.random((nz, ny, nx)) < 0.2] = CellKind.NO_SLIP
        if p % 2:
            flags.kinds[-1, :, :] = CellKind.MOVING_LID
        flags.invalidate_caches()

        field = set_equilibrium(PdfField(dims, layout))
        vals = field.values()
        vals *= (1 + 0.05 * rng.uniform(-1, 1, vals.shape)).astype(field.dtype)
        field.set_values(vals)
        for i, view in enumerate(field.dst_direction_views()):
            view[...] = vals[i]
        f_ref = ref.field_to_reference(field)
        prepare_boundaries(field, flags)
        workers = 1 + p % 3
        for _ in range(steps):
            timestep(field, flags, params, workers=workers)
            f_ref = ref.step_pull(f_ref, flags, params)
        fluid = flags.fluid_mask
        if not fluid.any():
            continue
        mine = field.values()[:, fluid]
        theirs = ref.reference_to_values(f_ref)[:, fluid]
        scale = np.maximum(np.abs(theirs), 1e-300)
        worst = max(worst, float((np.abs(mine - theirs) / scale).max()))
    ok = worst <= rtol
    return CheckResult("oracle-equivalence", ok,
                       f"worst relative deviation {worst:.2e} over {patterns} "
                       f"patterns x {steps} steps")


def check_push_pull_consistency(n: int = 4, steps: int = 3, seed: int = 1) -> CheckResult:
    rng = np.random.default_rng(seed)
    params = RelaxationParams(0.6)
    flags = FlagField.all_fluid((n, n, n))
    f0 = np.array(ref.field_to_reference(set_equilibrium(PdfField((n, n, n)))))
    f0 *= 1 + 0.05 * rng.uniform(-1, 1, f0.shape)
    pull = ref.run_pull(ref.collide_grid(f0, params), flags, params, steps)
    push = ref.collide_grid(ref.run_push(f0, params, steps), params)
    worst = float(np.abs(pull - push).max())
    ok = worst <= 1e-13
    return CheckResult("push-pull-consistency", ok,
                       f"pull^N(collide) vs collide(push^N) deviation {worst:.2e}")


def check_conservation(n: int = 10, steps: int = 200, seed: int = 2) -> CheckResult:
    rng = np.random.default_rng(seed)
    params = RelaxationParams(0.6)
    flags = FlagField.closed_box((n, n, n))
    field = set_equilibrium(PdfField((n, n, n)))
    vals = field.values()
    vals *= 1 + 0.02 * rng.uniform(-1, 1, vals.shape)
    field.set_values(vals)
    prepare_boundaries(field, flags)
    fluid = flags.fluid_mask
    mass0 = float(density_reduction(field.src_direction_views())[fluid].sum())
    for _ in range(steps):
        timestep(field, flags, params)
    mass = float(density_reduction(field.src_direction_views())[fluid].sum())
    drift = abs(mass - mass0) / mass0
    ok = drift <= 1e-12
    return CheckResult("mass-conservation", ok,
                       f"relative drift {drift:.2e} over {steps} closed-box steps")


def check_fixed_point(n: int = 8, steps: int = 50) -> CheckResult:
    dev = periodic_uniform_flow(n, (0.05, 0.0, 0.0), steps=steps)
    ok = dev <= 1e-13
    return CheckResult("equilibrium-fixed-point", ok,
                       f"uniform-flow deviation {dev:.2e} after {steps} steps")


def padding_poison_check(dims=(10, 8, 8), alignment: int = 128,
                         value_bytes: int = 8, steps: int = 3) -> CheckResult:
    """NaN-poison the padding, run lid-driven steps, scan for leaks."""
    layout = Layout(LayoutScheme.SOA, alignment, value_bytes)
    field = PdfField(dims, layout)
    if field.stride_x == dims[0]:
        return CheckResult("padding-poison", False,
                           f"dims {dims} produce no padding at {alignment} B")
    flags = FlagField.cavity(dims, (0.05, 0.0, 0.0))
    set_equilibrium(field)
    field.poison_padding()
    prepare_boundaries(field, flags)
    params = RelaxationParams(0.6)
    for _ in range(steps):
        timestep(field, flags, params)
    intact = field.padding_is_poisoned()
    clean = field.interior_all_finite()
    ok = intact and clean
    detail = (f"stride {field.stride_x} vs nx {dims[0]}: padding "
              f"{'intact' if intact else 'OVERWRITTEN'}, interior "
              f"{'finite' if clean else 'CONTAMINATED'} after {steps} steps")
    return CheckResult("padding-poison", ok, detail)


def run_checks(max_edge: int = 6, patterns: int = 6, steps: int = 5,
               value_bytes: int = 8, seed: int = 0,
               inject_fault: str = "none") -> list[CheckResult]:
    model = _model_with_fault(inject_fault)
    return [
        check_stencil(model),
        check_equilibrium_moments(),
        check_oracle_equivalence(max_edge, patterns, steps, value_bytes, seed),
        check_push_pull_consistency(),
        check_conservation(),
        check_fixed_point(),
        padding_poison_check(),
    ]
