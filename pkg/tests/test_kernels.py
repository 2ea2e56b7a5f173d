"""Grid kernels against the naive reference, plus conservation and layouts."""

import numpy as np
import pytest

from lbmperf import reference as ref
from lbmperf.lattice import RelaxationParams, density_reduction, momentum_reduction
from lbmperf.kernels import (
    boundary_kernel,
    prepare_boundaries,
    set_equilibrium,
    stream_collide_pull,
    timestep,
)
from lbmperf.storage import CellKind, FlagField, Layout, LayoutScheme, PdfField

PARAMS = RelaxationParams(0.6)

SOA = Layout()
SOA_PAD = Layout(LayoutScheme.SOA, 128, 8)
AOS = Layout(LayoutScheme.AOS, 0, 8)


def perturbed_field(dims, layout, seed, scale=0.05):
    """Field at a deterministic positive perturbation of the rest state."""
    rng = np.random.default_rng(seed)
    nx, ny, nz = dims
    field = set_equilibrium(PdfField(dims, layout))
    vals = field.values()
    vals *= (1 + scale * rng.uniform(-1, 1, vals.shape)).astype(field.dtype)
    field.set_values(vals)
    for i, view in enumerate(field.dst_direction_views()):
        view[...] = vals[i]
    return field


def random_obstacle_flags(dims, seed, solid_fraction=0.2, with_lid=False):
    rng = np.random.default_rng(seed)
    nx, ny, nz = dims
    flags = FlagField(dims, lid_velocity=(0.04, 0.01, 0.0) if with_lid else (0, 0, 0))
    flags.kinds[rng.random((nz, ny, nx)) < solid_fraction] = CellKind.NO_SLIP
    if with_lid:
        flags.kinds[-1, :, :] = CellKind.MOVING_LID
    flags.invalidate_caches()
    return flags


def run_both(field, flags, steps, workers=1):
    """Advance the production field and the oracle in lockstep."""
    f_ref = ref.field_to_reference(field)
    prepare_boundaries(field, flags)
    for _ in range(steps):
        timestep(field, flags, PARAMS, workers)
        f_ref = ref.step_pull(f_ref, flags, PARAMS)
    return field.values(), ref.reference_to_values(f_ref)


def test_uniform_equilibrium_is_fixed_point_on_torus():
    field = set_equilibrium(PdfField((6, 6, 6), SOA))
    flags = FlagField.all_fluid((6, 6, 6))
    before = field.values()
    stream_collide_pull(field, flags, PARAMS)
    after = np.stack([v.copy() for v in field.dst_direction_views()])
    assert np.abs(after - before).max() <= 1e-15


def test_single_cell_perturbation_matches_oracle():
    field = set_equilibrium(PdfField((3, 3, 3), SOA))
    vals = field.values()
    vals[:, 1, 1, 1] *= 1.01
    field.set_values(vals)
    for i, view in enumerate(field.dst_direction_views()):
        view[...] = vals[i]
    flags = FlagField.all_fluid((3, 3, 3))
    mine, oracle = run_both(field, flags, 1)
    assert np.array_equal(mine, oracle)
    # the perturbation's momentum went where the velocities point: the pulled
    # neighbors along each direction now differ from equilibrium
    moved = np.abs(mine - np.stack([np.full((3, 3, 3), w) for w in
                                    np.array(ref.D3Q19.weights)])).max(axis=0)
    assert moved[1, 1, 1] > 0


def test_mass_conserved_on_periodic_domain():
    field = perturbed_field((5, 5, 5), SOA, seed=2)
    flags = FlagField.all_fluid((5, 5, 5))
    views = field.src_direction_views()
    mass0 = float(density_reduction(views).sum())
    for _ in range(10):
        timestep(field, flags, PARAMS)
    mass = float(density_reduction(field.src_direction_views()).sum())
    assert abs(mass - mass0) <= 1e-13 * mass0


def test_closed_box_at_rest_is_fixed_point():
    dims = (6, 6, 6)
    flags = FlagField.closed_box(dims)
    field = set_equilibrium(PdfField(dims, SOA))
    prepare_boundaries(field, flags)
    before = field.values()
    for _ in range(10):
        timestep(field, flags, PARAMS)
    after = field.values()
    fluid = flags.fluid_mask
    assert np.array_equal(after[:, fluid], before[:, fluid])


def test_closed_box_conserves_mass():
    dims = (6, 6, 6)
    flags = FlagField.closed_box(dims)
    field = perturbed_field(dims, SOA, seed=3)
    prepare_boundaries(field, flags)
    fluid = flags.fluid_mask
    mass0 = float(density_reduction(field.src_direction_views())[fluid].sum())
    for _ in range(50):
        timestep(field, flags, PARAMS)
    mass = float(density_reduction(field.src_direction_views())[fluid].sum())
    assert abs(mass - mass0) <= 1e-13 * mass0


def test_lid_injects_positive_x_momentum():
    dims = (6, 6, 6)
    flags = FlagField.cavity(dims, (0.05, 0.0, 0.0))
    field = set_equilibrium(PdfField(dims, SOA))
    mine, oracle = run_both(field, flags, 1)
    fluid = flags.fluid_mask
    assert np.array_equal(mine[:, fluid], oracle[:, fluid])
    mx = momentum_reduction(list(mine))[0]
    assert mx[fluid].sum() > 0
    # among fluid cells, only the lid-adjacent layer moved after one step
    touched = (np.abs(mx) > 0) & fluid
    assert touched[-2, 1:-1, 1:-1].any()
    assert not touched[1:-2].any()


@pytest.mark.parametrize("layout", [SOA, SOA_PAD, AOS], ids=["soa", "soa128", "aos"])
@pytest.mark.parametrize("with_lid", [False, True], ids=["noslip", "lid"])
def test_oracle_equivalence_random_obstacles(layout, with_lid):
    dims = (5, 4, 6)
    field = perturbed_field(dims, layout, seed=17)
    flags = random_obstacle_flags(dims, seed=23, with_lid=with_lid)
    mine, oracle = run_both(field, flags, 5)
    fluid = flags.fluid_mask
    assert np.array_equal(mine[:, fluid], oracle[:, fluid])


def test_oracle_equivalence_single_precision():
    layout = Layout(LayoutScheme.SOA, 0, 4)
    field = perturbed_field((4, 4, 4), layout, seed=31)
    flags = random_obstacle_flags((4, 4, 4), seed=37, with_lid=True)
    mine, oracle = run_both(field, flags, 3)
    assert mine.dtype == np.float32
    fluid = flags.fluid_mask
    assert np.array_equal(mine[:, fluid], oracle[:, fluid])


def test_pull_equals_collided_push_on_torus():
    # both schemes walk the same trajectory: the pull run starts from the
    # collided state, the push result gets one trailing collision
    field = perturbed_field((4, 4, 4), SOA, seed=41)
    f0 = ref.field_to_reference(field)
    flags = FlagField.all_fluid((4, 4, 4))
    pull = ref.run_pull(ref.collide_grid(f0, PARAMS), flags, PARAMS, 4)
    push = ref.run_push(f0, PARAMS, 4)
    assert np.array_equal(pull, ref.collide_grid(push, PARAMS))
    # macroscopic moments agree without the trailing collision
    rho_pull = density_reduction(np.moveaxis(pull, -1, 0))
    rho_push = density_reduction(np.moveaxis(push, -1, 0))
    assert np.allclose(rho_pull, rho_push, rtol=1e-13, atol=0)


def test_worker_count_does_not_change_results():
    dims = (6, 5, 7)
    flags = random_obstacle_flags(dims, seed=5, with_lid=True)
    results = []
    for workers in (1, 2, 3):
        field = perturbed_field(dims, SOA, seed=29)
        prepare_boundaries(field, flags)
        for _ in range(3):
            timestep(field, flags, PARAMS, workers=workers)
        results.append(field.values())
    assert np.array_equal(results[0], results[1])
    assert np.array_equal(results[0], results[2])


def test_layouts_produce_identical_results():
    dims = (6, 6, 6)
    flags = FlagField.cavity(dims, (0.05, 0.0, 0.0))
    outcomes = []
    for layout in (SOA, SOA_PAD, AOS):
        field = perturbed_field(dims, layout, seed=13)
        prepare_boundaries(field, flags)
        for _ in range(5):
            timestep(field, flags, PARAMS)
        outcomes.append(field.values())
    assert np.array_equal(outcomes[0], outcomes[1])
    assert np.array_equal(outcomes[0], outcomes[2])


def test_padding_never_touched_by_kernels():
    dims = (10, 6, 6)
    layout = Layout(LayoutScheme.SOA, 128, 8)
    flags = FlagField.cavity(dims, (0.05, 0.0, 0.0))
    field = set_equilibrium(PdfField(dims, layout))
    field.poison_padding()
    prepare_boundaries(field, flags)
    for _ in range(3):
        timestep(field, flags, PARAMS)
    assert field.padding_is_poisoned()
    assert field.interior_all_finite()


def test_timestep_stats():
    dims = (5, 5, 5)
    flags = FlagField.all_fluid(dims)
    field = set_equilibrium(PdfField(dims, SOA))
    stats = timestep(field, flags, PARAMS)
    assert stats.cells_updated == 125
    assert stats.seconds > 0


def test_timestep_with_no_fluid_cells_only_swaps():
    dims = (4, 4, 4)
    flags = FlagField(dims)
    flags.kinds[...] = CellKind.NO_SLIP
    flags.invalidate_caches()
    field = set_equilibrium(PdfField(dims, SOA))
    field.dst_direction_views()[0][...] = 7.0
    stats = timestep(field, flags, PARAMS)
    assert stats.cells_updated == 0
    # swap happened, nothing was written
    assert (field.src_direction_views()[0] == 7.0).all()


def test_two_steps_on_equilibrium_stay_equilibrium():
    dims = (6, 6, 6)
    flags = FlagField.closed_box(dims)
    field = set_equilibrium(PdfField(dims, SOA))
    prepare_boundaries(field, flags)
    before = field.values()
    timestep(field, flags, PARAMS)
    timestep(field, flags, PARAMS)
    fluid = flags.fluid_mask
    assert np.array_equal(field.values()[:, fluid], before[:, fluid])


def test_shape_mismatch_rejected():
    field = set_equilibrium(PdfField((4, 4, 4), SOA))
    flags = FlagField.all_fluid((5, 4, 4))
    with pytest.raises(ValueError):
        stream_collide_pull(field, flags, PARAMS)


def test_boundary_kernel_writes_solid_cells_only():
    dims = (5, 5, 5)
    flags = FlagField.closed_box(dims)
    field = perturbed_field(dims, SOA, seed=4)
    stream_collide_pull(field, flags, PARAMS)
    fluid = flags.fluid_mask
    snapshot = np.stack([v.copy() for v in field.dst_direction_views()])
    boundary_kernel(field, flags)
    after = np.stack([v.copy() for v in field.dst_direction_views()])
    assert np.array_equal(after[:, fluid], snapshot[:, fluid])
    assert not np.array_equal(after[:, ~fluid], snapshot[:, ~fluid])
