"""D3Q19 lattice Boltzmann performance toolkit.

Optimized pull-scheme stream-collide kernels over configurable memory
layouts (AoS / SoA / padded SoA), STREAM-style bandwidth benchmarks, and a
bandwidth-derived MFLUP/s performance model with efficiency reporting.
"""

from .lattice import (
    D3Q19,
    KERNEL_FLOPS_PER_CELL,
    LatticeModel,
    Macroscopics,
    RelaxationParams,
    bgk_collide,
    equilibrium,
    moments,
)
from .storage import (
    CellKind,
    FlagField,
    Layout,
    LayoutError,
    LayoutScheme,
    PdfField,
    make_field,
)
from .kernels import (
    StepStats,
    boundary_kernel,
    prepare_boundaries,
    set_equilibrium,
    stream_collide_pull,
    timestep,
)
from .membench import BandwidthSample, granularity_sweep, stream_copy
from .perfmodel import (
    PerfCeiling,
    TrafficModel,
    achieved_bandwidth,
    bytes_per_update,
    ceiling_mflups,
    cpu_traffic,
    efficiency,
    gpu_traffic,
    make_ceiling,
    reference_model_table,
)
from .report import RunReport, make_run_report
from .validation import (
    CavityResult,
    SimulationDiverged,
    lid_driven_cavity,
    periodic_uniform_flow,
)

__version__ = "0.1.0"
