"""Bandwidth-derived performance model for the D3Q19 update.

Bytes moved per lattice-cell update follow from the stencil size, the
per-direction load/store count and the value size; cache-based machines add
one write-allocate transfer per store.  Dividing a sustainable copy
bandwidth by that byte count yields the MFLUP/s ceiling (million fluid
lattice cell updates per second) a purely bandwidth-bound kernel cannot
exceed.  Efficiency is a measured rate over its ceiling.

Besides locally measured bandwidths, the module carries a small table of
historical sustained copy bandwidths (approximate chart readings for the
GPU boards, exact published figures for the Xeon X5650 node) so the model
table can be reproduced without hardware access.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

from .lattice import KERNEL_FLOPS_PER_CELL
from .membench import WRITE_ALLOCATE_COPY_FACTOR

# Sustained STREAM-copy bandwidth of a dual-socket Xeon X5650 node (GB/s of
# user-visible traffic); "actual" adds the write-allocate transfers.
X5650_COPY_MEASURED_GBS = {"1 core": 10.01, "1 NUMA LD": 14.08, "1 node": 26.8}
X5650_NODE_ACTUAL_GBS = X5650_COPY_MEASURED_GBS["1 node"] * WRITE_ALLOCATE_COPY_FACTOR

# Sustained copy bandwidth of period GPU boards (GB/s).  Approximate chart
# readings, chosen consistent with the integer ceilings they are known to
# produce; ECC redundancy costs the C2070 roughly a fifth of its bandwidth.
HISTORICAL_GPU_COPY_GBS = {
    "C2070": 119.8,
    "C2070 ECC": 94.9,
    "C1060": 77.8,
    "G80": 74.8,
}
# The G80 generation had no double-precision units.
GPU_SUPPORTS_DP = {"C2070": True, "C2070 ECC": True, "C1060": True, "G80": False}


@dataclass(frozen=True)
class TrafficModel:
    """Per-cell-update memory traffic accounting."""

    n_stencil: int = 19
    n_loads: int = 1
    n_stores: int = 1
    write_allocate: bool = True
    s_pdf: int = 8

    def __post_init__(self):
        if self.n_stencil < 1:
            raise ValueError("stencil must have at least one direction")
        if self.s_pdf not in (4, 8):
            raise ValueError(f"s_pdf must be 4 or 8, got {self.s_pdf}")
        if self.n_loads < 0 or self.n_stores < 0:
            raise ValueError("transfer counts cannot be negative")

    @property
    def effective_transfers(self) -> int:
        return self.n_loads + self.n_stores + (1 if self.write_allocate else 0)


def cpu_traffic(value_bytes: int) -> TrafficModel:
    """Two-grid update on a cache-based machine: load + store + write allocate."""
    return TrafficModel(write_allocate=True, s_pdf=value_bytes)


def gpu_traffic(value_bytes: int) -> TrafficModel:
    """Two-grid update with stores that bypass the write allocate."""
    return TrafficModel(write_allocate=False, s_pdf=value_bytes)


def bytes_per_update(tm: TrafficModel) -> int:
    """Bytes transferred per lattice-cell update."""
    return tm.n_stencil * tm.effective_transfers * tm.s_pdf


@dataclass(frozen=True)
class PerfCeiling:
    bandwidth_gbs: float
    bytes_per_update: int
    ceiling_mflups: float


def make_ceiling(bandwidth_gbs: float, n_bytes: int) -> PerfCeiling:
    return PerfCeiling(bandwidth_gbs, n_bytes,
                       ceiling_mflups(bandwidth_gbs, n_bytes))


def ceiling_mflups(bandwidth_gbs: float, n_bytes: int) -> float:
    """Bandwidth-bound MFLUP/s limit (full precision; round for display)."""
    if bandwidth_gbs <= 0 or n_bytes <= 0:
        raise ValueError("bandwidth and byte count must both be positive")
    return bandwidth_gbs * 1e9 / n_bytes / 1e6


def efficiency(run, ceiling: PerfCeiling) -> float:
    """Measured rate over its model ceiling, warning when it exceeds 1.

    ``run`` is a RunReport or a bare MFLUP/s number.
    """
    measured = getattr(run, "mlups", run)
    if measured <= 0:
        raise ValueError(f"measured MLUPS must be positive, got {measured}")
    ratio = measured / ceiling.ceiling_mflups
    if ratio > 1.0:
        warnings.warn(
            f"measured {measured:.3g} MFLUP/s exceeds the {ceiling.ceiling_mflups:.3g} "
            "MFLUP/s ceiling; the bandwidth input looks miscalibrated",
            stacklevel=2)
    return ratio


def achieved_bandwidth(run, tm: TrafficModel) -> float:
    """GB/s implied by a measured update rate under a traffic model."""
    measured = getattr(run, "mlups", run)
    return measured * 1e6 * bytes_per_update(tm) / 1e9


def computational_balance(tm: TrafficModel, flops: int = KERNEL_FLOPS_PER_CELL) -> float:
    """Bytes of memory traffic per floating-point operation of the kernel."""
    return bytes_per_update(tm) / flops


def format_sig3(value: float) -> str:
    """Three-significant-figure display form used in report text."""
    return f"{value:.3g}"


def reference_model_table() -> dict[str, dict[str, int | None]]:
    """MFLUP/s ceilings for the stored historical bandwidths, as printed
    integers: the X5650 node row uses write-allocate traffic, GPU rows do
    not, and boards without double-precision units report None."""
    table: dict[str, dict[str, int | None]] = {
        "Intel X5650 node": {
            "SP": round(ceiling_mflups(X5650_NODE_ACTUAL_GBS, bytes_per_update(cpu_traffic(4)))),
            "DP": round(ceiling_mflups(X5650_NODE_ACTUAL_GBS, bytes_per_update(cpu_traffic(8)))),
        }
    }
    for device, bw in HISTORICAL_GPU_COPY_GBS.items():
        row: dict[str, int | None] = {
            "SP": round(ceiling_mflups(bw, bytes_per_update(gpu_traffic(4)))),
            "DP": round(ceiling_mflups(bw, bytes_per_update(gpu_traffic(8))))
            if GPU_SUPPORTS_DP[device] else None,
        }
        table[device] = row
    return table


def model_report(config: dict, tm: TrafficModel, ceiling: PerfCeiling,
                 bandwidth_source: str, measured_mflups: float | None = None) -> dict:
    """JSON-ready summary of a model evaluation (and optionally a run)."""
    report = {
        "config": config,
        "bytes_per_update": bytes_per_update(tm),
        "bandwidth_source": bandwidth_source,
        "ceiling_mflups": ceiling.ceiling_mflups,
        "measured_mflups": measured_mflups,
        "efficiency": None,
        "achieved_gbs": None,
    }
    if measured_mflups is not None:
        report["efficiency"] = efficiency(measured_mflups, ceiling)
        report["achieved_gbs"] = achieved_bandwidth(measured_mflups, tm)
    return report
