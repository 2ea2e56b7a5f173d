"""PDF and flag grids: layout descriptor, aligned allocation, index operator.

Grids are stored double-buffered.  The SoA layout keeps one contiguous
stripe per (direction, z, y); the AoS layout interleaves the 19 directions
per cell.  Padding appends dummy elements to every x-stripe so each stripe
starts on an aligned address; kernels operate on interior views and never
touch the padding.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from enum import Enum, IntEnum

import numpy as np

from .lattice import Q, D3Q19, LatticeModel

MAGIC = b"LBMF"
DUMP_VERSION = 1
VALID_ALIGNMENTS = (0, 16, 32, 64, 128)
VALID_VALUE_BYTES = (4, 8)

_DTYPES = {4: np.dtype(np.float32), 8: np.dtype(np.float64)}


class LayoutError(ValueError):
    pass


class LayoutScheme(str, Enum):
    SOA = "soa"
    AOS = "aos"


@dataclass(frozen=True)
class Layout:
    """Storage scheme plus stripe alignment and value size."""

    scheme: LayoutScheme = LayoutScheme.SOA
    alignment_bytes: int = 0
    value_bytes: int = 8

    def __post_init__(self):
        if self.alignment_bytes not in VALID_ALIGNMENTS:
            raise LayoutError(f"alignment must be one of {VALID_ALIGNMENTS}, "
                              f"got {self.alignment_bytes}")
        if self.value_bytes not in VALID_VALUE_BYTES:
            raise LayoutError(f"value_bytes must be 4 or 8, got {self.value_bytes}")
        if self.scheme == LayoutScheme.AOS and self.alignment_bytes:
            raise LayoutError("per-stripe padding is defined for SoA only")

    @property
    def dtype(self) -> np.dtype:
        return _DTYPES[self.value_bytes]


def stride_for(nx: int, layout: Layout) -> int:
    """Smallest stripe length >= nx whose byte size is alignment-aligned."""
    if layout.alignment_bytes == 0:
        return nx
    nbytes = nx * layout.value_bytes
    padded = -(-nbytes // layout.alignment_bytes) * layout.alignment_bytes
    return padded // layout.value_bytes


def aligned_zeros(shape, dtype, alignment_bytes: int) -> np.ndarray:
    """Zero-filled array whose first element sits on the requested boundary."""
    if alignment_bytes == 0:
        return np.zeros(shape, dtype)
    dtype = np.dtype(dtype)
    size = int(np.prod(shape))
    extra = alignment_bytes // dtype.itemsize
    raw = np.zeros(size + extra, dtype)
    offset = (-raw.ctypes.data % alignment_bytes) // dtype.itemsize
    return raw[offset:offset + size].reshape(shape)


class PdfField:
    """Double-buffered particle-distribution storage for one grid.

    ``src`` holds the current state, ``dst`` the one being written; the two
    swap roles after each update without copying data.
    """

    def __init__(self, dims, layout: Layout = Layout(), model: LatticeModel = D3Q19):
        nx, ny, nz = (int(d) for d in dims)
        if min(nx, ny, nz) < 1:
            raise ValueError(f"dims must all be >= 1, got {dims}")
        self.dims = (nx, ny, nz)
        self.layout = layout
        self.model = model
        self.stride_x = stride_for(nx, layout)
        if layout.scheme == LayoutScheme.SOA:
            shape = (Q, nz, ny, self.stride_x)
        else:
            shape = (nz, ny, self.stride_x, Q)
        self._buffers = [
            aligned_zeros(shape, layout.dtype, layout.alignment_bytes),
            aligned_zeros(shape, layout.dtype, layout.alignment_bytes),
        ]
        self._src = 0
        expected = 2 * Q * self.stride_x * ny * nz * layout.value_bytes
        assert sum(b.nbytes for b in self._buffers) == expected

    # -- buffer access -----------------------------------------------------

    @property
    def dtype(self) -> np.dtype:
        return self.layout.dtype

    @property
    def src(self) -> np.ndarray:
        return self._buffers[self._src]

    @property
    def dst(self) -> np.ndarray:
        return self._buffers[1 - self._src]

    @property
    def total_bytes(self) -> int:
        return sum(b.nbytes for b in self._buffers)

    def swap_buffers(self) -> None:
        """Exchange src/dst roles; no data moves."""
        self._src = 1 - self._src

    def _direction_views(self, buf) -> list[np.ndarray]:
        nx = self.dims[0]
        if self.layout.scheme == LayoutScheme.SOA:
            return [buf[i, :, :, :nx] for i in range(Q)]
        return [buf[:, :, :nx, i] for i in range(Q)]

    def src_direction_views(self) -> list[np.ndarray]:
        """Interior (nz, ny, nx) view per direction of the current state."""
        return self._direction_views(self.src)

    def dst_direction_views(self) -> list[np.ndarray]:
        return self._direction_views(self.dst)

    # -- index operator ----------------------------------------------------

    def index(self, i: int, x: int, y: int, z: int) -> int:
        """Fused affine offset of value (i, x, y, z) in a flat buffer."""
        if __debug__:
            nx, ny, nz = self.dims
            assert 0 <= i < Q and 0 <= x < nx and 0 <= y < ny and 0 <= z < nz, \
                f"index out of range: i={i} x={x} y={y} z={z} dims={self.dims}"
        ny, nz = self.dims[1], self.dims[2]
        if self.layout.scheme == LayoutScheme.SOA:
            return ((i * nz + z) * ny + y) * self.stride_x + x
        return ((z * ny + y) * self.stride_x + x) * Q + i

    # -- whole-field values ------------------------------------------------

    def values(self) -> np.ndarray:
        """Canonical unpadded copy of the current state, shape (Q, nz, ny, nx)."""
        return np.stack([v.copy() for v in self.src_direction_views()])

    def set_values(self, values: np.ndarray) -> None:
        """Write a (Q, nz, ny, nx) array into the current state's interior."""
        for i, view in enumerate(self.src_direction_views()):
            view[...] = values[i]

    def transcode(self, target_layout: Layout) -> "PdfField":
        """New field in another layout holding bit-identical interior values."""
        out = PdfField(self.dims, target_layout, self.model)
        for mine, theirs in ((self.src_direction_views(), out.src_direction_views()),
                             (self.dst_direction_views(), out.dst_direction_views())):
            for i in range(Q):
                theirs[i][...] = mine[i]
        return out

    # -- padding checks ----------------------------------------------------

    def _padding_views(self, buf):
        nx = self.dims[0]
        if self.stride_x == nx:
            return None
        if self.layout.scheme == LayoutScheme.SOA:
            return buf[:, :, :, nx:]
        return buf[:, :, nx:, :]

    def poison_padding(self) -> None:
        """Fill padding with NaN in both buffers (debug-mode check aid)."""
        for buf in self._buffers:
            pad = self._padding_views(buf)
            if pad is not None:
                pad[...] = np.nan

    def padding_is_poisoned(self) -> bool:
        """True when every padding element of both buffers is still NaN."""
        for buf in self._buffers:
            pad = self._padding_views(buf)
            if pad is not None and not np.isnan(pad).all():
                return False
        return True

    def interior_all_finite(self) -> bool:
        return all(np.isfinite(v).all() for v in self.src_direction_views())

    def checksum(self) -> str:
        """Hex digest of the canonical interior bytes of the current state."""
        h = hashlib.sha256()
        for v in self.src_direction_views():
            h.update(np.ascontiguousarray(v).tobytes())
        return h.hexdigest()[:16]

    # -- binary dump -------------------------------------------------------

    def dump(self, path) -> None:
        """Write the current state as a little-endian LBMF regression fixture."""
        nx, ny, nz = self.dims
        tag = 0 if self.layout.scheme == LayoutScheme.SOA else 1
        header = MAGIC + struct.pack(
            "<6I", DUMP_VERSION, nx, ny, nz, Q, self.layout.value_bytes
        ) + struct.pack("<I", tag)
        fmt = "<f4" if self.layout.value_bytes == 4 else "<f8"
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(self.values().astype(fmt, copy=False).tobytes())

    @classmethod
    def load(cls, path, alignment_bytes: int = 0) -> "PdfField":
        with open(path, "rb") as fh:
            data = fh.read()
        if data[:4] != MAGIC:
            raise ValueError("not an LBMF dump")
        version, nx, ny, nz, ndirs, value_bytes, tag = struct.unpack_from("<7I", data, 4)
        if version != DUMP_VERSION or ndirs != Q:
            raise ValueError(f"unsupported dump (version={version}, dirs={ndirs})")
        scheme = LayoutScheme.SOA if tag == 0 else LayoutScheme.AOS
        if scheme == LayoutScheme.AOS:
            alignment_bytes = 0
        layout = Layout(scheme, alignment_bytes, value_bytes)
        fmt = "<f4" if value_bytes == 4 else "<f8"
        values = np.frombuffer(data[32:], dtype=fmt).reshape(Q, nz, ny, nx)
        out = cls((nx, ny, nz), layout)
        out.set_values(values.astype(layout.dtype))
        return out


def make_field(dims, layout: Layout = Layout()) -> PdfField:
    """Allocate a double-buffered PDF field for the given layout."""
    return PdfField(dims, layout)


class CellKind(IntEnum):
    FLUID = 0
    NO_SLIP = 1
    MOVING_LID = 2


class FlagField:
    """Per-cell kind grid plus the lid velocity for MOVING_LID cells."""

    def __init__(self, dims, lid_velocity=(0.0, 0.0, 0.0)):
        nx, ny, nz = (int(d) for d in dims)
        self.dims = (nx, ny, nz)
        self.kinds = np.zeros((nz, ny, nx), dtype=np.uint8)
        self.lid_velocity = np.asarray(lid_velocity, dtype=np.float64)
        self._caches: dict = {}

    @classmethod
    def all_fluid(cls, dims) -> "FlagField":
        return cls(dims)

    @classmethod
    def closed_box(cls, dims) -> "FlagField":
        """Fluid interior, NO_SLIP on every boundary face."""
        flags = cls(dims)
        k = flags.kinds
        k[0, :, :] = k[-1, :, :] = CellKind.NO_SLIP
        k[:, 0, :] = k[:, -1, :] = CellKind.NO_SLIP
        k[:, :, 0] = k[:, :, -1] = CellKind.NO_SLIP
        return flags

    @classmethod
    def cavity(cls, dims, lid_velocity=(0.05, 0.0, 0.0)) -> "FlagField":
        """Closed box whose top z-plane is a moving lid."""
        flags = cls.closed_box(dims)
        flags.lid_velocity = np.asarray(lid_velocity, dtype=np.float64)
        flags.kinds[-1, :, :] = CellKind.MOVING_LID
        return flags

    def invalidate_caches(self) -> None:
        """Call after mutating ``kinds`` or ``lid_velocity`` directly."""
        self._caches.clear()

    @property
    def fluid_mask(self) -> np.ndarray:
        mask = self._caches.get("fluid_mask")
        if mask is None:
            mask = self.kinds == CellKind.FLUID
            self._caches["fluid_mask"] = mask
        return mask

    @property
    def fluid_count(self) -> int:
        return int(self.fluid_mask.sum())

    def boundary_is_closed(self) -> bool:
        """True when every boundary-face cell is non-fluid."""
        k = self.kinds
        faces = (k[0], k[-1], k[:, 0], k[:, -1], k[:, :, 0], k[:, :, -1])
        return all((f != CellKind.FLUID).all() for f in faces)

    def staging_plan(self, model: LatticeModel = D3Q19) -> list:
        """Per-direction gather/scatter indices for the boundary kernel.

        For each direction i, lists the solid cells b whose neighbor b + e_i
        is fluid: that fluid cell will pull its direction-i population from
        b, so the boundary kernel stores the reflected value there.  Wrapping
        is periodic; closed domains bury it inside the solid shell.
        """
        key = ("plan", id(model))
        plan = self._caches.get(key)
        if plan is not None:
            return plan
        nz, ny, nx = self.kinds.shape
        fluid = self.fluid_mask
        solid_ns = self.kinds == CellKind.NO_SLIP
        solid_lid = self.kinds == CellKind.MOVING_LID
        plan = []
        for i in range(1, Q):
            ex, ey, ez = (int(c) for c in model.velocities[i])
            # fluid status of the neighbor b + e_i, evaluated at b
            neigh_fluid = np.roll(fluid, shift=(-ez, -ey, -ex), axis=(0, 1, 2))
            for solid, is_lid in ((solid_ns, False), (solid_lid, True)):
                target = solid & neigh_fluid
                if not target.any():
                    continue
                bz, by, bx = np.nonzero(target)
                fz = (bz + ez) % nz
                fy = (by + ey) % ny
                fx = (bx + ex) % nx
                plan.append((i, (bz, by, bx), (fz, fy, fx), is_lid))
        self._caches[key] = plan
        return plan
