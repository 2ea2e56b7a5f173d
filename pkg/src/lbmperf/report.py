"""Per-experiment run records and their JSON form."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field


@dataclass
class RunReport:
    """Result of one timed simulation run.

    ``mlups`` counts fluid-cell updates only:
    fluid_cells * steps / elapsed / 1e6.
    """

    config: dict
    elapsed_seconds: float
    steps: int
    fluid_cells: int
    mlups: float
    checksum: str
    bytes_per_update: int | None = None
    bandwidth_gbs: float | None = None
    bandwidth_source: str | None = None
    ceiling_mflups: float | None = None
    efficiency: float | None = None
    achieved_gbs: float | None = None
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kwargs) -> str:
        kwargs.setdefault("indent", 2)
        return json.dumps(self.to_dict(), **kwargs)

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json() + "\n")


def make_run_report(config: dict, elapsed_seconds: float, steps: int,
                    fluid_cells: int, checksum: str, **model_fields) -> RunReport:
    mlups = fluid_cells * steps / elapsed_seconds / 1e6 if elapsed_seconds > 0 else 0.0
    return RunReport(config=config, elapsed_seconds=elapsed_seconds, steps=steps,
                     fluid_cells=fluid_cells, mlups=mlups, checksum=checksum,
                     **model_fields)
