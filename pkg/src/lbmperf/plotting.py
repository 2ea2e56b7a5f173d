"""Static charts from benchmark CSVs (bandwidth sweeps, domain sweeps)."""

from __future__ import annotations

import csv
from collections import defaultdict


def _load_rows(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def plot_bandwidth_sweep(csv_path, out_path) -> None:
    """Bandwidth versus chunk count, one line per run id."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = _load_rows(csv_path)
    if not rows:
        raise ValueError(f"no samples in {csv_path}")
    by_run = defaultdict(list)
    for r in rows:
        by_run[r.get("run_id", "0")].append((int(r["chunks"]), float(r["measured_gbs"]),
                                             float(r["actual_gbs"])))
    fig, ax = plt.subplots(figsize=(6, 4))
    for run_id, points in sorted(by_run.items()):
        points.sort()
        chunks = [p[0] for p in points]
        ax.plot(chunks, [p[1] for p in points], "o-", label=f"run {run_id} measured")
        ax.plot(chunks, [p[2] for p in points], "s--", alpha=0.6,
                label=f"run {run_id} actual")
    ax.set_xscale("log", base=2)
    ax.set_xlabel("chunks")
    ax.set_ylabel("GB/s")
    ax.set_title("copy bandwidth vs granularity")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)


def plot_domain_sweep(csv_path, out_path) -> None:
    """MLUPS versus cubic edge size, one line per layout/precision variant."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = _load_rows(csv_path)
    if not rows:
        raise ValueError(f"no samples in {csv_path}")
    by_variant = defaultdict(list)
    for r in rows:
        key = (f"{r['scheme']}/{r['alignment_bytes']}B/"
               f"{'SP' if r['value_bytes'] == '4' else 'DP'}")
        by_variant[key].append((int(r["edge"]), float(r["mlups"])))
    fig, ax = plt.subplots(figsize=(6, 4))
    for key, points in sorted(by_variant.items()):
        points.sort()
        ax.plot([p[0] for p in points], [p[1] for p in points], "o-", label=key)
    ceilings = {float(r["ceiling_mflups"]) for r in rows if r.get("ceiling_mflups")}
    for c in sorted(ceilings):
        ax.axhline(c, color="k", linestyle=":", alpha=0.5)
    ax.set_xlabel("cubic domain edge")
    ax.set_ylabel("MLUPS")
    ax.set_title("cavity update rate vs domain size")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
