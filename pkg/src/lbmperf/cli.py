"""Command-line driver: benchmarks, cavity runs, the model, verification.

Subcommands: bench-stream, run-cavity, model, verify, plot.  Options can be
preloaded from a TOML file (flat keys or one section per subcommand) with
explicit flags taking precedence.  LBMPERF_WORKERS, when set, forces the
worker count of every subcommand.  Exit codes: 0 success, 1 verification
failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
import warnings

try:
    import tomllib
except ImportError:  # Python 3.10
    import tomli as tomllib

from . import membench, perfmodel
from .kernels import prepare_boundaries, set_equilibrium, timestep
from .lattice import RelaxationParams
from .membench import CopyVerificationError
from .report import make_run_report
from .selfcheck import FAULTS, run_checks
from .storage import FlagField, Layout, LayoutError, LayoutScheme, PdfField
from .validation import (
    SimulationDiverged,
    check_divergence,
    domain_sweep,
    total_mass,
    macroscopic_fields,
    write_summary_csv,
)

ENV_WORKERS = "LBMPERF_WORKERS"

EXIT_OK = 0
EXIT_VERIFICATION = 1
EXIT_CONFIG = 2


class ConfigError(ValueError):
    pass


def _parse_vector(text: str):
    parts = [float(p) for p in str(text).split(",")]
    if len(parts) == 1:
        return (parts[0], 0.0, 0.0)
    if len(parts) != 3:
        raise ConfigError(f"expected 1 or 3 comma-separated numbers, got {text!r}")
    return tuple(parts)


def _parse_int_list(text: str) -> list[int]:
    return [int(p) for p in str(text).split(",") if p != ""]


def _parse_range(text: str) -> list[int]:
    """START:STOP:STEP inclusive sweep, or a comma list."""
    if ":" in text:
        bits = [int(p) for p in text.split(":")]
        if len(bits) == 2:
            bits.append(8)
        start, stop, step = bits
        return list(range(start, stop + 1, step))
    return _parse_int_list(text)


def _layout_from(args) -> Layout:
    scheme = LayoutScheme(args.layout)
    value_bytes = 4 if args.precision == "sp" else 8
    return Layout(scheme, args.align, value_bytes)


def _add_layout_flags(sub):
    sub.add_argument("--layout", choices=["soa", "aos"], default="soa",
                     help="storage scheme (default soa)")
    sub.add_argument("--align", type=int, default=0,
                     choices=[0, 16, 32, 64, 128],
                     help="x-stripe alignment padding in bytes (SoA only)")
    sub.add_argument("--precision", choices=["sp", "dp"], default="dp")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="lbmperf",
        description="D3Q19 lattice Boltzmann performance toolkit")
    subparsers = parser.add_subparsers(dest="command", required=True)
    subs = {}

    sub = subparsers.add_parser("bench-stream", help="copy bandwidth benchmark")
    sub.add_argument("--elements", "-n", type=int, default=1 << 22)
    sub.add_argument("--precision", choices=["sp", "dp"], default="dp")
    sub.add_argument("--workers", type=int, default=1)
    sub.add_argument("--chunks", type=str, default=None,
                     help="chunk count or comma list to sweep")
    sub.add_argument("--reps", type=int, default=5)
    sub.add_argument("--min-seconds", type=float, default=0.05)
    sub.add_argument("--quantum", type=int, default=membench.DEFAULT_QUANTUM)
    sub.add_argument("--write-allocate-factor", type=float,
                     default=membench.WRITE_ALLOCATE_COPY_FACTOR)
    sub.add_argument("--no-auto-size", action="store_true")
    sub.add_argument("--out", default="stream.csv", help="CSV path (appends)")
    subs["bench-stream"] = sub

    sub = subparsers.add_parser("run-cavity", help="timed lid-driven cavity run")
    sub.add_argument("--edge", type=int, default=32, help="cubic domain edge")
    _add_layout_flags(sub)
    sub.add_argument("--tau", type=float, default=0.6)
    sub.add_argument("--u-lid", type=str, default="0.05")
    sub.add_argument("--steps", type=int, default=100)
    sub.add_argument("--warmup", type=int, default=10)
    sub.add_argument("--workers", type=int, default=1)
    sub.add_argument("--bandwidth-gbs", type=float, default=None,
                     help="skip calibration and use this actual bandwidth")
    sub.add_argument("--no-write-allocate", action="store_true",
                     help="model stores as bypassing the write allocate")
    sub.add_argument("--report", default=None, help="write the run report JSON here")
    sub.add_argument("--dump", default=None, help="dump the final field (LBMF)")
    sub.add_argument("--summary-csv", default=None,
                     help="collect per-sample step/mass/residual/mlups rows")
    sub.add_argument("--sample-interval", type=int, default=10)
    sub.add_argument("--sweep", type=str, nargs="?", default=None,
                     const="16:200:8",
                     help="cubic edge sweep START:STOP:STEP (default schedule "
                          "16:200:8; writes CSV to --out)")
    sub.add_argument("--out", default="sweep.csv", help="sweep CSV path")
    subs["run-cavity"] = sub

    sub = subparsers.add_parser("model", help="MFLUP/s ceilings from bandwidths")
    sub.add_argument("--source", choices=["builtin", "measured"], default="builtin")
    sub.add_argument("--elements", "-n", type=int, default=1 << 22)
    sub.add_argument("--workers", type=int, default=1)
    sub.add_argument("--reps", type=int, default=5)
    sub.add_argument("--write-allocate-factor", type=float,
                     default=membench.WRITE_ALLOCATE_COPY_FACTOR)
    sub.add_argument("--no-write-allocate", action="store_true")
    sub.add_argument("--json", dest="json_out", default=None)
    subs["model"] = sub

    sub = subparsers.add_parser("verify", help="run the invariant suites")
    sub.add_argument("--max-edge", type=int, default=6)
    sub.add_argument("--patterns", type=int, default=6)
    sub.add_argument("--steps", type=int, default=5)
    sub.add_argument("--precision", choices=["sp", "dp"], default="dp")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--inject-fault", choices=list(FAULTS), default="none")
    subs["verify"] = sub

    sub = subparsers.add_parser("plot", help="charts from benchmark CSVs")
    sub.add_argument("--stream-csv", default=None)
    sub.add_argument("--sweep-csv", default=None)
    sub.add_argument("--out-dir", default=".")
    sub.add_argument("--format", choices=["svg", "png"], default="svg")
    subs["plot"] = sub

    for name, s in subs.items():
        s.add_argument("--config", default=None,
                       help="TOML file with option defaults (flags win)")
    return parser, subs


def _load_config(path) -> dict:
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    return data


def _apply_config(argv, subs) -> None:
    """Feed TOML values in as subparser defaults so explicit flags win."""
    path = None
    for pos, token in enumerate(argv):
        if token == "--config" and pos + 1 < len(argv):
            path = argv[pos + 1]
        elif token.startswith("--config="):
            path = token.split("=", 1)[1]
    if path is None:
        return
    data = _load_config(path)
    for name, sub in subs.items():
        merged = {k: v for k, v in data.items() if not isinstance(v, dict)}
        merged.update(data.get(name, {}))
        dests = {a.dest for a in sub._actions}
        sub.set_defaults(**{k.replace("-", "_"): v for k, v in merged.items()
                            if k.replace("-", "_") in dests})


def cmd_bench_stream(args) -> int:
    counts = _parse_int_list(args.chunks) if args.chunks else [args.workers]
    value_bytes = 4 if args.precision == "sp" else 8
    kwargs = dict(value_bytes=value_bytes, workers=args.workers,
                  repetitions=args.reps, min_seconds=args.min_seconds,
                  write_allocate_factor=args.write_allocate_factor,
                  quantum=args.quantum, auto_size=not args.no_auto_size)
    if len(counts) == 1:
        samples = [membench.stream_copy(args.elements, chunks=counts[0], **kwargs)]
    else:
        # a sweep varies only the chunk count; the vector size stays fixed
        kwargs["auto_size"] = False
        samples = membench.granularity_sweep(args.elements, counts, **kwargs)
    run_id = membench.next_run_id(args.out)
    membench.write_samples_csv(samples, args.out, run_id=run_id, append=run_id > 0)
    for s in samples:
        print(f"n={s.vector_elements} {s.precision} chunks={s.granularity} "
              f"workers={s.workers}: measured {s.measured_gbs:.2f} GB/s, "
              f"actual {s.actual_gbs:.2f} GB/s ({s.passes} passes, "
              f"best {s.best_seconds * 1e3:.1f} ms)")
    print(f"appended run {run_id} to {args.out}")
    return EXIT_OK


def _calibrated_ceiling(args, value_bytes: int):
    """Traffic model + ceiling from a flag or a quick local measurement."""
    tm = (perfmodel.gpu_traffic(value_bytes) if args.no_write_allocate
          else perfmodel.cpu_traffic(value_bytes))
    if args.bandwidth_gbs is not None:
        return tm, perfmodel.make_ceiling(args.bandwidth_gbs,
                                          perfmodel.bytes_per_update(tm)), "flag"
    sample = membench.stream_copy(1 << 22, value_bytes=8, workers=args.workers,
                                  repetitions=3)
    bandwidth = sample.actual_gbs if not args.no_write_allocate else sample.measured_gbs
    ceiling = perfmodel.make_ceiling(bandwidth, perfmodel.bytes_per_update(tm))
    return tm, ceiling, "measured stream_copy"


def cmd_run_cavity(args) -> int:
    layout = _layout_from(args)
    u_lid = _parse_vector(args.u_lid)
    if args.sweep:
        edges = _parse_range(args.sweep)
        tm, ceiling, source = _calibrated_ceiling(args, layout.value_bytes)
        rows = domain_sweep(edges, steps=args.steps, layouts=[layout],
                            tau=args.tau, u_lid=u_lid, workers=args.workers,
                            warmup=args.warmup)
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(("edge", "scheme", "alignment_bytes", "value_bytes",
                             "steps", "elapsed_seconds", "mlups",
                             "ceiling_mflups", "efficiency", "checksum"))
            for row in rows:
                eff = perfmodel.efficiency(row, ceiling)
                writer.writerow((row.config["edge"], row.config["scheme"],
                                 row.config["alignment_bytes"],
                                 row.config["value_bytes"], row.steps,
                                 f"{row.elapsed_seconds:.6g}", f"{row.mlups:.6g}",
                                 f"{ceiling.ceiling_mflups:.6g}", f"{eff:.6g}",
                                 row.checksum))
                print(f"edge {row.config['edge']:>4}: {row.mlups:.3g} MLUPS "
                      f"({100 * eff:.1f} % of {ceiling.ceiling_mflups:.3g})")
        print(f"sweep written to {args.out} (bandwidth source: {source})")
        return EXIT_OK

    if args.edge < 8:
        raise ConfigError(f"cavity edge must be at least 8 cells, got {args.edge}")
    if sum(c * c for c in u_lid) ** 0.5 > 0.1:
        raise ConfigError("lid speed must stay at or below 0.1 lattice units")
    dims = (args.edge, args.edge, args.edge)
    params = RelaxationParams(args.tau)
    flags = FlagField.cavity(dims, u_lid)
    field = set_equilibrium(PdfField(dims, layout))
    prepare_boundaries(field, flags)
    for _ in range(args.warmup):
        timestep(field, flags, params, args.workers)

    collect = args.summary_csv is not None
    summary_rows = []
    prev_vel = macroscopic_fields(field, flags)[1] if collect else None
    last_sample_t = 0.0
    t0 = time.perf_counter()
    for step in range(1, args.steps + 1):
        timestep(field, flags, params, args.workers)
        if collect and step % args.sample_interval == 0:
            now = time.perf_counter() - t0
            _, vel = macroscopic_fields(field, flags)
            residual = float(abs(vel - prev_vel).max())
            prev_vel = vel
            rate = (flags.fluid_count * args.sample_interval
                    / max(now - last_sample_t, 1e-12) / 1e6)
            summary_rows.append((step, total_mass(field, flags), residual,
                                 round(rate, 6)))
            last_sample_t = now
    elapsed = time.perf_counter() - t0
    check_divergence(field, flags, args.steps)

    tm, ceiling, source = _calibrated_ceiling(args, layout.value_bytes)
    config = {"edge": args.edge, "scheme": layout.scheme.value,
              "alignment_bytes": layout.alignment_bytes,
              "value_bytes": layout.value_bytes, "stride_x": field.stride_x,
              "tau": args.tau, "u_lid": list(u_lid), "steps": args.steps,
              "warmup": args.warmup, "workers": args.workers}
    report = make_run_report(config, elapsed, args.steps, flags.fluid_count,
                             field.checksum())
    report.bytes_per_update = perfmodel.bytes_per_update(tm)
    report.bandwidth_gbs = ceiling.bandwidth_gbs
    report.bandwidth_source = source
    report.ceiling_mflups = ceiling.ceiling_mflups
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        report.efficiency = perfmodel.efficiency(report, ceiling)
    report.achieved_gbs = perfmodel.achieved_bandwidth(report, tm)
    report.warnings = [str(w.message) for w in caught]

    print(f"cavity {args.edge}^3 {layout.scheme.value}"
          f"{'+' + str(layout.alignment_bytes) + 'B' if layout.alignment_bytes else ''} "
          f"{args.precision}: {report.mlups:.3g} MLUPS over {args.steps} steps "
          f"({report.elapsed_seconds:.3g} s)")
    print(f"model ceiling {ceiling.ceiling_mflups:.3g} MFLUP/s at "
          f"{ceiling.bandwidth_gbs:.3g} GB/s ({source}); efficiency "
          f"{100 * report.efficiency:.2f} %; achieved {report.achieved_gbs:.3g} GB/s")
    for message in report.warnings:
        print(f"warning: {message}", file=sys.stderr)
    if args.report:
        report.write_json(args.report)
        print(f"report written to {args.report}")
    if args.dump:
        field.dump(args.dump)
        print(f"field dumped to {args.dump}")
    if collect:
        write_summary_csv(args.summary_csv, summary_rows)
        print(f"summary written to {args.summary_csv}")
    return EXIT_OK


def cmd_model(args) -> int:
    if args.source == "builtin":
        table = perfmodel.reference_model_table()
        payload = {"source": "builtin",
                   "bandwidths_gbs": {"Intel X5650 node": perfmodel.X5650_NODE_ACTUAL_GBS,
                                      **perfmodel.HISTORICAL_GPU_COPY_GBS},
                   "mflups": table}
    else:
        sample = membench.stream_copy(args.elements, value_bytes=8,
                                      workers=args.workers, repetitions=args.reps,
                                      write_allocate_factor=args.write_allocate_factor)
        wa = not args.no_write_allocate
        traffic = perfmodel.cpu_traffic if wa else perfmodel.gpu_traffic
        bandwidth = sample.actual_gbs if wa else sample.measured_gbs
        rows = {
            "this machine": {
                "SP": perfmodel.ceiling_mflups(
                    bandwidth, perfmodel.bytes_per_update(traffic(4))),
                "DP": perfmodel.ceiling_mflups(
                    bandwidth, perfmodel.bytes_per_update(traffic(8))),
            }
        }
        payload = {"source": "measured",
                   "measured_gbs": sample.measured_gbs,
                   "actual_gbs": sample.actual_gbs,
                   "write_allocate": wa,
                   "mflups": rows}
    width = max(len(k) for k in payload["mflups"])
    print(f"{'device':<{width}}  {'SP':>8}  {'DP':>8}")
    for device, row in payload["mflups"].items():
        sp = f"{row['SP']:.0f}" if row["SP"] is not None else "n/a"
        dp = f"{row['DP']:.0f}" if row["DP"] is not None else "n/a"
        print(f"{device:<{width}}  {sp:>8}  {dp:>8}")
    if args.json_out:
        with open(args.json_out, "w") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
        print(f"model written to {args.json_out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    results = run_checks(max_edge=args.max_edge, patterns=args.patterns,
                         steps=args.steps,
                         value_bytes=4 if args.precision == "sp" else 8,
                         seed=args.seed, inject_fault=args.inject_fault)
    for result in results:
        print(result.line())
    failed = [r for r in results if not r.passed]
    if failed:
        print(f"{len(failed)} of {len(results)} checks failed", file=sys.stderr)
        return EXIT_VERIFICATION
    print(f"all {len(results)} checks passed")
    return EXIT_OK


def cmd_plot(args) -> int:
    from . import plotting

    if not args.stream_csv and not args.sweep_csv:
        raise ConfigError("plot needs --stream-csv and/or --sweep-csv")
    os.makedirs(args.out_dir, exist_ok=True)
    written = []
    if args.stream_csv:
        out = os.path.join(args.out_dir, f"bandwidth_sweep.{args.format}")
        plotting.plot_bandwidth_sweep(args.stream_csv, out)
        written.append(out)
    if args.sweep_csv:
        out = os.path.join(args.out_dir, f"domain_sweep.{args.format}")
        plotting.plot_domain_sweep(args.sweep_csv, out)
        written.append(out)
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


_COMMANDS = {
    "bench-stream": cmd_bench_stream,
    "run-cavity": cmd_run_cavity,
    "model": cmd_model,
    "verify": cmd_verify,
    "plot": cmd_plot,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subs = build_parser()
    try:
        _apply_config(argv, subs)
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (OSError, ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if hasattr(args, "workers") and os.environ.get(ENV_WORKERS):
        args.workers = int(os.environ[ENV_WORKERS])

    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, LayoutError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CopyVerificationError, SimulationDiverged) as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return EXIT_VERIFICATION


if __name__ == "__main__":
    sys.exit(main())
