"""Command-line interface.

Commands: ``analyze`` (per-layer cost report), ``integrate`` (trace x
regions -> joules), ``gen-trace`` (synthetic power trace), ``calibrate``
(affine fits from measurements), ``predict`` (evaluate saved fits),
``rank`` (order training configurations by time/energy/EDP).

All commands accept ``--output PATH`` (default stdout) and ``--format
csv|table``. Floats are printed with 6 significant digits so identical
invocations produce identical bytes. Exit codes: 0 success, 2 input or
data error, 3 nothing feasible to rank.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import arch, costmodel, energymodel, powertrace, tuner
from .errors import CnnergyError, DataFormatError, NothingFeasibleError
from .multigpu import GpuSet


def _fmt(value: float) -> str:
    return f"{value:.6g}"


def _render_table(csv_text: str) -> str:
    """Align a CSV report into padded columns; comment lines pass through."""
    comments, rows = [], []
    for line in csv_text.splitlines():
        if line.startswith("#"):
            comments.append(line)
        elif line:
            rows.append(line.split(","))
    widths: list[int] = []
    for row in rows:
        for i, cell in enumerate(row):
            if i >= len(widths):
                widths.append(0)
            widths[i] = max(widths[i], len(cell))
    lines = comments + [
        "  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip()
        for row in rows
    ]
    return "\n".join(lines) + "\n"


def _deliver(text: str, args) -> None:
    if args.format == "table":
        text = _render_table(text)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------

def _scaled_summary(summary: costmodel.CostSummary, batch: int) -> costmodel.CostSummary:
    per_layer = []
    for row in summary.per_layer:
        o = row.ops
        ops = costmodel.OpCount(
            macc=o.macc * batch, max_ops=o.max_ops * batch,
            add_div=o.add_div * batch, exp_add_div=o.exp_add_div * batch,
            mul01=o.mul01 * batch, bias_add=o.bias_add * batch,
        )
        data = costmodel.DataVolume(
            read_elems=row.data.read_elems * batch,
            written_elems=row.data.written_elems * batch,
            element_bytes=row.data.element_bytes,
        )
        per_layer.append(costmodel.LayerCost(row.name, row.kind, ops, data))
    return costmodel.CostSummary(
        per_layer=tuple(per_layer),
        total_ops=summary.total_ops * batch,
        total_read_elems=summary.total_read_elems * batch,
        total_written_elems=summary.total_written_elems * batch,
        element_bytes=summary.element_bytes,
        ctc=summary.ctc,
    )


def cmd_analyze(args) -> str:
    if args.builtin:
        net = arch.builtin_network(args.builtin)
    else:
        text = Path(args.arch).read_text(encoding="utf-8")
        net = arch.parse_network(text, name=Path(args.arch).stem)
    shaped = arch.infer_shapes(net)
    summary = costmodel.network_cost(shaped, element_bytes=args.element_bytes)
    if args.batch is not None:
        if args.batch < 1:
            raise DataFormatError(f"--batch must be >= 1, got {args.batch}")
        summary = _scaled_summary(summary, args.batch)
    mb = 2 ** 20
    head = [f"# network: {net.name}"]
    if args.batch is not None:
        head.append(f"# batch: {args.batch}")
    head += [
        f"# total_ops: {summary.total_ops}",
        f"# read_mb: {_fmt(summary.total_read_bytes / mb)}",
        f"# written_mb: {_fmt(summary.total_written_bytes / mb)}",
        f"# ctc: {'' if summary.ctc is None else _fmt(summary.ctc)}",
    ]
    return "\n".join(head) + "\n" + costmodel.cost_csv(summary)


# ---------------------------------------------------------------------------
# integrate / gen-trace
# ---------------------------------------------------------------------------

def cmd_integrate(args) -> str:
    trace = powertrace.load_trace(args.trace)
    regions = powertrace.load_regions(args.regions)
    return powertrace.region_results_csv(trace, regions)


def _parse_segments(text: str) -> list[powertrace.SegmentSpec]:
    """``watts:seconds`` for a flat segment, ``start-end:seconds`` for a
    ramp, comma-separated."""
    segments = []
    for part in text.split(","):
        part = part.strip()
        try:
            level, _, duration = part.partition(":")
            if not duration:
                raise ValueError("missing duration")
            try:
                start = end = float(level)
            except ValueError:
                lo, _, hi = level.partition("-")
                start, end = float(lo), float(hi)
            segments.append(powertrace.SegmentSpec(float(duration), start, end))
        except ValueError as exc:
            raise DataFormatError(
                f"bad segment {part!r} (want watts:seconds or start-end:seconds): {exc}"
            ) from exc
    if not segments:
        raise DataFormatError("at least one segment is required")
    return segments


def cmd_gen_trace(args) -> str:
    trace = powertrace.generate_synthetic_trace(
        _parse_segments(args.segments),
        sample_rate=args.rate,
        channels=args.channels,
        noise_sigma=args.noise,
        seed=args.seed,
    )
    return powertrace.trace_csv(trace)


# ---------------------------------------------------------------------------
# calibrate / predict
# ---------------------------------------------------------------------------

def _load_records(args) -> list[energymodel.MeasurementRecord]:
    if args.bundled:
        return energymodel.bundled_measurements()
    return energymodel.load_measurements(args.measurements)


def cmd_calibrate(args) -> str:
    records = _load_records(args)
    models, skipped = energymodel.calibrate(records, gpu_counts=args.gpus)
    if args.model_out:
        energymodel.save_models(models, args.model_out)
    lines = [f"# fitted: {len(models)}", f"# skipped: {len(skipped)}"]
    for group in skipped:
        lines.append(f"# skipped {group.device}/{group.network}/{group.step}/"
                     f"{group.gpus}/{group.quantity}: {group.reason}")
    lines.append("device,network,step,gpus,quantity,slope,intercept,r_squared,n_points")
    for m in models:
        lines.append(f"{m.device},{m.network},{m.step},{m.gpus},{m.quantity},"
                     f"{_fmt(m.slope)},{_fmt(m.intercept)},{_fmt(m.r_squared)},{m.n_points}")
    return "\n".join(lines) + "\n"


def cmd_predict(args) -> str:
    models = energymodel.load_models(args.models)
    quantities = (args.quantity,) if args.quantity else energymodel.QUANTITIES
    lines = ["device,network,step,gpus,batch,quantity,value,extrapolated"]
    for quantity in quantities:
        model = energymodel.find_model(models, args.device, args.network,
                                       args.step, args.gpus, quantity)
        p = energymodel.predict(model, args.batch)
        lines.append(f"{args.device},{args.network},{args.step},{args.gpus},"
                     f"{args.batch},{quantity},{_fmt(p.value)},"
                     f"{1 if p.extrapolation_warning else 0}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# rank
# ---------------------------------------------------------------------------

def _gpu_set_label(gpu_set: GpuSet) -> str:
    return "+".join(f"{name}:{count}" for name, count in gpu_set.members if count > 0)


def cmd_rank(args) -> str:
    records = energymodel.records_by_key(_load_records(args))
    profiles = energymodel.bundled_devices()
    plans = energymodel.bundled_plans()
    configs = tuner.bundled_grid(args.device, plans, networks=args.networks,
                                 batches=args.batches, gpu_counts=args.gpus)
    if not configs:
        raise NothingFeasibleError("the requested grid is empty")
    shapes = {name: arch.infer_shapes(arch.builtin_network(name))
              for name in {c.network for c in configs}}
    reports = [tuner.score(c, records, profiles, shaped=shapes[c.network],
                           update_overhead_pct=args.update_overhead_pct)
               for c in configs]
    ranked = tuner.rank(reports, metric=args.metric)
    lines = [f"# metric: {args.metric}",
             "rank,network,batch,gpus,gpu_set,kiloseconds,megajoules,edp_mj_ks"]
    for report in ranked:
        cfg = report.config
        lines.append(f"{report.ranks[args.metric]},{cfg.network},{cfg.batch},"
                     f"{cfg.gpu_set.total_gpus},{_gpu_set_label(cfg.gpu_set)},"
                     f"{_fmt(report.kiloseconds)},{_fmt(report.megajoules)},"
                     f"{_fmt(report.edp_mj_ks)}")
    for report in reports:
        if not report.feasible:
            cfg = report.config
            lines.append(f"# infeasible: {cfg.network} batch={cfg.batch} "
                         f"gpu_set={_gpu_set_label(cfg.gpu_set)} ({report.reason})")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# parser / entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cnnergy",
        description="CNN training cost, energy, and configuration analysis.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output", metavar="PATH",
                        help="write the report here instead of stdout")
    common.add_argument("--format", choices=("csv", "table"), default="csv",
                        help="output format (default: csv)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", parents=[common],
                       help="per-layer operation and data-volume report")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--builtin", choices=arch.BUILTIN_NETWORK_NAMES,
                     help="analyze a bundled architecture")
    src.add_argument("--arch", metavar="FILE", help="architecture description file")
    p.add_argument("--batch", type=int, help="scale all counts by this batch size")
    p.add_argument("--element-bytes", type=int, default=4,
                   help="bytes per tensor element (default: 4)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("integrate", parents=[common],
                       help="integrate trace power over labeled regions")
    p.add_argument("--trace", required=True, metavar="FILE", help="power trace CSV")
    p.add_argument("--regions", required=True, metavar="FILE", help="regions CSV")
    p.set_defaults(func=cmd_integrate)

    p = sub.add_parser("gen-trace", parents=[common],
                       help="generate a synthetic power trace CSV")
    p.add_argument("--segments", required=True,
                   help="comma list of watts:seconds or start-end:seconds")
    p.add_argument("--rate", type=float, default=1000.0,
                   help="samples per second (default: 1000)")
    p.add_argument("--channels", type=int, default=8,
                   help="number of power channels (default: 8)")
    p.add_argument("--noise", type=float, default=0.0,
                   help="Gaussian noise sigma in watts (default: 0)")
    p.add_argument("--seed", type=int, help="noise RNG seed")
    p.set_defaults(func=cmd_gen_trace)

    for name, helptext in (("calibrate", "fit affine batch-size models"),
                           ("rank", "rank training configurations")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--bundled", action="store_true",
                         help="use the bundled measurement tables")
        src.add_argument("--measurements", metavar="FILE", help="measurements CSV")
        if name == "calibrate":
            p.add_argument("--gpus", type=_int_list, default=(1, 2),
                           help="GPU counts to fit (default: 1,2)")
            p.add_argument("--model-out", metavar="FILE",
                           help="also save the fitted models as JSON")
            p.set_defaults(func=cmd_calibrate)
        else:
            p.add_argument("--device", required=True, help="device profile name")
            p.add_argument("--metric", choices=tuner.RANK_METRICS, default="edp",
                           help="ranking metric (default: edp)")
            p.add_argument("--networks", type=lambda s: tuple(s.split(",")),
                           help="networks to include (default: all built-ins)")
            p.add_argument("--gpus", type=_int_list, default=(1, 2, 4),
                           help="GPU counts to include (default: 1,2,4)")
            p.add_argument("--batches", type=_int_list, default=(64, 128, 256),
                           help="batch sizes to include (default: 64,128,256)")
            p.add_argument("--update-overhead-pct", type=float, default=0.0,
                           help="extra percent for the weight-update phase")
            p.set_defaults(func=cmd_rank)

    p = sub.add_parser("predict", parents=[common],
                       help="evaluate saved calibration models")
    p.add_argument("--models", required=True, metavar="FILE", help="model JSON file")
    p.add_argument("--device", required=True)
    p.add_argument("--network", required=True)
    p.add_argument("--step", required=True, choices=energymodel.STEPS)
    p.add_argument("--gpus", type=int, required=True)
    p.add_argument("--batch", type=int, required=True)
    p.add_argument("--quantity", choices=energymodel.QUANTITIES,
                   help="restrict to one quantity (default: both)")
    p.set_defaults(func=cmd_predict)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        text = args.func(args)
    except NothingFeasibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (CnnergyError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _deliver(text, args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
