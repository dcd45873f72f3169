"""Command-line entry point.

Subcommands: ``generate``, ``run``, ``compare``, ``correlate``, ``dynamic``.
Exit codes: 0 success, 1 usage error, 2 data error, 3 infeasible instance.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path


from . import analysis, sim, trace
from .datacenter import CSV_HEADER, Instance, load_instance, save_instance, synth_fleet
from .errors import DataError, InfeasibleError
from .ga import GaConfig
from .heuristics import check_hostable

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger("vmga")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INFEASIBLE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise DataError(f"bad config file {path}: {exc}") from None


def _ga_config(cfg: dict, seed: int | None) -> GaConfig:
    ga_cfg = GaConfig.from_mapping(cfg.get("ga", {}))
    return ga_cfg.with_seed(seed) if seed is not None else ga_cfg


def _protocol(cfg: dict, args) -> sim.ProtocolConfig:
    p = dict(cfg.get("protocol", {}))
    if args.strategies is not None:
        p["strategies"] = tuple(s.strip() for s in args.strategies.split(",") if s.strip())
    runs = args.runs if args.runs is not None else int(p.get("runs", 10))
    p["runs"] = runs
    if args.seed is not None or "seeds" not in p:
        base = args.seed if args.seed is not None else 0
        p["seeds"] = tuple(range(base, base + runs))
    unknown = set(p) - {"runs", "seeds", "strategies", "incumbent"}
    if unknown:
        raise DataError(f"unknown protocol config keys: {sorted(unknown)}")
    try:
        return sim.ProtocolConfig(**p)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_checked_instance(path) -> Instance:
    try:
        inst = load_instance(path)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot load instance {path}: {exc}") from None
    check_hostable(inst)
    return inst


def cmd_generate(args, cfg) -> None:
    seed = args.seed if args.seed is not None else 0
    spec = trace.SynthSpec(vm_count=args.vms, missing_rate=args.missing_rate)
    records = trace.synth_workload(spec, seed)
    out = _out_dir(args)
    trace.write_trace(records, out / "trace.csv")
    cleaned = trace.clean_records(records)
    inst = trace.instance_from_records(cleaned, synth_fleet(args.pms, seed))
    save_instance(inst, out / "instance.json")
    log.info("wrote %d VMs / %d PMs to %s", inst.n_vms, inst.n_pms, out)


def cmd_run(args, cfg) -> None:
    inst = _load_checked_instance(args.instance)
    seed = args.seed if args.seed is not None else 0
    strategy = args.strategy.upper()
    if strategy not in sim.STRATEGIES:
        raise UsageError(f"unknown strategy {args.strategy!r}")
    placement, metrics, _ = sim.run_strategy(strategy, inst, seed, _ga_config(cfg, seed))
    out = _out_dir(args)
    name = strategy.lower()
    with open(out / f"run_{name}.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        w.writerow(metrics.csv_row(strategy))
    (out / f"placement_{name}.json").write_text(json.dumps([int(x) for x in placement]) + "\n", encoding="utf-8")


def cmd_compare(args, cfg) -> None:
    inst = _load_checked_instance(args.instance)
    protocol = _protocol(cfg, args)
    ga_cfg = _ga_config(cfg, None)
    out = _out_dir(args)
    with open(out / "runs.jsonl", "w", encoding="utf-8") as fh:
        table = sim.run_protocol(inst, protocol, ga_cfg, on_run=lambda rec: fh.write(rec.to_json() + "\n"))
    analysis.comparison_report(table.rows, out)
    for row in table.rows:
        log.info("%-6s energy=%.4f kWh sla=%.2f%% pms=%.2f ga_wall=%.3fs", row.strategy,
                 row.metrics.energy_kwh, row.metrics.sla_violation_pct, row.metrics.active_pms, row.wall_time_s)


def cmd_correlate(args, cfg) -> None:
    try:
        records = trace.load_trace(args.trace)
    except OSError as exc:
        raise DataError(f"cannot read trace {args.trace}: {exc}") from None
    if any(isinstance(r.fields.get(c), dict) for r in records for c in trace.GOOGLE_FIELD_MAP):
        records = trace.flatten_nested(records)
    cleaned = trace.clean_records(records)
    if len(cleaned) < 2:
        raise DataError("correlation needs at least two usable trace rows")
    seed = args.seed if args.seed is not None else 0
    features = trace.extract_features(cleaned)
    n_pms = args.pms if args.pms is not None else max(1, -(-len(cleaned) // 2))
    inst = trace.instance_from_records(cleaned, synth_fleet(n_pms, seed))
    check_hostable(inst)
    baseline = sim.random_place(inst, seed)
    placement, _, _ = sim.run_strategy("GA", inst, seed, _ga_config(cfg, seed), previous=baseline)
    # Outcomes are read off the unoptimized baseline; migrations are those the GA makes.
    targets = analysis.per_vm_targets(inst, baseline)
    moved = analysis.per_vm_targets(inst, placement, previous=baseline).column("vm_migrations")
    targets.values[:, targets.names.index("vm_migrations")] = moved

    out = _out_dir(args)
    normalized = trace.minmax_normalize(features)
    feat = analysis.correlation_matrix(normalized)
    feat.to_csv(out / "correlation_features.csv")
    analysis.export_heatmap_svg(feat, out / "heatmap_features.svg", "Feature correlation")
    tgt = analysis.correlation_matrix(normalized, targets)
    tgt.to_csv(out / "correlation_targets.csv")
    analysis.export_heatmap_svg(tgt, out / "heatmap_targets.svg", "Features vs target metrics")


def cmd_dynamic(args, cfg) -> None:
    inst = _load_checked_instance(args.instance)
    dyn = cfg.get("dynamic", {})
    threshold = args.threshold if args.threshold is not None else float(dyn.get("threshold", 0.10))
    epochs = args.epochs if args.epochs is not None else int(dyn.get("epochs", 5))
    if epochs < 1:
        raise UsageError("--epochs must be >= 1")
    seed = args.seed if args.seed is not None else 0
    if args.trace:
        records = trace.clean_records(trace.load_trace(args.trace))
        timeline = trace.epoch_demands_from_trace(records, inst.n_vms, epochs)
    else:
        jump_at = args.jump_epoch if args.jump_epoch is not None else epochs // 2
        timeline = [inst.cpu_demand * (args.jump_factor if e >= jump_at else 1.0) for e in range(epochs)]
    result = sim.dynamic_loop(timeline, inst, _ga_config(cfg, seed), threshold=threshold)
    out = _out_dir(args)
    with open(out / "epochs.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "optimized", *CSV_HEADER[1:]])
        for ep in result:
            w.writerow([ep.index, int(ep.optimized), *ep.metrics.csv_row("")[1:]])
    summary = sim.summarize_epochs(result)
    (out / "dynamic_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    log.info("dynamic: %s", summary)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vmga", description="GA-based VM placement experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def common(p, *, instance=False, need_trace=False):
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--config", help="TOML config file ([ga], [protocol], [dynamic] tables)")
        p.add_argument("--seed", type=int)
        if instance:
            p.add_argument("--instance", required=True, help="instance JSON file")
        if need_trace:
            p.add_argument("--trace", required=True, help="trace CSV file")

    p = sub.add_parser("generate", help="synthesize a trace CSV and an instance JSON")
    common(p)
    p.add_argument("--vms", type=int, required=True)
    p.add_argument("--pms", type=int, required=True)
    p.add_argument("--missing-rate", type=float, default=0.02)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("run", help="place an instance with one strategy")
    common(p, instance=True)
    p.add_argument("--strategy", default="GA", help="FFD, BFD, GA or RANDOM")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="multi-run comparison of strategies")
    common(p, instance=True)
    p.add_argument("--strategies", help="comma-separated, e.g. ffd,bfd,ga")
    p.add_argument("--runs", type=int)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("correlate", help="Pearson correlation of trace features and outcomes")
    common(p, need_trace=True)
    p.add_argument("--pms", type=int, help="fleet size for outcome attribution")
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("dynamic", help="adaptive re-optimization over epochs")
    common(p, instance=True)
    p.add_argument("--trace", help="trace CSV supplying per-epoch CPU demand")
    p.add_argument("--threshold", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--jump-epoch", type=int)
    p.add_argument("--jump-factor", type=float, default=1.5)
    p.set_defaults(func=cmd_dynamic)
    return parser


def run_command(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("vmga: a subcommand is required")
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(message)s", stream=sys.stderr)
        cfg = _load_config(args.config)
        args.func(args, cfg)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleError as exc:
        print(f"infeasible instance: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (DataError, ValueError, KeyError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
