"""Command-line entry point.

Subcommands:

* ``ingest``    parse + validate every trace in a manifest, write canonical CSVs
* ``simulate``  epoch loop with a fixed allocation (QoE modeling only)
* ``allocate``  epoch loop with donor/receiver reallocation each epoch
* ``serve``     run the tool endpoint over TCP or stdio
* ``eval``      metrics summary (MSE, category accuracy, objective) of reports
* ``synth``     write the bundled five-user synthetic scenario

All randomness is derived from ``--seed`` (a fixed constant by default),
so every subcommand is reproducible run-to-run.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace

import yaml

from .agent import ToolServer
from .allocate import AllocationParams, objective
from .errors import MarqoeError
from .experiment import (build_context, echo_config, emit_report, load_config,
                         read_report_csv, run_experiment)
from .metrics import category_accuracy, qoe_mse
from .server import serve_stdio, serve_tcp
from .synthetic import mixed_mobility_scenario
from .trace import load_manifest, parse_trace_file, write_trace_csv
from .ucr import UserContextStore

logger = logging.getLogger(__name__)

DEFAULT_SEED = 20240901
UCR_DIR_ENV = "MARQOE_UCR_DIR"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="marqoe",
        description="QoE-aware bandwidth provisioning simulator and tool service")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--manifest", help="dataset manifest (YAML)")
        p.add_argument("--config", help="experiment config file (YAML)")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=DEFAULT_SEED)
        p.add_argument("--epoch-len", type=float, default=None)
        p.add_argument("--b-total", type=float, default=None)
        p.add_argument("--h-tar", type=float, default=None)
        p.add_argument("--h-hig", type=float, default=None)
        p.add_argument("--ucr-dir", default=os.environ.get(UCR_DIR_ENV))

    p = sub.add_parser("ingest", help="validate traces, write canonical CSVs")
    common(p)
    p.add_argument("--snap", action="store_true",
                   help="snap jittery timestamps onto the fps lattice")

    for name in ("simulate", "allocate"):
        p = sub.add_parser(name, help=f"run the epoch loop ({name} mode)")
        common(p)
        p.add_argument("--epochs", type=int, default=None,
                       help="cap on recorded epochs")

    p = sub.add_parser("serve", help="serve the agent tool endpoint")
    common(p)
    p.add_argument("--serve-addr", default="127.0.0.1:8765",
                   help="host:port for the TCP listener")
    p.add_argument("--stdio", action="store_true",
                   help="serve over stdin/stdout instead of TCP")

    p = sub.add_parser("eval", help="metrics summary over report CSVs")
    p.add_argument("reports", nargs="+", help="report CSV paths")
    p.add_argument("--config", help="experiment config file (YAML)")
    p.add_argument("--b-total", type=float, default=None)

    p = sub.add_parser("synth", help="write the bundled synthetic scenario")
    p.add_argument("--out", default="out/scenario")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)

    return parser


def _experiment_config(args, reallocation: bool):
    overrides = {
        "manifest": args.manifest,
        "out_dir": args.out,
        "seed": args.seed,
        "epoch_len": args.epoch_len,
        "total_bandwidth": args.b_total,
        "target_qoe": args.h_tar,
        "high_qoe": args.h_hig,
        "ucr_dir": args.ucr_dir,
        "epochs": getattr(args, "epochs", None),
    }
    cfg = load_config(args.config, **overrides)
    return replace(cfg, reallocation=reallocation)


def cmd_ingest(args) -> int:
    manifest = load_manifest(args.manifest)
    out_dir = os.path.join(args.out, "traces")
    os.makedirs(out_dir, exist_ok=True)
    failures = []
    for entry in manifest.users:
        try:
            trace = parse_trace_file(
                entry.path, rotation_convention=entry.rotation_convention,
                fps=manifest.fps, user_id=entry.user_id,
                snap_timestamps=args.snap)
            write_trace_csv(trace, os.path.join(out_dir, f"{entry.user_id}.csv"))
            print(f"ok      {entry.user_id}  {len(trace.frames)} frames")
        except MarqoeError as exc:
            failures.append((entry.user_id, entry.path, exc))
            print(f"FAILED  {entry.user_id}  {entry.path}: {exc}")
    print(f"{len(manifest.users) - len(failures)}/{len(manifest.users)} traces ok")
    return 1 if failures else 0


def cmd_run(args, reallocation: bool) -> int:
    cfg = _experiment_config(args, reallocation)
    os.makedirs(cfg.out_dir, exist_ok=True)
    echo_config(cfg, os.path.join(cfg.out_dir, "effective_config.yaml"))
    report = run_experiment(cfg)
    written = emit_report(report, cfg.out_dir)
    print(f"h_tar={cfg.alloc.target_qoe} h_hig={cfg.alloc.high_qoe} "
          f"b_total={cfg.alloc.total_bandwidth:.0f} Hz")
    for key in ("mean_qoe_before", "mean_qoe_after", "mse",
                "category_accuracy", "objective"):
        print(f"{key} = {report.summary[key]:.6f}")
    for path in written:
        print(f"wrote {path}")
    return 0


def cmd_serve(args) -> int:
    cfg = _experiment_config(args, reallocation=True)
    ctx = build_context(cfg)
    store = UserContextStore(cfg.ucr_dir or os.path.join(cfg.out_dir, "ucr"))
    server = ToolServer(ctx, store, cfg.alloc)
    if args.stdio:
        serve_stdio(server)
        return 0
    host, _, port = args.serve_addr.rpartition(":")
    try:
        serve_tcp(server, host or "127.0.0.1", int(port))
    except OSError as exc:
        print(f"cannot listen on {args.serve_addr}: {exc}", file=sys.stderr)
        return 1
    return 0


def cmd_eval(args) -> int:
    params = AllocationParams()
    if args.config:
        params = load_config(args.config).alloc
    if args.b_total is not None:
        params = replace(params, total_bandwidth=args.b_total)

    by_method: dict[str, list] = {}
    for path in args.reports:
        for record in read_report_csv(path):
            by_method.setdefault(record.method, []).append(record)
    if not any(by_method.values()):
        print("no records found", file=sys.stderr)
        return 1

    summary = {}
    for method, records in sorted(by_method.items()):
        predicted = [r.predicted_qoe for r in records]
        realized = [r.realized_after for r in records]
        last_epoch = max(r.epoch for r in records)
        final = {r.user: r.bandwidth_hz for r in records if r.epoch == last_epoch}
        per_user = {u: [r.realized_after for r in records if r.user == u]
                    for u in sorted(final)}
        summary[method] = {
            "records": len(records),
            "mse": qoe_mse(predicted, realized),
            "category_accuracy": category_accuracy(predicted, realized),
            "objective": objective(
                [final[u] for u in sorted(final)],
                [sum(v) / len(v) for v in (per_user[u] for u in sorted(final))],
                params),
        }
    print(yaml.safe_dump(summary, sort_keys=True), end="")
    return 0


def cmd_synth(args) -> int:
    path = mixed_mobility_scenario(args.out, seed=args.seed)
    print(f"wrote {path}")
    return 0


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "ingest":
            return cmd_ingest(args)
        if args.command == "simulate":
            return cmd_run(args, reallocation=False)
        if args.command == "allocate":
            return cmd_run(args, reallocation=True)
        if args.command == "serve":
            return cmd_serve(args)
        if args.command == "eval":
            return cmd_eval(args)
        return cmd_synth(args)
    except MarqoeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
