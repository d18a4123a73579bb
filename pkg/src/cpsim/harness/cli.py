"""Command-line interface: run, sweep, attacks, risk, replay."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ..risk import evaluate_catalog, load_builtin_catalog, load_catalog_file
from .analysis import attack_catalog_lines, replay_trace, sweep_redundancy_tension
from .config import ConfigError, load_scenario
from .runner import run_scenario

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2


def _cmd_run(args) -> int:
    try:
        config = load_scenario(args.scenario)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    metrics, trace = run_scenario(config, seed_override=args.seed)
    out_dir = Path(args.out) if args.out else Path(f"out/{config.name}-seed{metrics.seed}")
    from .report import write_run_outputs

    write_run_outputs(metrics, trace, out_dir, figures=not args.no_figures)
    print(f"scenario   : {config.name}")
    print(f"seed       : {metrics.seed}")
    print(f"trace hash : {metrics.trace_hash}")
    print(f"mean CBR   : {metrics.mean_cbr:.3f}")
    print(f"sent/accepted/rejected: {metrics.sent_envelopes}/{metrics.accepted_envelopes}/{metrics.rejected_envelopes}")
    print(f"MBRs       : {metrics.mbr_counts or 'none'}")
    for a in metrics.attacks:
        status = f"detected at +{a.time_to_detection_ms} ms" if a.detected else "not detected"
        print(f"attack {a.attack_id:10} by {a.attacker}: {status}")
    print(f"outputs in : {out_dir}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    try:
        config = load_scenario(args.scenario)
        thresholds = [float(x) for x in args.thresholds.split(",") if x != ""]
        if not thresholds:
            raise ConfigError("no thresholds given")
    except (ConfigError, OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        rows = sweep_redundancy_tension(config, thresholds, seeds=args.seeds)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = Path(args.out) if args.out else Path(f"out/{config.name}-sweep")
    from .report import write_sweep_outputs

    write_sweep_outputs(rows, out_dir, figures=not args.no_figures)
    print(f"{'threshold':>9} {'D4 rate':>8} {'mean CBR':>9}")
    for row in rows:
        print(f"{row.cbr_threshold:9.2f} {row.d4_detection_rate:8.3f} {row.mean_cbr:9.3f}")
    print(f"outputs in : {out_dir}")
    return EXIT_OK


def _cmd_attacks(_args) -> int:
    for line in attack_catalog_lines():
        print(line)
    return EXIT_OK


def _cmd_risk(args) -> int:
    try:
        if args.catalog:
            rows, claimed = load_catalog_file(args.catalog)
        else:
            rows, claimed = load_builtin_catalog()
        report = evaluate_catalog(rows, claimed)
    except (OSError, ValueError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    from .report import write_risk_outputs

    out_dir = Path(args.out) if args.out else Path("out/risk")
    text = write_risk_outputs(report, out_dir, figures=not args.no_figures)
    print(text)
    print(f"outputs in : {out_dir}")
    return EXIT_OK


def _cmd_replay(args) -> int:
    try:
        lines = Path(args.trace).read_text(encoding="utf-8").splitlines()
        summary = replay_trace([l for l in lines if l.strip()])
    except (OSError, ValueError) as exc:
        print(f"replay error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"scenario   : {summary.header.get('name')}")
    print(f"records    : {summary.records}")
    print(f"sends/recvs: {summary.sends}/{summary.recvs}")
    print(f"verdicts   : {summary.verdicts}")
    print(f"MBRs       : {summary.mbrs} (evidence chain {'ok' if summary.evidence_ok else 'BROKEN'})")
    print(f"trace hash : {summary.trace_hash} ({'ok' if summary.hash_ok else 'MISMATCH'})")
    for sid, transitions in sorted(summary.eebl_transitions.items()):
        states = ", ".join(f"{e['state']}@{e['t']}" for e in transitions)
        print(f"eebl {sid}: {states}")
    if not (summary.hash_ok and summary.evidence_ok):
        return EXIT_RUNTIME
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cpsim",
        description="Deterministic V2X collective-perception simulator with attack injection and misbehavior detection.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario and write trace, metrics, and figures")
    p_run.add_argument("scenario", help="scenario YAML file")
    p_run.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.add_argument("--no-figures", action="store_true", help="skip figure rendering")
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="redundancy-mitigation threshold sweep")
    p_sweep.add_argument("scenario", help="base scenario YAML file (needs a D4-detectable attack)")
    p_sweep.add_argument("--thresholds", required=True, help="comma-separated CBR thresholds, e.g. 0,0.2,0.4,0.6,1.0")
    p_sweep.add_argument("--seeds", type=int, default=20, help="seeds per threshold")
    p_sweep.add_argument("--out", default=None)
    p_sweep.add_argument("--no-figures", action="store_true")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_attacks = sub.add_parser("attacks", help="list the attack catalog")
    p_attacks.set_defaults(func=_cmd_attacks)

    p_risk = sub.add_parser("risk", help="evaluate the risk catalog")
    p_risk.add_argument("catalog", nargs="?", default=None, help="catalog JSON (defaults to the built-in one)")
    p_risk.add_argument("--out", default=None)
    p_risk.add_argument("--no-figures", action="store_true")
    p_risk.set_defaults(func=_cmd_risk)

    p_replay = sub.add_parser("replay", help="verify and summarize a recorded trace")
    p_replay.add_argument("trace", help="trace.jsonl produced by run")
    p_replay.set_defaults(func=_cmd_replay)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
