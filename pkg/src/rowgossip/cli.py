"""Command-line entry point.

Subcommands: ``metrics``, ``consensus``, ``speedup``, ``mg-compare`` and
``verify``. Flags override config-file keys; the base seed falls back to
the ROWGOSSIP_SEED environment variable. Exit codes: 0 success, 1
invariant-suite failure, 2 configuration error, 3 numerical error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import config as defaults
from . import harness
from .errors import ConfigError, ConvergenceError, RowGossipError, RunAborted, SmallDiagonalError

EXIT_OK = 0
EXIT_INVARIANT = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _env_seed():
    raw = os.environ.get("ROWGOSSIP_SEED")
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"ROWGOSSIP_SEED must be an integer, got {raw!r}") from None


def _add_common(parser):
    parser.add_argument("--config", help="INI config file; flags override its keys")
    parser.add_argument("--seed", type=int, help="base seed (default: ROWGOSSIP_SEED or 42)")
    parser.add_argument("--out", help="output directory for CSV/JSON records")


def _add_topology(parser):
    parser.add_argument("--topology", dest="topo_kind", help="exp|ring|grid|geometric|nearest|complete|file")
    parser.add_argument("--n", type=int, help="node count")
    parser.add_argument("--rows", type=int, help="grid rows")
    parser.add_argument("--cols", type=int, help="grid cols")
    parser.add_argument("--radius", type=float, help="geometric-graph radius")
    parser.add_argument("--knn", type=int, help="nearest-neighbor degree")
    parser.add_argument("--path", dest="topo_path", help="matrix CSV for --topology file")
    parser.add_argument("--topo-seed", dest="topo_seed", type=int, help="topology seed")


def build_parser():
    parser = argparse.ArgumentParser(prog="rowgossip", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_metrics = sub.add_parser("metrics", help="print spectral diagnostics as JSON")
    _add_common(p_metrics)
    _add_topology(p_metrics)

    p_cons = sub.add_parser("consensus", help="diagonal-corrected consensus curves")
    _add_common(p_cons)
    _add_topology(p_cons)
    p_cons.add_argument("--rounds", dest="total_rounds", type=int, help="gossip rounds to trace")
    p_cons.add_argument("--dim", type=int, help="state dimension")

    p_speed = sub.add_parser("speedup", help="gradient-noise averaging across network sizes")
    _add_common(p_speed)
    _add_topology(p_speed)
    p_speed.add_argument("--nodes", help="comma list of node counts, e.g. 1,4,16")
    p_speed.add_argument("--sigma", type=float, help="injected gradient-noise level")
    p_speed.add_argument("--rounds", dest="total_rounds", type=int, help="communication budget")
    p_speed.add_argument("--reps", dest="repetitions", type=int, help="seeds per node count")
    p_speed.add_argument("--n-alpha", dest="n_alpha", type=float, help="fixed n*alpha step rule")
    p_speed.add_argument("--record-every", dest="record_every", type=int)

    p_mg = sub.add_parser("mg-compare", help="vanilla vs multi-gossip at equal budget")
    _add_common(p_mg)
    _add_topology(p_mg)
    p_mg.add_argument("--R", dest="rounds", help='comma list of per-iteration rounds, e.g. "1,5,auto"')
    p_mg.add_argument("--rounds", dest="total_rounds", type=int, help="communication budget")
    p_mg.add_argument("--sigma", type=float, help="injected gradient-noise level")
    p_mg.add_argument("--reps", dest="repetitions", type=int, help="seeds per rounds entry")
    p_mg.add_argument("--alpha", type=float, help="step size override for every entry")
    p_mg.add_argument("--record-every", dest="record_every", type=int)

    p_verify = sub.add_parser("verify", help="run the invariant suite")
    _add_common(p_verify)
    _add_topology(p_verify)
    return parser


_KIND_BY_COMMAND = {
    "metrics": "metrics",
    "consensus": "consensus",
    "speedup": "speedup",
    "mg-compare": "mg-compare",
    "verify": "invariants",
}

_DEFAULTS_BY_COMMAND = {
    "consensus": {"total_rounds": "40", "dim": "3"},
    "speedup": {"sigma": "1.0", "n_alpha": "0.512", "total_rounds": "3000", "record_every": "10"},
    "mg-compare": {
        "topo_kind": "ring",
        "n": "16",
        "rounds": "1,auto",
        "total_rounds": "7000",
        "sigma": "1.0",
        "record_every": "10",
    },
}


def config_from_args(args):
    overrides = {}
    for key in (
        "topo_kind",
        "n",
        "rows",
        "cols",
        "radius",
        "knn",
        "topo_path",
        "topo_seed",
        "nodes",
        "sigma",
        "total_rounds",
        "repetitions",
        "n_alpha",
        "alpha",
        "rounds",
        "record_every",
        "seed",
        "out",
        "dim",
    ):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = str(value)
    env_seed = _env_seed()
    if "seed" not in overrides and env_seed is not None:
        overrides["seed"] = str(env_seed)
    overrides["kind"] = _KIND_BY_COMMAND[args.command]

    # precedence: flags > config file > per-command defaults > dataclass defaults
    mapping = dict(_DEFAULTS_BY_COMMAND.get(args.command, {}))
    if args.config:
        mapping.update(harness.read_config_mapping(args.config))
    mapping.update(overrides)
    return harness.ExperimentConfig.from_dict(mapping)


def _emit_records(records, cfg, default_dir):
    out_dir = cfg.out or default_dir
    paths = [record.write(out_dir) for record in records]
    summary = {record.name: record.summary for record in records}
    harness.write_json(os.path.join(out_dir, "summary.json"), {"config": cfg.as_dict(), "runs": summary})
    return out_dir, paths


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        if args.command == "metrics":
            print(json.dumps(harness.run_metrics(cfg), indent=2, sort_keys=True))
            return EXIT_OK
        if args.command == "consensus":
            records = harness.run_consensus_experiment(cfg)
            out_dir, _ = _emit_records(records, cfg, "consensus_out")
            print(f"wrote {len(records)} consensus records to {out_dir}")
            return EXIT_OK
        if args.command == "speedup":
            records = harness.run_speedup_experiment(cfg)
            out_dir, _ = _emit_records(records, cfg, "speedup_out")
            for record in records:
                s = record.summary
                print(
                    f"n={s['n']}: plateau {s['plateau_mean']:.6g} "
                    f"(se {s['plateau_se']:.2g})"
                )
            print(f"wrote records to {out_dir}")
            return EXIT_OK
        if args.command == "mg-compare":
            records = harness.run_mg_compare(cfg)
            out_dir, _ = _emit_records(records, cfg, "mg_compare_out")
            for record in records:
                s = record.summary
                print(
                    f"R={s['rounds_label']} (={s['rounds_per_iter']}): final objective "
                    f"{s['final_mean']:.6g}, aborted {s['aborted']}/{cfg.repetitions}"
                )
            print(f"wrote records to {out_dir}")
            return EXIT_OK
        if args.command == "verify":
            ok, report = harness.run_invariant_suite(cfg)
            out_dir = cfg.out or "."
            os.makedirs(out_dir, exist_ok=True)
            harness.write_json(os.path.join(out_dir, "invariant_report.json"), report)
            failed = [c for c in report["checks"] if not c["pass"]]
            print(f"{len(report['checks']) - len(failed)}/{len(report['checks'])} checks passed")
            for check in failed:
                print(f"FAIL {check['topology']}:{check['check']}")
            return EXIT_OK if ok else EXIT_INVARIANT
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SmallDiagonalError, ConvergenceError, RunAborted) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except RowGossipError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
