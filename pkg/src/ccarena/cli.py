"""Command-line front end.

    ccarena run --protocol opcot --clients 50 --items 100 --txns 200 --seed 1
    ccarena matrix --config matrix.cfg --out results.csv [--gnuplot]
    ccarena check --history dump.history

Exit codes: 0 all runs clean, 1 configuration error, 2 oracle violation.
"""

import argparse
import sys
from dataclasses import replace

from .core import ConfigError, History, InvalidLogError
from .harness import (
    MatrixConfig,
    OracleViolation,
    metrics_for_run,
    rows_to_csv,
    run_matrix,
    verify_run,
    write_csv,
    write_gnuplot,
)
from .oracle import (
    BRUTE_FORCE_LIMIT,
    brute_force_serializable,
    build_serialization_graph,
    check_commitment_ordering,
    is_acyclic,
)
from .simkit import PROTOCOLS, SimConfig, run_simulation

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_ORACLE = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ccarena",
                                     description="concurrency-control arena")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute one simulation and emit its CSV row")
    run_p.add_argument("--protocol", choices=PROTOCOLS)
    run_p.add_argument("--clients", type=int)
    run_p.add_argument("--items", type=int)
    run_p.add_argument("--txns", type=int)
    run_p.add_argument("--seed", type=int)
    run_p.add_argument("--config", help="flat key=value config file")
    run_p.add_argument("--retries", type=int)
    run_p.add_argument("--out", help="write the CSV here instead of stdout")
    run_p.add_argument("--dump-history", metavar="FILE",
                       help="also write the run's history dump (for `ccarena check`)")

    mx_p = sub.add_parser("matrix", help="run a whole experiment matrix")
    mx_p.add_argument("--config", required=True, help="matrix config file")
    mx_p.add_argument("--out", required=True, help="output CSV path")
    mx_p.add_argument("--workers", type=int, default=1)
    mx_p.add_argument("--gnuplot", action="store_true",
                      help="also emit <out>.dat arranged for plotting")

    ck_p = sub.add_parser("check", help="run the oracle over a dumped history")
    ck_p.add_argument("--history", required=True)
    return parser


def _cmd_run(args) -> int:
    cfg = SimConfig.from_file(args.config) if args.config else SimConfig()
    overrides = {}
    if args.protocol is not None:
        overrides["protocol"] = args.protocol
    if args.clients is not None:
        overrides["n_clients"] = args.clients
    if args.items is not None:
        overrides["n_items"] = args.items
    if args.txns is not None:
        overrides["n_txns"] = args.txns
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.retries is not None:
        overrides["retries"] = args.retries
    cfg = replace(cfg, **overrides)
    cfg.validate()
    result = run_simulation(cfg)
    if args.dump_history:
        with open(args.dump_history, "w", encoding="utf-8") as fh:
            fh.write(result.history.to_text())
    violation = verify_run(result.history, cfg.protocol)
    if violation is not None:
        dump = f"oracle_violation_{cfg.protocol}_seed{cfg.seed}.history"
        with open(dump, "w", encoding="utf-8") as fh:
            fh.write(result.history.to_text())
        print(f"oracle violation: {violation} (history dumped to {dump})", file=sys.stderr)
        return EXIT_ORACLE
    csv_text = rows_to_csv([metrics_for_run(result)])
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(csv_text)
    else:
        sys.stdout.write(csv_text)
    return EXIT_OK


def _cmd_matrix(args) -> int:
    matrix = MatrixConfig.from_file(args.config)
    rows = run_matrix(matrix, workers=max(1, args.workers))
    write_csv(rows, args.out)
    if args.gnuplot:
        write_gnuplot(rows, args.out + ".dat")
    print(f"wrote {len(rows)} rows to {args.out}")
    return EXIT_OK


def _cmd_check(args) -> int:
    with open(args.history, encoding="utf-8") as fh:
        history = History.from_text(fh.read())
    graph = build_serialization_graph(history)
    acyclic = is_acyclic(graph)
    co = check_commitment_ordering(history)
    print(f"committed transactions: {len(graph.nodes)}")
    print(f"serializable (acyclic graph): {'yes' if acyclic else f'NO, cycle {acyclic.cycle}'}")
    print(f"commitment ordered: {'yes' if co else f'NO, violation {co.violation}'}")
    if co.ties:
        print(f"instant ties (directed by commit order): {len(co.ties)}")
    if len(graph.nodes) <= BRUTE_FORCE_LIMIT:
        brute = brute_force_serializable(history)
        print(f"brute-force serializable: {'yes' if brute else 'NO'}")
        if brute != bool(acyclic):
            print("oracle disagreement between graph and brute force!", file=sys.stderr)
            return EXIT_ORACLE
    if not acyclic or not co:
        return EXIT_ORACLE
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "matrix":
            return _cmd_matrix(args)
        return _cmd_check(args)
    except (ConfigError, InvalidLogError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OracleViolation as exc:
        print(f"oracle violation: {exc}", file=sys.stderr)
        return EXIT_ORACLE


if __name__ == "__main__":
    sys.exit(main())
