"""``follow-sim`` command line.

stdout carries machine-readable lines only; diagnostics go to stderr.
Exit codes: 0 success, 1 trial failure, 2 usage/config/protocol error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import socket
import sys
from typing import List, Optional

from .harness import aggregate, read_results_csv, render_table, run_campaign, run_trial, success_table
from .results import SUCCESS, HarnessError, TrialResult
from .scenario import ACTIVATION_DISTANCES, ScenarioError, load_scenario_file
from .stats import fisher_exact
from .tracking.trackers import TRACKER_KINDS
from .transport import (
    TransportError,
    canonical_json,
    client_session,
    open_server_socket,
    parse_endpoint,
    serve_forever,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        # argparse's own exit code is already 2
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _tracker(name: str) -> str:
    if name not in TRACKER_KINDS:
        raise argparse.ArgumentTypeError(f"invalid tracker {name!r}; valid names: {', '.join(TRACKER_KINDS)}")
    return name


def _distances(text: str) -> List[float]:
    try:
        values = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad distance list {text!r}") from None
    for v in values:
        if v not in ACTIVATION_DISTANCES:
            raise argparse.ArgumentTypeError(f"distance {v} not in {{1.5,2.5,3.5}}")
    return values


def _trackers(text: str) -> List[str]:
    if text == "all":
        return list(TRACKER_KINDS)
    return [_tracker(t.strip()) for t in text.split(",") if t.strip()]


def _default_jobs() -> int:
    try:
        return max(1, int(os.environ.get("FOLLOW_SIM_JOBS", "1")))
    except ValueError:
        return 1


def _emit_result(r: TrialResult) -> int:
    print(canonical_json(r.to_dict()).decode("utf-8"))
    if r.outcome == SUCCESS:
        return EXIT_OK
    if r.outcome == "Failure":
        return EXIT_FAIL
    print(f"trial aborted after {r.duration_s} s", file=sys.stderr)
    return EXIT_USAGE


def _connect_and_run(endpoint: str, tracker: str, seed, scenario) -> int:
    host, port = parse_endpoint(endpoint)
    try:
        with socket.create_connection((host, port), timeout=30) as sock:
            result = client_session(sock, tracker, seed, scenario)
    except OSError as e:
        print(f"connection error: {e}", file=sys.stderr)
        return EXIT_USAGE
    return _emit_result(result)


def cmd_run(args) -> int:
    scenario = load_scenario_file(args.scenario)
    if args.net:
        return _connect_and_run(args.net, args.tracker, args.seed, scenario)
    return _emit_result(run_trial(scenario, args.tracker, args.seed))


def cmd_client(args) -> int:
    scenario = load_scenario_file(args.scenario) if args.scenario else None
    return _connect_and_run(args.connect, args.tracker, args.seed, scenario)


def cmd_serve(args) -> int:
    scenario = load_scenario_file(args.scenario) if args.scenario else None
    try:
        srv = open_server_socket(args.host, args.port)
    except OSError as e:
        print(f"cannot listen on {args.host}:{args.port}: {e}", file=sys.stderr)
        return EXIT_USAGE
    with srv:
        host, port = srv.getsockname()[:2]
        print(f"listening on {host}:{port}", file=sys.stderr, flush=True)

        def report(r: TrialResult) -> None:
            print(canonical_json(r.to_dict()).decode("utf-8"), flush=True)

        try:
            serve_forever(srv, scenario, args.sessions or None, report)
        except KeyboardInterrupt:
            pass
    return EXIT_OK


def cmd_campaign(args) -> int:
    results = run_campaign(args.distances, args.trackers, args.trials, args.seed, args.out, args.jobs)
    sys.stdout.write(render_table(aggregate(results), "markdown"))
    a, b, c, d = success_table(results)
    if a + b and c + d:
        p = fisher_exact(a, b, c, d)
        print(
            f"DL trackers {a}/{a + b} vs baseline {c}/{c + d} successes; Fisher two-sided p = {p:.4g}",
            file=sys.stderr,
        )
    print(f"wrote {len(results)} rows to {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_table(args) -> int:
    results, complete = read_results_csv(args.results)
    if not complete:
        print(f"warning: {args.results} is marked INCOMPLETE", file=sys.stderr)
    sys.stdout.write(render_table(aggregate(results), args.format))
    return EXIT_OK


def cmd_fisher(args) -> int:
    print(repr(fisher_exact(args.a, args.b, args.c, args.d)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="follow-sim", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log diagnostics to stderr")
    sub = p.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run one trial")
    run.add_argument("--scenario", required=True)
    run.add_argument("--tracker", type=_tracker, required=True)
    run.add_argument("--seed", type=int, default=None, help="defaults to the scenario seed")
    run.add_argument("--net", metavar="HOST:PORT", help="run as client against a remote server")
    run.set_defaults(func=cmd_run)

    camp = sub.add_parser("campaign", help="run the distance x tracker x trial grid")
    camp.add_argument("--distances", type=_distances, default=list(ACTIVATION_DISTANCES))
    camp.add_argument("--trackers", type=_trackers, default=list(TRACKER_KINDS))
    camp.add_argument("--trials", type=int, default=10)
    camp.add_argument("--seed", type=int, default=0, help="base seed; trial i uses base+i")
    camp.add_argument("--out", default="results.csv")
    camp.add_argument("--jobs", type=int, default=_default_jobs())
    camp.set_defaults(func=cmd_campaign)

    serve = sub.add_parser("serve", help="host the robot side of sessions")
    serve.add_argument("--port", type=int, required=True)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--scenario", help="used when a client sends no scenario")
    serve.add_argument("--sessions", type=int, default=0, help="stop after N sessions (0 = run until killed)")
    serve.set_defaults(func=cmd_serve)

    client = sub.add_parser("client", help="run the perception side against a server")
    client.add_argument("--connect", required=True, metavar="HOST:PORT")
    client.add_argument("--tracker", type=_tracker, required=True)
    client.add_argument("--seed", type=int, default=None)
    client.add_argument("--scenario", help="scenario to request; otherwise the server's default")
    client.set_defaults(func=cmd_client)

    table = sub.add_parser("table", help="render a results CSV as a success-rate table")
    table.add_argument("--results", required=True)
    table.add_argument("--format", choices=("markdown", "csv"), default="markdown")
    table.set_defaults(func=cmd_table)

    fisher = sub.add_parser("fisher", help="two-sided Fisher exact test on [[a,b],[c,d]]")
    for name in "abcd":
        fisher.add_argument(name, type=int)
    fisher.set_defaults(func=cmd_fisher)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr)
    try:
        return args.func(args)
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
    except (ScenarioError, HarnessError, TransportError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
