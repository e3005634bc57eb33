"""Command line front door: generate scenarios, run benchmarks, serve episodes.

Exit codes: 0 on success, 2 for configuration problems (bad arguments,
unknown presets or policies, unreadable files), 3 for runtime failures.
"""

from __future__ import annotations

import argparse
import sys

from . import generate
from .bench import (
    POLICY_NAMES,
    BenchConfig,
    emit_table,
    parse_config_file,
    run_benchmark,
)

CONFIG_ERROR = 2
RUNTIME_ERROR = 3


def parse_seeds(text: str) -> list[int]:
    """Either a single seed ("7") or an inclusive range ("0..99")."""
    if ".." in text:
        lo, hi = text.split("..", 1)
        start, end = int(lo), int(hi)
        if end < start:
            raise ValueError(f"empty seed range {text!r}")
        return list(range(start, end + 1))
    return [int(text)]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dpdpsim",
        description="Simulator, baselines, and benchmark harness for dynamic pickup and delivery",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a synthetic scenario file")
    gen.add_argument("--preset", required=True, help="synthetic preset name")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="output scenario file")

    run = sub.add_parser("run", help="run a policy over a batch of seeds")
    source = run.add_mutually_exclusive_group(required=True)
    source.add_argument("--scenario", help="scenario file to replay for every seed")
    source.add_argument("--preset", help="synthetic preset regenerated per seed")
    run.add_argument("--policy", required=True, choices=POLICY_NAMES)
    run.add_argument("--seeds", required=True, help='seed list: "7" or "0..99"')
    run.add_argument("--out", help="write the result table here")
    run.add_argument("--format", choices=("csv", "markdown"), default="csv")
    run.add_argument("--jobs", type=int, default=1)
    run.add_argument("--config", help="key=value overrides, one per line")
    run.add_argument(
        "--time-limit", type=float, default=None, help="per-episode seconds before a row is marked timed out"
    )

    serve = sub.add_parser("serve", help="serve episodes over a line protocol")
    serve.add_argument(
        "--transport", default="stdio", help='"stdio" or "tcp:PORT"'
    )
    return parser


class ConfigError(Exception):
    pass


def _cmd_gen(args) -> int:
    try:
        scenario = generate.generate_synthetic(args.preset, seed=args.seed)
    except (ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc
    try:
        generate.save_scenario(scenario, args.out)
    except OSError as exc:
        raise ConfigError(f"cannot write {args.out}: {exc}") from exc
    print(f"wrote {scenario.name} to {args.out}")
    return 0


def _cmd_run(args) -> int:
    try:
        overrides = parse_config_file(args.config) if args.config else {}
        config = BenchConfig(
            policy=args.policy,
            seeds=parse_seeds(args.seeds),
            preset=args.preset,
            scenario_path=args.scenario,
            output=args.out,
            jobs=args.jobs,
            time_limit=args.time_limit,
            overrides=overrides,
        )
        if args.preset is not None:
            generate.resolve_spec(args.preset)
        else:
            generate.load_scenario(args.scenario)
    except (ValueError, KeyError, OSError) as exc:
        raise ConfigError(str(exc)) from exc
    table = run_benchmark(config)
    text = emit_table(table, args.format, path=args.out)
    if args.out is None:
        sys.stdout.write(text)
    else:
        print(f"wrote {len(table.rows)} rows to {args.out}")
    return 0


def _cmd_serve(args) -> int:
    from . import server

    if args.transport == "stdio":
        server.serve_stdio()
        return 0
    if args.transport.startswith("tcp:"):
        try:
            port = int(args.transport.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"bad tcp port in {args.transport!r}")
        srv = server.make_tcp_server(port)
        with srv:
            print(f"listening on tcp port {srv.server_address[1]}", file=sys.stderr)
            srv.serve_forever()
        return 0
    raise ConfigError(f"unknown transport {args.transport!r}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "gen":
            return _cmd_gen(args)
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_serve(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return CONFIG_ERROR
    except KeyboardInterrupt:
        return 0
    except Exception as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
