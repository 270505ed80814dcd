"""`prene-lab` command line: run the simulators and write artifact files.

Subcommands:
    lifespan table | sweep | growth
    replicator run
    soup run
    registry ingest | query

Every run prints a JSON run report to stdout (tool version, echoed
config, RNG algorithm, seed, wall time, artifact paths).  Artifact files
are byte-deterministic for a given command line; the report is not,
because it carries the wall time.  CSV artifacts always have a header
row and LF line endings.

Exit codes: 0 success; 2 usage (bad flag or config value, with the
offender named); 1 IO or input-data failure.
"""

from __future__ import annotations

import argparse
import base64
import binascii
import json
import os
import sys
import time
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Optional

from . import __version__, lifespan, registry, replicator, rng, soup
from .config import (
    ConfigError,
    escape_config_from_text,
    parse_fraction,
    serialize_escape_config,
    serialize_soup_config,
    soup_config_from_text,
)

__all__ = ["main"]


# flag value parsers: argparse reports failures as exit-2 usage errors
# that name the flag

def _u64(text: str) -> int:
    try:
        value = int(text, 10)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("must be an unsigned 64-bit integer")
    return value


def _u32(text: str) -> int:
    try:
        value = int(text, 10)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= value < 2**32:
        raise argparse.ArgumentTypeError("must be an unsigned 32-bit integer")
    return value


def _fraction(text: str) -> Fraction:
    try:
        value = parse_fraction(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    if not 0 <= value <= 1:
        raise argparse.ArgumentTypeError("must lie in [0, 1]")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text, 10)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _threads() -> int:
    raw = os.environ.get("PRENELAB_THREADS", "")
    if not raw:
        return 1
    try:
        n = int(raw, 10)
    except ValueError:
        raise ConfigError(f"PRENELAB_THREADS must be an integer, got {raw!r}")
    if n < 1:
        raise ConfigError("PRENELAB_THREADS must be >= 1")
    return n


# artifact writers: explicit LF endings, header always present

def _write_lines(path: Path, lines: Iterable[str]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes("".join(f"{line}\n" for line in lines).encode("utf-8"))


def _write_table(path: Path, fmt: str, header: list[str], rows: list[list]) -> None:
    if fmt == "csv":
        lines = [",".join(header)]
        lines.extend(",".join(_cell(v) for v in row) for row in rows)
    else:
        lines = [
            json.dumps(
                dict(zip(header, row)), sort_keys=True, separators=(",", ":")
            )
            for row in rows
        ]
    _write_lines(path, lines)


def _cell(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, Fraction):
        return f"{value.numerator}/{value.denominator}"
    return str(value)


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError:
        raise ConfigError(f"{path} is not valid UTF-8")


def _report(args, config_echo: dict, artifacts: list[str], started: float) -> int:
    report = {
        "tool": "prene-lab",
        "version": __version__,
        "subcommand": args.subcommand,
        "rng_algorithm": rng.RNG_ALGORITHM,
        "seed": getattr(args, "seed", None),
        "config": config_echo,
        "wall_time_s": round(time.monotonic() - started, 6),
        "artifacts": artifacts,
    }
    print(json.dumps(report, sort_keys=True))
    return 0


# lifespan

def _ages_text(table: lifespan.LifeTable) -> str:
    parts = [str(a) for a in table.birth_ages]
    if table.periodic is not None:
        first, step = table.periodic
        parts.append(f"{first}+{step}k")
    return ";".join(parts)


def _death_text(table: lifespan.LifeTable) -> str:
    return "inf" if table.death_age is None else str(table.death_age)


def _cmd_lifespan_table(args) -> int:
    started = time.monotonic()
    genes = args.g if args.g else [Fraction(1), Fraction(1, 2)]
    species = [lifespan.TreeSpecies(g) for g in genes]
    census = lifespan.simulate_census(species, args.days)
    rows = [[day, label, count] for day, label, count in census.csv_rows()]
    out = Path(args.out)
    _write_table(out, args.format, ["day", "species_g", "alive"], rows)
    echo = {"days": args.days, "g": [str(g) for g in genes]}
    return _report(args, echo, [str(out)], started)


def _cmd_lifespan_sweep(args) -> int:
    started = time.monotonic()
    grid = [Fraction(i, args.steps) for i in range(args.steps + 1)]
    result = lifespan.optimality_sweep(grid, threads=_threads())
    rows = []
    for sp, table, rate in result.rows:
        g = sp.gene_number
        rows.append(
            [g.numerator, g.denominator, rate.lambda_per_day, _ages_text(table), _death_text(table)]
        )
    out = Path(args.out)
    _write_table(
        out, args.format, ["g_num", "g_den", "lambda", "birth_ages", "death_age"], rows
    )
    echo = {"steps": args.steps, "argmax_g": [sp.label for sp in result.argmax]}
    return _report(args, echo, [str(out)], started)


def _cmd_lifespan_growth(args) -> int:
    started = time.monotonic()
    species = lifespan.TreeSpecies(args.g)
    table = lifespan.life_table(species)
    rate = lifespan.growth_rate(table)
    g = species.gene_number
    rows = [
        [
            g.numerator,
            g.denominator,
            rate.lambda_per_day,
            rate.residual,
            _ages_text(table),
            _death_text(table),
        ]
    ]
    out = Path(args.out)
    _write_table(
        out,
        args.format,
        ["g_num", "g_den", "lambda", "residual", "birth_ages", "death_age"],
        rows,
    )
    return _report(args, {"g": str(g)}, [str(out)], started)


# replicator

def _escape_config_echo(config: replicator.EscapeConfig) -> dict:
    echo = {}
    for line in serialize_escape_config(config).splitlines():
        key, _, value = line.partition(" = ")
        echo[key] = value
    return echo


def _cmd_replicator_run(args) -> int:
    started = time.monotonic()
    text = _read_text(args.config) if args.config else ""
    config = escape_config_from_text(text, master_seed=args.seed)
    report = replicator.run_escape_experiment(config)

    rows = []
    for o in report.outcomes:
        rows.append([o.pair_index, "hot", o.hot_extinction_day, o.hot_peak])
        rows.append([o.pair_index, "fidelity", o.fidelity_extinction_day, o.fidelity_peak])
    out = Path(args.out)
    _write_table(out, args.format, ["seed", "profile", "extinction_day", "peak_pop"], rows)
    artifacts = [str(out)]

    if args.events:
        # full event trace of pair 0, both arms, for inspection
        lines = []
        for profile_name, profile in (
            ("hot", config.hot_profile()),
            ("fidelity", config.fidelity_profile()),
        ):
            state = replicator._run_arm(
                config, profile, rng.stream(config.master_seed, 0), record_events=True
            )
            lines.extend(
                json.dumps(
                    {"pair": 0, "profile": profile_name, **event},
                    sort_keys=True,
                    separators=(",", ":"),
                )
                for event in state.events
            )
        events_path = Path(args.events)
        _write_lines(events_path, lines)
        artifacts.append(str(events_path))

    echo = _escape_config_echo(config)
    echo["hot_wins"] = report.hot_wins
    echo["fidelity_wins"] = report.fidelity_wins
    echo["ties"] = report.ties
    echo["sign_test_p"] = repr(report.p_value)
    return _report(args, echo, artifacts, started)


# soup

def _soup_config_echo(config: soup.SoupConfig) -> dict:
    echo = {}
    for line in serialize_soup_config(config).splitlines():
        key, _, value = line.partition(" = ")
        echo[key] = value
    return echo


def _cmd_soup_run(args) -> int:
    started = time.monotonic()
    text = _read_text(args.config) if args.config else ""
    config = soup_config_from_text(text, master_seed=args.seed)
    out = Path(args.out)

    if args.experiment:
        report = soup.run_catalysis_experiment(config)
        rows = [
            [
                o.replicate,
                o.treatment_free_a,
                o.control_free_a,
                o.treatment_p_count,
                o.control_p_count,
            ]
            for o in report.outcomes
        ]
        _write_table(
            out,
            args.format,
            [
                "replicate",
                "treatment_free_a",
                "control_free_a",
                "treatment_p_count",
                "control_p_count",
            ],
            rows,
        )
        echo = _soup_config_echo(config)
        echo["treatment_wins"] = report.treatment_wins
        echo["control_wins"] = report.control_wins
        echo["ties"] = report.ties
        echo["sign_test_p"] = repr(report.p_value)
        return _report(args, echo, [str(out)], started)

    grid = [config.horizon * j / args.samples for j in range(args.samples + 1)]
    rows = []

    def on_sample(t: float, state: soup.ReactorState) -> None:
        rows.append(
            [
                t,
                state.free_of("A"),
                state.free_of("C"),
                state.free_of("G"),
                state.free_of("U"),
                len(state.seqs),
                state.n_catalysts(),
                state.n_aaa_enders(),
            ]
        )

    state = config.build_state()
    soup.run_until(state, config.horizon, rng.stream(config.master_seed, 0), grid, on_sample)
    _write_table(
        out,
        args.format,
        ["t", "free_A", "free_C", "free_G", "free_U", "n_species", "n_P", "n_AAA_enders"],
        rows,
    )
    echo = _soup_config_echo(config)
    echo["samples"] = args.samples
    return _report(args, echo, [str(out)], started)


# registry

def _load_world(path: str) -> registry.World:
    return registry.World.from_jsonl(_read_text(path))


def _cmd_registry_ingest(args) -> int:
    started = time.monotonic()
    world = _load_world(args.log)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(world.to_jsonl().encode("utf-8"))
    echo = {"log": args.log, "events": len(world.events), "objects": len(world.objects)}
    return _report(args, echo, [str(out)], started)


def _query_content(args) -> bytes:
    if args.content_b64 is not None:
        try:
            return base64.b64decode(args.content_b64, validate=True)
        except (binascii.Error, ValueError):
            raise ConfigError("--content-b64 is not valid base64")
    if args.content is not None:
        return args.content.encode("utf-8")
    raise ConfigError(f"query {args.what!r} needs --content or --content-b64")


def _cmd_registry_query(args) -> int:
    started = time.monotonic()
    world = _load_world(args.log)
    t = args.at
    try:
        world._resolve_t(t)
    except ValueError as exc:
        raise ConfigError(str(exc), key="--at") from None

    if args.what == "longest-shared":
        objects = world.alive_objects(t)
        best = registry.longest_shared(objects)
        result = {
            "longest_shared_b64": base64.b64encode(best).decode("ascii"),
            "length": len(best),
            "alive_objects": len(objects),
        }
    else:
        prene = registry.Prene.exact(_query_content(args))
        if args.what == "copy-number":
            result = {"copy_number": registry.copy_number(world, prene, t)}
        elif args.what == "classify":
            flags = registry.classify(world, prene, t)
            result = {"gene": flags.gene, "meme": flags.meme, "turene": flags.turene}
        elif args.what == "extinct":
            result = {"extinct": registry.extinct(world, prene, t)}
        else:  # lineage
            nodes, edges = registry.lineage(world, prene)
            result = {"nodes": nodes, "edges": [list(e) for e in edges]}

    artifacts = []
    line = json.dumps(result, sort_keys=True, separators=(",", ":"))
    if args.out:
        _write_lines(Path(args.out), [line])
        artifacts.append(args.out)
    else:
        print(line)
    echo = {"log": args.log, "what": args.what, "at": t}
    return _report(args, echo, artifacts, started)


# parser wiring

def _add_out_format(parser: argparse.ArgumentParser, required: bool = True) -> None:
    parser.add_argument("--out", required=required, help="artifact file path")
    parser.add_argument(
        "--format", choices=("csv", "jsonl"), default="csv", help="artifact serialization"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prene-lab",
        description="Deterministic simulators for four desk-scale evolution models.",
    )
    parser.add_argument("--version", action="version", version=f"prene-lab {__version__}")
    top = parser.add_subparsers(dest="subcommand", required=True)

    p_life = top.add_parser("lifespan", help="tree species census and growth rates")
    life = p_life.add_subparsers(dest="action", required=True)

    p_table = life.add_parser("table", help="per-day alive counts for chosen gene-numbers")
    p_table.add_argument("--days", type=_u32, default=30, help="last simulated day")
    p_table.add_argument(
        "--g",
        type=_fraction,
        action="append",
        help="gene-number p/q; repeatable; default: 1 and 1/2",
    )
    _add_out_format(p_table)
    p_table.set_defaults(func=_cmd_lifespan_table, subcommand="lifespan table")

    p_sweep = life.add_parser("sweep", help="growth rate over an even gene-number grid")
    p_sweep.add_argument("--steps", type=_positive_int, default=20, help="grid is i/steps")
    _add_out_format(p_sweep)
    p_sweep.set_defaults(func=_cmd_lifespan_sweep, subcommand="lifespan sweep")

    p_growth = life.add_parser("growth", help="life table and growth rate of one species")
    p_growth.add_argument("--g", type=_fraction, required=True, help="gene-number p/q")
    _add_out_format(p_growth)
    p_growth.set_defaults(func=_cmd_lifespan_growth, subcommand="lifespan growth")

    p_rep = top.add_parser("replicator", help="mutator vs high-fidelity escape experiment")
    rep = p_rep.add_subparsers(dest="action", required=True)
    p_rep_run = rep.add_parser("run", help="paired escape experiment")
    p_rep_run.add_argument("--seed", type=_u64, default=0, help="master seed (u64)")
    p_rep_run.add_argument("--config", help="key = value scenario file")
    p_rep_run.add_argument("--events", help="also write pair 0's full JSONL event trace here")
    _add_out_format(p_rep_run)
    p_rep_run.set_defaults(func=_cmd_replicator_run, subcommand="replicator run")

    p_soup = top.add_parser("soup", help="stochastic polymer reactor")
    soup_sub = p_soup.add_subparsers(dest="action", required=True)
    p_soup_run = soup_sub.add_parser("run", help="time series, or paired experiment")
    p_soup_run.add_argument("--seed", type=_u64, default=0, help="master seed (u64)")
    p_soup_run.add_argument("--config", help="key = value scenario file")
    p_soup_run.add_argument(
        "--samples", type=_positive_int, default=50, help="time-series grid points"
    )
    p_soup_run.add_argument(
        "--experiment",
        action="store_true",
        help="paired catalysis experiment instead of a single time series",
    )
    _add_out_format(p_soup_run)
    p_soup_run.set_defaults(func=_cmd_soup_run, subcommand="soup run")

    p_reg = top.add_parser("registry", help="copy-number bookkeeping over event logs")
    reg = p_reg.add_subparsers(dest="action", required=True)

    p_ingest = reg.add_parser("ingest", help="validate a log and re-serialize canonically")
    p_ingest.add_argument("--log", required=True, help="JSONL event log to read")
    p_ingest.add_argument("--out", required=True, help="canonical JSONL output path")
    p_ingest.set_defaults(func=_cmd_registry_ingest, subcommand="registry ingest")

    p_query = reg.add_parser("query", help="ask one question of a log")
    p_query.add_argument("--log", required=True, help="JSONL event log to read")
    p_query.add_argument(
        "--what",
        required=True,
        choices=("copy-number", "classify", "extinct", "lineage", "longest-shared"),
    )
    p_query.add_argument("--content", help="query content as UTF-8 text")
    p_query.add_argument("--content-b64", help="query content as base64 bytes")
    p_query.add_argument("--at", type=int, default=None, help="event-time t; default: now")
    p_query.add_argument("--out", help="write the JSON result here instead of stdout")
    p_query.set_defaults(func=_cmd_registry_query, subcommand="registry query")

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"prene-lab: config error: {exc}", file=sys.stderr)
        return 2
    except registry.LogError as exc:
        print(f"prene-lab: log error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"prene-lab: io error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
