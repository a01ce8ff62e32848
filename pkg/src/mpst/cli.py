"""Command-line interface.

One command per invocation, reproducible by construction: every verdict
is a function of the input files, the bounds, and the seed, and JSON
reports are emitted with sorted keys so identical runs are byte-identical.
Exit codes: 0 the check passed, 1 the check produced a finding (not well
formed, projection failed, not live, unsound/incomplete, flawed class,
bound exhausted), 2 the input could not be parsed or the usage was wrong.

File formats: `.gt` files hold one global type, `.mps` files hold one
session environment (`role : type` lines); both allow `//` comments.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass

import click

from . import machine, projector, runtime, tracelang, verifier
from .syntax import (
    DuplicateRoleError,
    GAction,
    Interaction,
    NotSessionTypeError,
    ParseError,
    SelfMessageError,
    UnguardedRecursionError,
    default_max_len,
    parse_global_type,
    parse_session_env,
    print_global_type,
    print_session_env,
)

_INPUT_ERRORS = (
    ParseError,
    SelfMessageError,
    DuplicateRoleError,
    UnguardedRecursionError,
    NotSessionTypeError,
    machine.MergeError,
    OSError,
)


@dataclass(frozen=True, slots=True)
class RunConfig:
    """Bounds and output settings for one invocation."""

    max_len: int | None
    buf_bound: int
    depth_bound: int
    budget: int
    seed: int
    as_json: bool

    def resolved_max_len(self, g) -> int:
        return self.max_len if self.max_len is not None else default_max_len(g)


def _fmt_letter(letter: Interaction) -> str:
    return print_global_type(GAction(letter))


def _fmt_location(location) -> str | None:
    if location is None:
        return None
    try:
        return print_global_type(location)
    except Exception:
        return str(location)


def _fmt_word(word) -> str:
    return " ; ".join(_fmt_letter(x) for x in word) if word else "(empty)"


def _word_json(word):
    return [_fmt_letter(x) for x in word]


def _emit(report: dict, as_json: bool, lines: list[str]) -> None:
    if as_json:
        click.echo(json.dumps({"schema": 1, **report}, sort_keys=True, indent=2))
    else:
        for line in lines:
            click.echo(line)


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _load_global(path: str):
    return parse_global_type(_read(path))


def _load_env(path: str):
    return parse_session_env(_read(path))


def _dump_dot(automaton: tracelang.TraceAutomaton, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(automaton.to_dot())


_common = [
    click.option("--max-len", type=int, default=None, help="Trace length bound (default: 2·interactions + 4)."),
    click.option("--buf-bound", type=int, default=runtime.DEFAULT_BUF_BOUND, show_default=True, help="Buffer capacity per channel."),
    click.option("--depth", "depth_bound", type=int, default=runtime.DEFAULT_DEPTH_BOUND, show_default=True, help="Configuration exploration bound."),
    click.option("--budget", type=int, default=projector.DEFAULT_AND_BUDGET, show_default=True, help="Rewrite candidates for unordered-composition elimination."),
    click.option("--seed", type=int, default=0, show_default=True, help="Seed for randomized commands."),
    click.option("--json", "as_json", is_flag=True, help="Emit a JSON report."),
]


def _with_common(cmd):
    for opt in reversed(_common):
        cmd = opt(cmd)
    return cmd


def _config(max_len, buf_bound, depth_bound, budget, seed, as_json) -> RunConfig:
    for name, value in (
        ("--max-len", max_len),
        ("--buf-bound", buf_bound),
        ("--depth", depth_bound),
        ("--budget", budget),
    ):
        if value is not None and value <= 0:
            raise click.UsageError(f"{name} must be positive")
    return RunConfig(max_len, buf_bound, depth_bound, budget, seed, as_json)


@click.group()
def cli() -> None:
    """Parse, check, project, simulate, and verify multiparty protocols."""


@cli.command()
@click.argument("path", type=click.Path(exists=True, dir_okay=False, allow_dash=True))
@click.option("--dot", type=click.Path(dir_okay=False), default=None, help="Write the trace automaton in DOT format.")
@_with_common
def check(path, dot, max_len, buf_bound, depth_bound, budget, seed, as_json):
    """Decide well-formedness of the global type in PATH."""
    cfg = _config(max_len, buf_bound, depth_bound, budget, seed, as_json)
    g = _load_global(path)
    if dot:
        _dump_dot(tracelang.compile_traces(g), dot)
    verdict = tracelang.well_formed(g)
    if verdict:
        _emit(
            {"command": "check", "input": path, "well_formed": True},
            cfg.as_json,
            ["WellFormed"],
        )
        sys.exit(0)
    _emit(
        {
            "command": "check",
            "input": path,
            "well_formed": False,
            "witness": _word_json(verdict.witness),
            "position": verdict.position,
        },
        cfg.as_json,
        [
            "NotWellFormed",
            f"witness: {_fmt_word(verdict.witness)}",
            f"swap at position: {verdict.position}",
        ],
    )
    sys.exit(1)


@cli.command()
@click.argument("path", type=click.Path(exists=True, dir_okay=False, allow_dash=True))
@_with_common
def project(path, max_len, buf_bound, depth_bound, budget, seed, as_json):
    """Project the global type in PATH onto each participant."""
    cfg = _config(max_len, buf_bound, depth_bound, budget, seed, as_json)
    g = _load_global(path)
    try:
        env = projector.project_top(g, budget=cfg.budget)
    except projector.ProjectionError as exc:
        where = _fmt_location(exc.location)
        _emit(
            {
                "command": "project",
                "input": path,
                "projected": False,
                "error": exc.kind,
                "detail": exc.detail,
                "location": where,
            },
            cfg.as_json,
            [f"ProjectionError: {exc.kind}", f"detail: {exc.detail}"]
            + ([f"at: {where}"] if where else []),
        )
        sys.exit(1)
    text = print_session_env(env)
    _emit(
        {
            "command": "project",
            "input": path,
            "projected": True,
            "environment": {r: line.split(" : ", 1)[1] for r, line in zip(sorted(env), text.splitlines())},
        },
        cfg.as_json,
        [text],
    )
    sys.exit(0)


@cli.command()
@click.argument("path", type=click.Path(exists=True, dir_okay=False, allow_dash=True))
@click.option("--traces", "trace_count", type=int, default=10, show_default=True, help="How many sample traces to print.")
@_with_common
def simulate(path, trace_count, max_len, buf_bound, depth_bound, budget, seed, as_json):
    """Run the session environment in PATH and report liveness."""
    cfg = _config(max_len, buf_bound, depth_bound, budget, seed, as_json)
    env = _load_env(path)
    bound = cfg.max_len if cfg.max_len is not None else 2 * len(env) + 8
    verdict = runtime.is_live(env, cfg.buf_bound, cfg.depth_bound)
    name = type(verdict).__name__
    report: dict = {
        "command": "simulate",
        "input": path,
        "verdict": name,
        "max_len": bound,
        "buf_bound": cfg.buf_bound,
        "depth_bound": cfg.depth_bound,
    }
    lines = [name]
    if isinstance(verdict, runtime.NotLive):
        steps = len(verdict.witness) - 1
        report["witness_steps"] = steps
        lines.append(f"witness: {steps} step(s) to a configuration that cannot succeed")
    samples = sorted(
        runtime.session_traces(env, bound, cfg.buf_bound, cfg.depth_bound),
        key=lambda w: (len(w), tuple(map(str, w))),
    )
    report["traces"] = [_word_json(w) for w in samples[:trace_count]]
    report["trace_count"] = len(samples)
    lines.append(f"traces up to length {bound}: {len(samples)}")
    lines.extend(f"  {_fmt_word(w)}" for w in samples[:trace_count])
    if len(samples) > trace_count:
        lines.append(f"  ... ({len(samples) - trace_count} more; raise --traces to list them)")
    _emit(report, cfg.as_json, lines)
    sys.exit(0 if isinstance(verdict, runtime.Live) else 1)


@cli.command()
@click.argument("gt_path", type=click.Path(exists=True, dir_okay=False, allow_dash=True))
@click.argument("env_path", type=click.Path(exists=True, dir_okay=False, allow_dash=True), required=False)
@_with_common
def verify(gt_path, env_path, max_len, buf_bound, depth_bound, budget, seed, as_json):
    """Check that an environment implements the global type in GT_PATH.

    With ENV_PATH the environment is read from file; otherwise the global
    type is projected first."""
    cfg = _config(max_len, buf_bound, depth_bound, budget, seed, as_json)
    g = _load_global(gt_path)
    if env_path:
        env = _load_env(env_path)
    else:
        try:
            env = projector.project_top(g, budget=cfg.budget)
        except projector.ProjectionError as exc:
            _emit(
                {"command": "verify", "input": gt_path, "projected": False, "error": exc.kind},
                cfg.as_json,
                [f"ProjectionError: {exc.kind}", f"detail: {exc.detail}"],
            )
            sys.exit(1)
    bound = cfg.resolved_max_len(g)
    try:
        report = verifier.check_preorder(g, env, bound, cfg.buf_bound, cfg.depth_bound)
    except tracelang.BudgetExceededError as exc:
        _emit(
            {"command": "verify", "input": gt_path, "error": "BoundExhausted", "detail": str(exc)},
            cfg.as_json,
            [f"BoundExhausted: {exc}"],
        )
        sys.exit(1)
    payload = {
        "command": "verify",
        "input": gt_path,
        "environment_input": env_path,
        "sound": report.sound,
        "complete": report.complete,
        "max_len": report.max_len,
        "buf_bound": report.buf_bound,
        "basis": report.basis,
        "sound_counterexample": None
        if report.sound_counterexample is None
        else _word_json(report.sound_counterexample),
        "completeness_gap": None
        if report.completeness_gap is None
        else _word_json(report.completeness_gap),
    }
    lines = [
        f"sound: {'yes' if report.sound else 'no'}",
        f"complete: {'yes' if report.complete else 'no'}",
        f"bounds: max_len={report.max_len} buf_bound={report.buf_bound} ({report.basis})",
    ]
    if report.sound_counterexample is not None:
        lines.append(f"session trace outside the global type: {_fmt_word(report.sound_counterexample)}")
    if report.completeness_gap is not None:
        lines.append(f"global trace not covered: {_fmt_word(report.completeness_gap)}")
    _emit(payload, cfg.as_json, lines)
    sys.exit(0 if report else 1)


@cli.command()
@click.argument("path", type=click.Path(exists=True, dir_okay=False, allow_dash=True))
@_with_common
def classify(path, max_len, buf_bound, depth_bound, budget, seed, as_json):
    """Diagnose why the global type in PATH resists projection."""
    cfg = _config(max_len, buf_bound, depth_bound, budget, seed, as_json)
    g = _load_global(path)
    outcome = verifier.classify(g, cfg.max_len, cfg.buf_bound, cfg.depth_bound)
    _emit(
        {
            "command": "classify",
            "input": path,
            "category": outcome.category,
            "detail": outcome.detail,
        },
        cfg.as_json,
        [outcome.category, outcome.detail],
    )
    sys.exit(0 if outcome.category == verifier.PROJECTABLE else 1)


@cli.command()
@click.argument("path", type=click.Path(exists=True, dir_okay=False, allow_dash=True))
@click.option("--dot", type=click.Path(dir_okay=False), default=None, help="Write the trace automaton in DOT format.")
@_with_common
def trace(path, dot, max_len, buf_bound, depth_bound, budget, seed, as_json):
    """Enumerate the bounded trace language of the global type in PATH."""
    cfg = _config(max_len, buf_bound, depth_bound, budget, seed, as_json)
    g = _load_global(path)
    auto = tracelang.compile_traces(g)
    if dot:
        _dump_dot(auto, dot)
    bound = cfg.resolved_max_len(g)
    try:
        words = sorted(
            tracelang.enumerate_traces(auto, bound),
            key=lambda w: (len(w), tuple(map(str, w))),
        )
    except tracelang.BudgetExceededError as exc:
        _emit(
            {"command": "trace", "input": path, "error": "BoundExhausted", "detail": str(exc)},
            cfg.as_json,
            [f"BoundExhausted: {exc}"],
        )
        sys.exit(1)
    _emit(
        {
            "command": "trace",
            "input": path,
            "max_len": bound,
            "count": len(words),
            "traces": [_word_json(w) for w in words],
        },
        cfg.as_json,
        [f"{len(words)} trace(s) up to length {bound}"] + [f"  {_fmt_word(w)}" for w in words],
    )
    sys.exit(0)


@cli.command()
@click.option("--samples", type=int, default=200, show_default=True, help="Number of random global types.")
@click.option("--max-size", type=int, default=8, show_default=True, help="Interactions per sample.")
@click.option("--roles", "role_count", type=int, default=4, show_default=True, help="Roles per sample.")
@click.option("--star-depth", type=int, default=1, show_default=True, help="Star nesting per sample.")
@_with_common
def crosscheck(samples, max_size, role_count, star_depth, max_len, buf_bound, depth_bound, budget, seed, as_json):
    """Cross-check projection soundness/completeness/liveness on random
    global types."""
    cfg = _config(max_len, buf_bound, depth_bound, budget, seed, as_json)
    report = verifier.cross_check_theorems(
        samples, cfg.seed, max_size, role_count, star_depth, cfg.buf_bound, cfg.depth_bound
    )
    violations = report["violations"]
    payload = {
        "command": "crosscheck",
        "seed": cfg.seed,
        "samples": report["samples"],
        "well_formed": report["well_formed"],
        "projected": report["projected"],
        "checked": report["checked"],
        "violations": [
            {"sample": i, "kind": kind, "trace": None if w is None else _word_json(w)}
            for i, kind, w in violations
        ],
    }
    lines = [
        f"samples: {report['samples']}  well-formed: {report['well_formed']}"
        f"  projected: {report['projected']}  checked: {report['checked']}",
        f"violations: {len(violations)}",
    ]
    _emit(payload, cfg.as_json, lines)
    sys.exit(0 if not violations else 1)


def main() -> None:
    try:
        cli(standalone_mode=False)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except click.UsageError as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        sys.exit(2)
    except _INPUT_ERRORS as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)


if __name__ == "__main__":
    main()
