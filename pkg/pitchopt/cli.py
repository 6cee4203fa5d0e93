"""
Command-line front end.

Every command reads one instance (``--instance FILE`` or ``--triple N,MIN,MAX``
over the standard catalog), writes its artifacts and a ``manifest.json`` into
``--out`` and prints a short summary with three decimals. Exit status is 0 on
success, 1 when the instance is infeasible or a search stopped before
proving optimality, and 2 for usage, format and validation errors.
"""
import argparse
import datetime
import logging
import os
import pathlib
import sys
from collections.abc import Callable as _Callable
from collections.abc import Sequence as _Sequence
from typing import Any

import msgspec

import pitchopt
from pitchopt import _app, _enums, _errors, _io
from pitchopt.exact import SolveResult, result_document, solve_approx, solve_exact
from pitchopt.ga import load_config, run_ga, write_trace_csv
from pitchopt.graph import build_graph, dump_edges, path_count
from pitchopt.milp import build_milp, export_model, instance_options
from pitchopt.pitch import (
    Instance,
    default_harmonics,
    parse_sequence,
    standard_catalog,
    standard_instance,
)
from pitchopt.spectrum import (
    approx_noise,
    exact_noise,
    profile_spectrum,
    sandwich_ratio,
    write_plot_script,
    write_spectrum_csv,
)

__all__ = ("RunManifest", "main")

logger = logging.getLogger(__name__)

_APP_NAME = "pitchopt-cli"
_DEFAULT_OUT = "pitchopt-out"


class RunManifest(msgspec.Struct, frozen=True, kw_only=True):
    """Record of one command run, written next to its outputs."""

    command: _enums.Command
    instance: str | None
    options: dict[str, Any]
    output_dir: str
    timestamp: datetime.datetime
    version: str


class _Run:
    """Shared state of one command: parsed arguments, output directory and app."""

    __slots__ = ("args", "out", "app")

    def __init__(self, args: argparse.Namespace, app: _app.Application) -> None:
        self.args = args
        self.out = pathlib.Path(args.out)
        self.app = app

    def path(self, name: str) -> pathlib.Path:
        return self.out / name

    def instance(self) -> tuple[Instance, dict[str, str], str | None]:
        args = self.args
        if args.instance and args.triple:
            raise _errors.ValidationError("give either --instance or --triple, not both")
        if args.triple:
            return standard_instance(*args.triple), {}, _triple_label(args.triple)
        if not args.instance:
            raise _errors.ValidationError("an instance is required (--instance or --triple)")
        document = _io.read_instance_file(args.instance)
        return document.to_instance(), document.ga, os.fspath(args.instance)

    def write_manifest(self, instance: str | None) -> None:
        options = {
            key: _plain(value)
            for key, value in vars(self.args).items()
            if key not in ("handler", "command")
        }
        manifest = RunManifest(
            command=_enums.Command(self.args.command),
            instance=instance,
            options=options,
            output_dir=os.fspath(self.out),
            timestamp=datetime.datetime.now(datetime.timezone.utc),
            version=pitchopt.__version__,
        )
        _io.write_json(manifest, self.path("manifest.json"))

    def seconds(self, value: float) -> str:
        return _io.format_minsec(value) if self.args.min_sec else f"{value:.3f}"


def _plain(value: Any) -> Any:
    if isinstance(value, pathlib.Path):
        return os.fspath(value)
    if isinstance(value, list):
        return [_plain(item) for item in value]
    return value


def _triple_label(triple: _Sequence[int]) -> str:
    return "({},{},{})".format(*triple)


def _triple(text: str) -> tuple[int, int, int]:
    try:
        n, lo, hi = (int(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected N,MIN,MAX, got {text!r}") from None
    return n, lo, hi


def _status_code(result: SolveResult) -> int:
    if result.status in (_enums.SolveStatus.OPTIMAL, _enums.SolveStatus.FEASIBLE):
        return 0
    return 1


def _print_result(run: _Run, result: SolveResult) -> None:
    sequence = "-" if result.best_sequence is None else str(result.best_sequence)
    print(f"status       {result.status.value}")
    print(f"sequence     {sequence}")
    print(f"exact noise  {result.exact_noise:.3f} (k={result.harmonic})")
    print(f"approx noise {result.approx_noise:.3f} (k={result.approx_harmonic})")
    if result.gap is not None:
        print(f"gap          {result.gap:.3f}%")
    print(f"nodes        {result.nodes_explored}")
    print(f"time         {run.seconds(result.wall_time)}")


def _write_incumbents(run: _Run, result: SolveResult) -> None:
    _io.write_csv(
        run.path("incumbents.csv"),
        ("elapsed", "value", "sequence"),
        ((repr(i.elapsed), repr(i.value), str(i.sequence)) for i in result.incumbents),
    )


def cmd_noise(run: _Run) -> int:
    args = run.args
    if args.instance or args.triple:
        inst, _, label = run.instance()
        catalog, harmonics = inst.catalog, inst.harmonics
    else:
        catalog, harmonics, label = standard_catalog(), 0, None
    seq = parse_sequence(args.sequence, catalog)
    K = args.harmonics or harmonics or default_harmonics(len(seq))
    spectrum = profile_spectrum(seq, catalog, K)
    exact, approx = exact_noise(spectrum), approx_noise(spectrum)

    csv_path = run.path("spectrum.csv")
    write_spectrum_csv(spectrum, csv_path)
    if args.plot_script:
        write_plot_script(csv_path.name, run.path("spectrum.gp"), title=str(seq))
    run.write_manifest(label)
    print(f"sequence     {seq}")
    print(f"tire length  {seq.total_length}")
    print(f"exact noise  {exact.value:.3f} (k={exact.harmonic})")
    print(f"approx noise {approx.value:.3f} (k={approx.harmonic})")
    print(f"ratio        {sandwich_ratio(spectrum):.3f}")
    return 0


def cmd_solve_exact(run: _Run) -> int:
    args = run.args
    inst, _, label = run.instance()
    result = solve_exact(
        inst,
        _enums.Symmetry(args.symmetry),
        seed_upper_bound=args.upper_bound,
        time_limit=args.time_limit,
        app=run.app,
    )
    _io.write_json(result_document(result, inst), run.path("result.json"))
    _write_incumbents(run, result)
    run.write_manifest(label)
    _print_result(run, result)
    return _status_code(result)


def cmd_solve_approx(run: _Run) -> int:
    args = run.args
    inst, _, label = run.instance()
    result = solve_approx(
        inst,
        optimal=args.optimal,
        cyclic=not args.linear,
        time_limit=args.time_limit,
        app=run.app,
    )
    _io.write_json(result_document(result, inst), run.path("result.json"))
    _write_incumbents(run, result)
    run.write_manifest(label)
    _print_result(run, result)
    return _status_code(result)


def cmd_ga(run: _Run) -> int:
    args = run.args
    inst, settings, label = run.instance()
    cfg = load_config(
        settings,
        seed=args.seed,
        population_size=args.population,
        max_generations=args.generations,
        selection=args.selection,
        time_limit=args.time_limit,
    )
    result, trace = run_ga(inst, cfg, app=run.app)
    _io.write_json(result_document(result, inst), run.path("result.json"))
    write_trace_csv(trace, run.path("trace.csv"))
    run.write_manifest(label)
    _print_result(run, result)
    print(f"generations  {len(trace)}")
    return _status_code(result)


def cmd_export_lp(run: _Run) -> int:
    inst, _, label = run.instance()
    j = run.args.j
    model = build_milp(inst, j, instance_options(inst))
    export_model(model, run.path(f"model_j{j}.lp"))
    run.write_manifest(label)
    print(f"tire length  {model.tire_length}")
    print(f"binaries     {len(model.binaries)}")
    print(f"continuous   {len(model.continuous)}")
    print(f"rows         {len(model.rows)}")
    return 0


def cmd_graph(run: _Run) -> int:
    args = run.args
    inst, _, label = run.instance()
    T = args.tire_length if args.tire_length is not None else inst.tire_length(args.j)
    n_pitches = args.pitches or inst.n_pitches
    g = build_graph(inst.catalog, T, inst.K)
    dump_edges(g, run.path(f"graph_T{T}.txt"), weights=args.weights)
    run.write_manifest(label)
    print(f"tire length  {T}")
    print(f"nodes        {g.node_count}")
    print(f"arcs         {g.arc_count}")
    print(f"paths (N={n_pitches}) {path_count(g, n_pitches)}")
    return 0


_TABLE_HEADER = (
    "instance",
    "optimal_noise",
    "optimal_sequence",
    "exact_status",
    "approx_noise",
    "approx_real_noise",
    "gap_percent",
    "exact_time",
    "approx_time",
)


def _table_row(run: _Run, label: str, inst: Instance) -> tuple[list[str], bool]:
    args = run.args
    try:
        exact = solve_exact(
            inst, _enums.Symmetry(args.symmetry), time_limit=args.time_limit, app=run.app
        )
    except _errors.InfeasibleInstanceError as error:
        logger.warning("%s: %s", label, error.message)
        return [label, "", "", _enums.SolveStatus.INFEASIBLE.value, "", "", "", "", ""], False
    optimal = exact.exact_noise if exact.best_sequence is not None else None
    approx = solve_approx(inst, optimal=optimal, time_limit=args.time_limit, app=run.app)
    row = [
        label,
        f"{exact.exact_noise:.3f}",
        "" if exact.best_sequence is None else str(exact.best_sequence),
        exact.status.value,
        f"{approx.approx_noise:.3f}",
        f"{approx.exact_noise:.3f}",
        "" if approx.gap is None else f"{approx.gap:.1f}",
        run.seconds(exact.wall_time),
        run.seconds(approx.wall_time),
    ]
    complete = (
        exact.status is _enums.SolveStatus.OPTIMAL and approx.status is _enums.SolveStatus.OPTIMAL
    )
    return row, complete


def cmd_table(run: _Run) -> int:
    args = run.args
    rows: list[list[str]] = []
    complete = True
    sources: list[tuple[str, Instance]] = [
        (_triple_label(triple), standard_instance(*triple)) for triple in args.triple or ()
    ]
    sources += [(os.fspath(path), _io.load_instance(path)) for path in args.instance or ()]
    for label, inst in sources:
        logger.info("table row %s", label)
        row, ok = _table_row(run, label, inst)
        rows.append(row)
        complete &= ok
        print("  ".join(row))
    _io.write_csv(run.path("table.csv"), _TABLE_HEADER, rows)
    run.write_manifest(None)
    return 0 if complete else 1


def _add_instance(parser: argparse.ArgumentParser, many: bool = False) -> None:
    action = "append" if many else "store"
    parser.add_argument(
        "--instance", type=pathlib.Path, action=action, help="instance file"
    )
    parser.add_argument(
        "--triple",
        type=_triple,
        action=action,
        help="standard-catalog instance N,MIN,MAX (same occurrence window for all types)",
    )


def _add_search(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--time-limit", type=float, help="wall-clock limit in seconds")
    parser.add_argument(
        "--symmetry",
        choices=[s.value for s in _enums.Symmetry],
        default=_enums.Symmetry.ROTATION_CUTS.value,
        help="search restriction (default: %(default)s)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pitchopt", description="Tire pitch sequence noise optimization"
    )
    parser.add_argument("--version", action="version", version=pitchopt.__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--out", default=_DEFAULT_OUT, help="output directory (default: %(default)s)"
    )
    common.add_argument("--workers", type=int, help="worker processes (env PITCHOPT_WORKERS)")
    common.add_argument("--min-sec", action="store_true", help="print times as min:sec")
    common.add_argument(
        "-v", "--verbose", action="count", default=0, help="more logging (-vv for debug)"
    )
    commands = parser.add_subparsers(dest="command", required=True)

    def command(name: _enums.Command, handler: _Callable[[_Run], int], text: str):
        sub = commands.add_parser(name.value, parents=[common], help=text, description=text)
        sub.set_defaults(handler=handler)
        return sub

    sub = command(_enums.Command.NOISE, cmd_noise, "spectrum and noise of one sequence")
    _add_instance(sub)
    sub.add_argument("--sequence", required=True, help="type digits, or a comma list")
    sub.add_argument("--harmonics", "-K", type=int, help="number of harmonics")
    sub.add_argument("--plot-script", action="store_true", help="also write a gnuplot script")

    sub = command(_enums.Command.SOLVE_EXACT, cmd_solve_exact, "least exact noise")
    _add_instance(sub)
    _add_search(sub)
    sub.add_argument("--upper-bound", type=float, help="only accept sequences quieter than this")

    sub = command(_enums.Command.SOLVE_APPROX, cmd_solve_approx, "least approximated noise")
    _add_instance(sub)
    sub.add_argument("--time-limit", type=float, help="wall-clock limit in seconds")
    sub.add_argument("--optimal", type=float, help="known exact optimum, to report the gap")
    sub.add_argument(
        "--linear", action="store_true", help="do not check adjacency and runs across the wrap"
    )

    sub = command(_enums.Command.GA, cmd_ga, "genetic-algorithm baseline")
    _add_instance(sub)
    sub.add_argument("--seed", type=int, help="random seed (default: ga.seed or 0)")
    sub.add_argument("--population", type=int, help="population size")
    sub.add_argument("--generations", type=int, help="maximum number of generations")
    sub.add_argument("--selection", choices=[s.value for s in _enums.Selection])
    sub.add_argument("--time-limit", type=float, help="wall-clock limit in seconds")

    sub = command(_enums.Command.EXPORT_LP, cmd_export_lp, "write the MILP for one tire length")
    _add_instance(sub)
    sub.add_argument("--j", type=int, default=0, help="trailing empty units (default: 0)")

    sub = command(_enums.Command.GRAPH, cmd_graph, "dump the start-position graph")
    _add_instance(sub)
    sub.add_argument("--j", type=int, default=0, help="trailing empty units (default: 0)")
    sub.add_argument("--tire-length", type=int, help="tire length T, overrides --j")
    sub.add_argument("--pitches", "-N", type=int, help="path length to count (default: N)")
    sub.add_argument("--weights", action="store_true", help="write arc weight vectors")

    sub = command(_enums.Command.TABLE, cmd_table, "optimal and approximated results per instance")
    _add_instance(sub, many=True)
    _add_search(sub)
    return parser


def _configure_logging(verbosity: int) -> None:
    if verbosity:
        level: int | str = logging.DEBUG if verbosity > 1 else logging.INFO
    else:
        level = os.getenv("PITCHOPT_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def main(argv: _Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)
    try:
        app = _app.initialize_app(workers=args.workers, name=_APP_NAME)
    except ValueError as error:
        print(f"pitchopt: error: {error}", file=sys.stderr)
        return 2
    try:
        os.makedirs(args.out, exist_ok=True)
        return args.handler(_Run(args, app))
    except _errors.PitchoptError as error:
        print(f"pitchopt: error: {error.message}", file=sys.stderr)
        return _errors.exit_code(error)
    finally:
        _app.close_app(_APP_NAME)
