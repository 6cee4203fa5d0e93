"""
Approximated-noise MILP for a fixed number of trailing empty units ``j``.

The model is built as plain data (variables and named linear rows) and
handed to python-mip to be written in LP or MPS format. Row names start
with the number of the constraint family they belong to, e.g. ``c8_fill``.
"""
import enum
import logging
import math
import operator
import os
import re
from collections.abc import Callable as _Callable, Mapping as _Mapping
from typing import Any

import mip
import msgspec

from pitchopt import _errors
from pitchopt.pitch import Instance, PitchSequence, extreme_pair_incompatibility, rotations
from pitchopt.spectrum import contribution_tables

__all__ = (
    "AssignmentReport",
    "LinearRow",
    "MilpModel",
    "MilpOptions",
    "Sense",
    "add_incumbent_cuts",
    "build_milp",
    "decode_assignment",
    "encode_sequence",
    "evaluate_assignment",
    "export_model",
    "instance_options",
    "read_model",
    "to_mip_model",
)

logger = logging.getLogger(__name__)

OBJECTIVE = "z"
FEASIBILITY_TOL = 1e-9


class Sense(enum.Enum):
    LE = "<="
    GE = ">="
    EQ = "="


class LinearRow(msgspec.Struct, frozen=True):
    """``sum(coef * var) <sense> rhs``."""

    name: str
    terms: tuple[tuple[str, float], ...]
    sense: Sense
    rhs: float

    @property
    def tag(self) -> str:
        """Constraint family, e.g. ``"c9"``."""
        return self.name.split("_", 1)[0]

    def lhs(self, values: _Mapping[str, float]) -> float:
        return math.fsum(coef * values[var] for var, coef in self.terms)

    def holds(self, values: _Mapping[str, float], tol: float = FEASIBILITY_TOL) -> bool:
        slack = tol * max(1.0, abs(self.rhs))
        lhs = self.lhs(values)
        if self.sense is Sense.LE:
            return lhs <= self.rhs + slack
        if self.sense is Sense.GE:
            return lhs >= self.rhs - slack
        return abs(lhs - self.rhs) <= slack


class MilpOptions(msgspec.Struct, frozen=True, kw_only=True):
    """Optional constraint blocks appended to the basic model."""

    min_max_occ: bool = False
    """Occurrence windows per type."""
    max_seq: bool = False
    """Same-type run bounds."""
    incompatibility: bool = False
    """Forbidden adjacencies; the shortest/longest pair when the instance lists none."""
    symmetry_fix: bool = False
    """The first pitch is of type 1."""


def instance_options(inst: Instance) -> MilpOptions:
    """Options enabling every constraint the instance actually sets."""
    return MilpOptions(
        min_max_occ=True,
        max_seq=any(bound is not None for bound in inst.max_seq),
        incompatibility=bool(inst.incompatible),
    )


class MilpModel(msgspec.Struct, frozen=True):
    """
    A MILP minimizing the approximated noise ``z`` for tire length ``T_j``.

    Binaries are ``x_p{p}_i{i}`` (type ``p`` starts at unit ``i``); continuous
    variables are ``z >= 0`` and the free ``za_k{k}``, ``zb_k{k}``.
    """

    j: int
    tire_length: int
    n_pitches: int
    harmonics: int
    lengths: tuple[int, ...]
    binaries: tuple[str, ...]
    continuous: tuple[str, ...]
    rows: tuple[LinearRow, ...]
    objective: str = OBJECTIVE

    @property
    def variable_count(self) -> int:
        return len(self.binaries) + len(self.continuous)

    def row(self, name: str) -> LinearRow:
        for row in self.rows:
            if row.name == name:
                return row
        raise KeyError(name)

    def rows_tagged(self, tag: str) -> list[LinearRow]:
        return [row for row in self.rows if row.tag == tag]


class AssignmentReport(msgspec.Struct, frozen=True):
    """Outcome of :func:`evaluate_assignment`; ``objective`` is NaN when infeasible."""

    feasible: bool
    violated: tuple[str, ...]
    objective: float
    za: tuple[float, ...] = ()
    zb: tuple[float, ...] = ()


def binary_name(p: int, i: int) -> str:
    return f"x_p{p}_i{i}"


def _last_start(tire_length: int, length: int) -> int:
    return tire_length - length + 1


def build_milp(inst: Instance, j: int, options: MilpOptions | None = None) -> MilpModel:
    """
    Build the approximated-noise model for ``j`` trailing empty units.

    Parameters
    ----------
    inst : Instance
        The instance; ``K`` harmonics are modelled.
    j : int
        Trailing empty units, in ``L``.
    options : MilpOptions, optional
        Optional constraint blocks. Defaults to the basic model.

    Returns
    -------
    MilpModel
        Rows in order: ``c1``-``c4`` (``z`` bounds every ``|za_k|``, ``|zb_k|``),
        ``c5``/``c6`` (coefficient definitions), ``c7`` (one start per unit),
        ``c8_fill``, ``c9`` (no overlap, for units ``i >= 2``) and
        ``c9_anchor`` (a pitch starts at unit 1), ``c10_count``, then the
        optional ``c13``/``c14`` (occurrences), ``c15`` (runs), ``c16``/``c17``
        (incompatibilities) and ``c22_fix_first``.

    Raises
    ------
    TrailingUnitsError
        If ``j`` is outside ``L``.
    """
    options = options or MilpOptions()
    tire_length = inst.tire_length(j)
    catalog = inst.catalog
    K = inst.K
    table = contribution_tables(inst).at(j)
    last = {p: _last_start(tire_length, length) for p, length in enumerate(catalog.lengths, 1)}

    def starts(p: int) -> range:
        return range(1, last[p] + 1)

    def x(p: int, i: int) -> str | None:
        return binary_name(p, i) if 1 <= i <= last[p] else None

    binaries = tuple(binary_name(p, i) for p in last for i in starts(p))
    continuous = (OBJECTIVE,) + tuple(f"za_k{k}" for k in range(1, K + 1)) + tuple(
        f"zb_k{k}" for k in range(1, K + 1)
    )

    rows: list[LinearRow] = []
    bounds = (("c1", "za", 1.0), ("c2", "za", -1.0), ("c3", "zb", 1.0), ("c4", "zb", -1.0))
    for tag, var, sign in bounds:
        rows.extend(
            LinearRow(f"{tag}_k{k}", ((f"{var}_k{k}", sign), (OBJECTIVE, -1.0)), Sense.LE, 0.0)
            for k in range(1, K + 1)
        )
    for tag, var, values in (("c5", "za", table.a), ("c6", "zb", table.b)):
        for k in range(1, K + 1):
            terms = [(f"{var}_k{k}", 1.0)]
            for p in last:
                for i in starts(p):
                    coef = float(values[k, i - 1, p - 1])
                    if coef != 0.0:
                        terms.append((binary_name(p, i), -coef))
            rows.append(LinearRow(f"{tag}_{var}_k{k}", tuple(terms), Sense.EQ, 0.0))

    for i in range(1, tire_length + 1):
        terms = [(name, 1.0) for p in last if (name := x(p, i))]
        if terms:
            rows.append(LinearRow(f"c7_i{i}", tuple(terms), Sense.LE, 1.0))

    rows.append(
        LinearRow(
            "c8_fill",
            tuple(
                (binary_name(p, i), float(catalog.lengths[p - 1]))
                for p in last
                for i in starts(p)
            ),
            Sense.EQ,
            float(tire_length),
        )
    )

    for i in range(2, tire_length + 1):
        ending = [(name, 1.0) for p in last if (name := x(p, i - catalog.lengths[p - 1]))]
        starting = [(name, -1.0) for p in last if (name := x(p, i))]
        if ending or starting:
            rows.append(LinearRow(f"c9_i{i}", tuple(ending + starting), Sense.EQ, 0.0))
    rows.append(
        LinearRow("c9_anchor", tuple((name, 1.0) for p in last if (name := x(p, 1))), Sense.EQ, 1.0)
    )

    count = tuple((name, 1.0) for name in binaries)
    rows.append(LinearRow("c10_count", count, Sense.EQ, float(inst.n_pitches)))

    if options.min_max_occ:
        for p in last:
            terms = tuple((binary_name(p, i), 1.0) for i in starts(p))
            rows.append(LinearRow(f"c13_p{p}", terms, Sense.GE, float(inst.min_occ[p - 1])))
        for p in last:
            terms = tuple((binary_name(p, i), 1.0) for i in starts(p))
            rows.append(LinearRow(f"c14_p{p}", terms, Sense.LE, float(inst.max_occ[p - 1])))

    if options.max_seq:
        for p in last:
            bound = inst.max_seq[p - 1]
            if bound is None:
                continue
            step = catalog.lengths[p - 1]
            for i in starts(p):
                window = [x(p, i + m * step) for m in range(bound + 1)]
                if all(window):
                    terms = tuple((name, 1.0) for name in window if name)
                    rows.append(LinearRow(f"c15_p{p}_i{i}", terms, Sense.LE, float(bound)))

    if options.incompatibility:
        pairs = inst.incompatible or extreme_pair_incompatibility(catalog.r)
        for a, b in pairs:
            tag = "c17" if a > b else "c16"
            for i in starts(a):
                follower = x(b, i + catalog.lengths[a - 1])
                if follower:
                    rows.append(
                        LinearRow(
                            f"{tag}_a{a}_b{b}_i{i}",
                            ((binary_name(a, i), 1.0), (follower, 1.0)),
                            Sense.LE,
                            1.0,
                        )
                    )

    if options.symmetry_fix:
        if (name := x(1, 1)) is None:
            raise _errors.ValidationError("type 1 cannot start at unit 1 on this tire")
        rows.append(LinearRow("c22_fix_first", ((name, 1.0),), Sense.EQ, 1.0))

    logger.debug(
        "built model j=%d: %d binaries, %d continuous, %d rows",
        j, len(binaries), len(continuous), len(rows),
    )
    return MilpModel(
        j=j,
        tire_length=tire_length,
        n_pitches=inst.n_pitches,
        harmonics=K,
        lengths=catalog.lengths,
        binaries=binaries,
        continuous=continuous,
        rows=tuple(rows),
    )


def encode_sequence(m: MilpModel, seq: PitchSequence) -> dict[str, float]:
    """
    Binary assignment placing ``seq`` on the model's tire.

    Raises
    ------
    ValidationError
        If the sequence does not fill ``T_j`` exactly.
    """
    if seq.total_length != m.tire_length:
        raise _errors.ValidationError(
            f"sequence length {seq.total_length} does not fill the tire length {m.tire_length}"
        )
    assignment = dict.fromkeys(m.binaries, 0.0)
    for p, i in zip(seq.types, seq.start_positions):
        assignment[binary_name(p, i)] = 1.0
    return assignment


_BINARY = re.compile(r"x_p(\d+)_i(\d+)$")


def decode_assignment(m: MilpModel, assignment: _Mapping[str, float]) -> PitchSequence:
    """The pitches switched on by an assignment, ordered by start unit."""
    starts: list[tuple[int, int]] = []
    for name in m.binaries:
        if assignment.get(name, 0.0) > 0.5:
            match = _BINARY.match(name)
            assert match
            starts.append((int(match[2]), int(match[1])))
    if not starts:
        raise _errors.ValidationError("assignment switches no pitch on")
    types = tuple(p for _, p in sorted(starts))
    return PitchSequence(types, tuple(m.lengths[p - 1] for p in types))


def evaluate_assignment(m: MilpModel, assignment: _Mapping[str, float]) -> AssignmentReport:
    """
    Check a binary assignment against every row of the model.

    ``za_k`` and ``zb_k`` are derived from their defining rows and ``z`` is
    set to the largest ``|za_k|``, ``|zb_k|``, so rows ``c1``-``c6`` only fail
    through other cuts such as ``c20_ub``.

    Raises
    ------
    ValidationError
        If a binary of the model is missing from the assignment.
    """
    missing = [name for name in m.binaries if name not in assignment]
    if missing:
        raise _errors.ValidationError(
            f"assignment misses {len(missing)} binaries, e.g. {missing[0]}"
        )
    values: dict[str, float] = {name: float(assignment[name]) for name in m.binaries}
    violated = [f"binary:{name}" for name, value in values.items() if value not in (0.0, 1.0)]

    za: list[float] = []
    zb: list[float] = []
    for k in range(1, m.harmonics + 1):
        for var, sink in ((f"za_k{k}", za), (f"zb_k{k}", zb)):
            row = m.row(f"{'c5' if var.startswith('za') else 'c6'}_{var}")
            own = dict(row.terms)[var]
            rest = math.fsum(coef * values[name] for name, coef in row.terms if name != var)
            values[var] = (row.rhs - rest) / own
            sink.append(values[var])
    values[OBJECTIVE] = max(map(abs, za + zb), default=0.0)

    violated += [row.name for row in m.rows if not row.holds(values)]
    feasible = not violated
    return AssignmentReport(
        feasible=feasible,
        violated=tuple(violated),
        objective=values[OBJECTIVE] if feasible else math.nan,
        za=tuple(za),
        zb=tuple(zb),
    )


def add_incumbent_cuts(
    m: MilpModel,
    z_ub: float,
    seq: PitchSequence,
    rotations_too: bool = False,
) -> MilpModel:
    """
    Append the cuts recorded when a new incumbent is found.

    ``c20_ub`` bounds ``z`` by ``z_ub`` (replacing an earlier bound) and each
    ``c21_nogood_*`` row makes one sequence infeasible. With ``rotations_too``
    every circular permutation of ``seq`` is cut off as well.
    """
    rows = [row for row in m.rows if row.tag != "c20"]
    rows.append(LinearRow("c20_ub", ((OBJECTIVE, 1.0),), Sense.LE, float(z_ub)))
    cut_count = sum(1 for row in rows if row.tag == "c21")
    seen: set[tuple[int, ...]] = set()
    for variant in rotations(seq) if rotations_too else [seq]:
        if variant.types in seen:
            continue
        seen.add(variant.types)
        ones = encode_sequence(m, variant)
        terms = tuple((name, 1.0) for name, value in ones.items() if value)
        rows.append(LinearRow(f"c21_nogood_{cut_count}", terms, Sense.LE, float(len(seq) - 1)))
        cut_count += 1
    return msgspec.structs.replace(m, rows=tuple(rows))


_RELATIONS: dict[Sense, _Callable[[Any, float], Any]] = {
    Sense.LE: operator.le,
    Sense.GE: operator.ge,
    Sense.EQ: operator.eq,
}
_SENSES = {mip.LESS_OR_EQUAL: Sense.LE, mip.GREATER_OR_EQUAL: Sense.GE, mip.EQUAL: Sense.EQ}
_MODEL_SUFFIXES = (".lp", ".mps")


def to_mip_model(m: MilpModel) -> mip.Model:
    """
    The model as a python-mip ``Model`` on CBC, ready to be written or optimized.

    ``z`` is nonnegative, ``za_k``/``zb_k`` are free and every ``x_p_i`` is binary.
    """
    model = mip.Model(name=f"pitchopt_j{m.j}", sense=mip.MINIMIZE, solver_name=mip.CBC)
    model.verbose = 0
    variables = {name: model.add_var(name=name, var_type=mip.BINARY) for name in m.binaries}
    for name in m.continuous:
        variables[name] = model.add_var(name=name, lb=0.0 if name == m.objective else -mip.INF)
    model.objective = mip.minimize(variables[m.objective])
    for row in m.rows:
        lhs = mip.xsum(coef * variables[var] for var, coef in row.terms)
        model.add_constr(_RELATIONS[row.sense](lhs, row.rhs), name=row.name)
    return model


def _check_suffix(path: str) -> None:
    if os.path.splitext(path)[1].lower() not in _MODEL_SUFFIXES:
        raise _errors.ValidationError(f"model files end in .lp or .mps: {path}")


def export_model(m: MilpModel, path: str | os.PathLike[str]) -> None:
    """
    Write the model in LP (``.lp``) or MPS (``.mps``) format.

    Raises
    ------
    ValidationError
        If the path has another suffix.
    OSError
        If the path cannot be written.
    """
    path = os.fspath(path)
    _check_suffix(path)
    to_mip_model(m).write(path)
    logger.info("wrote model j=%d with %d rows to %s", m.j, len(m.rows), path)


_HARMONIC = re.compile(r"za_k\d+$")


def _read_lengths(fill: LinearRow, path: str) -> tuple[int, ...]:
    lengths: dict[int, int] = {}
    for name, coef in fill.terms:
        match = _BINARY.match(name)
        if match is None:
            raise _errors.ModelFormatError(f"{path}: unexpected variable {name} in c8_fill")
        lengths[int(match[1])] = round(coef)
    if sorted(lengths) != list(range(1, len(lengths) + 1)):
        raise _errors.ModelFormatError(f"{path}: pitch types {sorted(lengths)} are not 1..r")
    return tuple(lengths[p] for p in sorted(lengths))


def read_model(path: str | os.PathLike[str]) -> MilpModel:
    """
    Read a model written by :func:`export_model`.

    The tire length, pitch count and reduced lengths are recovered from the
    ``c8_fill`` and ``c10_count`` rows, ``K`` from the ``za_k`` variables.

    Raises
    ------
    ValidationError
        If the path is neither ``.lp`` nor ``.mps``.
    ModelFormatError
        If the file is not a tire noise model.
    OSError
        If the file cannot be read.
    """
    path = os.fspath(path)
    _check_suffix(path)
    model = mip.Model(solver_name=mip.CBC)
    model.verbose = 0
    model.read(path)

    objective = [var.name for var, coef in model.objective.expr.items() if coef]
    if len(objective) != 1:
        raise _errors.ModelFormatError(f"{path}: objective must be a single variable")
    rows = tuple(
        LinearRow(
            constr.name,
            tuple((var.name, float(coef)) for var, coef in constr.expr.expr.items()),
            _SENSES[constr.expr.sense],
            float(constr.rhs),
        )
        for constr in model.constrs
    )
    named = {row.name: row for row in rows}
    if "c8_fill" not in named or "c10_count" not in named:
        raise _errors.ModelFormatError(f"{path}: no c8_fill and c10_count rows")

    lengths = _read_lengths(named["c8_fill"], path)
    tire_length = round(named["c8_fill"].rhs)
    n_pitches = round(named["c10_count"].rhs)
    binaries = tuple(var.name for var in model.vars if var.var_type == mip.BINARY)
    continuous = tuple(var.name for var in model.vars if var.var_type != mip.BINARY)
    logger.debug("read %d rows and %d variables from %s", len(rows), model.num_cols, path)
    return MilpModel(
        j=n_pitches * lengths[-1] - tire_length,
        tire_length=tire_length,
        n_pitches=n_pitches,
        harmonics=sum(1 for name in continuous if _HARMONIC.match(name)),
        lengths=lengths,
        binaries=binaries,
        continuous=continuous,
        rows=rows,
        objective=objective[0],
    )
