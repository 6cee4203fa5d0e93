"""
Exact and approximated-noise searches over all feasible pitch sequences.

The search reproduces the branch-and-cut procedure on an in-process tree:
every feasible sequence is evaluated by its real noise, an incumbent is kept
and only replaced by a strictly quieter sequence (the upper-bound cut), and
sequences already covered are never revisited (the no-good cuts). The
symmetry options restrict the tree to the first pitch being of type 1, or to
one representative per rotation class.

Candidates are produced depth-first (types in ascending order, pruned by the
occurrence, adjacency and run constraints) and evaluated in vectorized batches.
"""
import logging
import math
import time
from collections.abc import Callable as _Callable

import msgspec
import numpy as np

from pitchopt import _app, _enums, _errors
from pitchopt.pitch import Instance, PitchSequence, make_sequence
from pitchopt.spectrum import (
    approx_noise,
    batch_approx_noise,
    batch_approx_noise_over_rotations,
    batch_exact_noise,
    batch_rows,
    exact_noise,
    profile_spectrum,
)

__all__ = (
    "Incumbent",
    "ResultDocument",
    "SolveResult",
    "incumbent_log",
    "result_document",
    "solve_approx",
    "solve_exact",
)

logger = logging.getLogger(__name__)

UNLIMITED_MAX_PITCHES = 15
"""Largest ``N`` searched exactly without an explicit time limit."""

_TIME_CHECK_NODES = 1 << 16


class Incumbent(msgspec.Struct, frozen=True):
    """A new best sequence recorded during a search."""

    sequence: PitchSequence
    value: float
    """Noise under the search objective."""
    elapsed: float
    """Seconds since the search started."""


class SolveResult(msgspec.Struct, frozen=True, kw_only=True):
    """
    Outcome of a search.

    ``best_sequence`` is the rotation-canonical representative for the exact
    objective (the noise is rotation invariant) and the sequence as found for
    the approximated one (which is not).
    """

    status: _enums.SolveStatus
    objective: _enums.Objective
    best_sequence: PitchSequence | None = None
    exact_noise: float = math.nan
    approx_noise: float = math.nan
    harmonic: int = 0
    """Harmonic of the exact noise peak."""
    approx_harmonic: int = 0
    nodes_explored: int = 0
    candidates_evaluated: int = 0
    incumbent_updates: int = 0
    wall_time: float = 0.0
    per_length_best: dict[int, float] = {}
    """Best objective value per number of trailing empty units ``j``."""
    incumbents: tuple[Incumbent, ...] = ()
    symmetry: _enums.Symmetry | None = None
    optimal_reference: float | None = None
    gap: float | None = None
    """Relative excess in percent of ``exact_noise`` over ``optimal_reference``."""

    @property
    def value(self) -> float:
        """Noise under the search objective."""
        if self.objective is _enums.Objective.APPROX:
            return self.approx_noise
        return self.exact_noise


def incumbent_log(result: SolveResult) -> tuple[Incumbent, ...]:
    """Incumbents in discovery order; values never increase and the last is the result."""
    return result.incumbents


def _tolerance(value: float) -> float:
    return 1e-9 * max(1.0, abs(value)) if math.isfinite(value) else 0.0


def _rotation_key(types: tuple[int, ...]) -> tuple[int, ...]:
    return min(types[s:] + types[:s] for s in range(len(types)))


class _SearchStopped(Exception):
    pass


def _walk(
    inst: Instance,
    symmetry: _enums.Symmetry,
    cyclic: bool,
    prefix: tuple[int, ...],
    emit: _Callable[[tuple[int, ...]], None],
    depth: int | None = None,
    on_nodes: _Callable[[], None] | None = None,
) -> int:
    """
    Depth-first enumeration of feasible 0-based type tuples.

    With ``ROTATION_CUTS`` only the lexicographically smallest rotation of
    every class is produced (prenecklace recursion with period tracking).
    ``prefix`` forces the first choices; ``depth`` stops the walk early and
    emits the partial tuples. Returns the number of nodes entered below the
    prefix.
    """
    n = inst.n_pitches
    r = inst.catalog.r
    min_occ = inst.min_occ
    max_occ = inst.max_occ
    run_cap = [n if bound is None else bound for bound in inst.max_seq]
    forbidden = [[False] * r for _ in range(r)]
    for a, b in inst.incompatible:
        forbidden[a - 1][b - 1] = True
    necklaces = symmetry is _enums.Symmetry.ROTATION_CUTS
    target = n if depth is None else min(depth, n)
    seq = [0] * n
    runs = [0] * n
    counts = [0] * r
    nodes = 0

    def closes() -> bool:
        first, last = seq[0], seq[n - 1]
        if cyclic and forbidden[last][first]:
            return False
        if cyclic and first == last and runs[n - 1] < n:
            lead = 1
            while seq[lead] == first:
                lead += 1
            return runs[n - 1] + lead <= run_cap[first]
        return True

    def descend(t: int, period: int, deficit: int) -> None:
        nonlocal nodes
        if t >= len(prefix):
            nodes += 1
            if on_nodes is not None and nodes % _TIME_CHECK_NODES == 0:
                on_nodes()
        if t == target:
            if t == n and ((necklaces and n % period) or not closes()):
                return
            emit(tuple(seq[:t]))
            return
        remaining = n - t - 1
        low = seq[t - period] if necklaces and t > 0 else 0
        if t == 0 and symmetry is _enums.Symmetry.FIX_FIRST:
            choices: range | tuple[int, ...] = (0,)
        else:
            choices = range(low, r)
        if t < len(prefix):
            choices = (prefix[t],) if prefix[t] in choices else ()
        previous = seq[t - 1] if t else -1
        for p in choices:
            if counts[p] >= max_occ[p]:
                continue
            left = deficit - 1 if counts[p] < min_occ[p] else deficit
            if left > remaining:
                continue
            if t and forbidden[previous][p]:
                continue
            run = runs[t - 1] + 1 if p == previous else 1
            if run > run_cap[p]:
                continue
            seq[t] = p
            runs[t] = run
            counts[p] += 1
            if necklaces and t > 0 and p == seq[t - period]:
                descend(t + 1, period, left)
            else:
                descend(t + 1, t + 1, left)
            counts[p] -= 1

    descend(0, 1, sum(min_occ))
    return nodes


class _Job(msgspec.Struct, frozen=True):
    inst: Instance
    objective: _enums.Objective
    symmetry: _enums.Symmetry
    cyclic: bool
    prefix: tuple[int, ...]
    batch_size: int
    started: float
    deadline: float | None
    seed: float | None


class _Partial(msgspec.Struct):
    best_value: float
    best_types: tuple[int, ...] | None = None
    per_length: dict[int, float] = {}
    nodes: int = 0
    evaluated: int = 0
    incumbents: list[tuple[tuple[int, ...], float, float]] = []
    stopped: bool = False


class _Search:
    """Batch evaluation and incumbent bookkeeping for one (sub)tree."""

    __slots__ = ("job", "partial", "buffer", "rotations")

    def __init__(self, job: _Job) -> None:
        self.job = job
        self.partial = _Partial(best_value=math.inf if job.seed is None else job.seed)
        self.buffer: list[tuple[int, ...]] = []
        self.rotations = job.objective is _enums.Objective.APPROX and job.cyclic

    def check_time(self) -> None:
        if self.job.deadline is not None and time.time() > self.job.deadline:
            raise _SearchStopped

    def emit(self, types: tuple[int, ...]) -> None:
        self.buffer.append(types)
        if len(self.buffer) >= self.job.batch_size:
            self.flush()
            self.check_time()

    def _key(self, types: tuple[int, ...]) -> tuple[int, ...]:
        if self.job.objective is _enums.Objective.EXACT:
            return _rotation_key(types)
        return types

    def _offer(self, types: tuple[int, ...], value: float) -> None:
        partial = self.partial
        best = partial.best_value
        tol = _tolerance(best)
        if value < best - tol:
            pass
        elif partial.best_types is not None and abs(value - best) <= tol:
            if self._key(types) >= self._key(partial.best_types):
                return
        else:
            return
        partial.best_value = value
        partial.best_types = self._key(types)
        elapsed = time.time() - self.job.started
        partial.incumbents.append((partial.best_types, value, elapsed))
        logger.info(
            "incumbent %.6f %s after %.1fs",
            value, "".join(str(t + 1) for t in partial.best_types), elapsed,
        )

    def flush(self) -> None:
        if not self.buffer:
            return
        job = self.job
        catalog = job.inst.catalog
        types = np.asarray(self.buffer, dtype=np.int64) + 1
        shifts = None
        if job.objective is _enums.Objective.EXACT:
            values, _, tire_lengths = batch_exact_noise(types, catalog, job.inst.K)
        elif self.rotations:
            values, shifts, _, tire_lengths = batch_approx_noise_over_rotations(
                types, catalog, job.inst.K
            )
        else:
            values, _, tire_lengths = batch_approx_noise(types, catalog, job.inst.K)

        partial = self.partial
        partial.evaluated += len(self.buffer)
        trailing = job.inst.l_max - tire_lengths.astype(np.int64)
        for j in np.unique(trailing).tolist():
            low = float(values[trailing == j].min())
            partial.per_length[j] = min(partial.per_length.get(j, math.inf), low)

        threshold = min(float(values.min()), partial.best_value)
        rows = np.flatnonzero(values <= threshold + _tolerance(threshold))
        for row in rows[np.argsort(values[rows], kind="stable")].tolist():
            candidate = self.buffer[row]
            if shifts is not None:
                s = int(shifts[row])
                candidate = candidate[s:] + candidate[:s]
            self._offer(candidate, float(values[row]))
        logger.debug("evaluated batch of %d, best %.6f", len(self.buffer), partial.best_value)
        self.buffer.clear()

    def run(self) -> _Partial:
        job = self.job
        try:
            self.partial.nodes = _walk(
                job.inst, job.symmetry, job.cyclic, job.prefix, self.emit,
                on_nodes=self.check_time,
            )
            self.flush()
        except _SearchStopped:
            self.partial.stopped = True
            logger.warning("time limit reached, stopping search")
        return self.partial


def _search_subtree(job: _Job) -> _Partial:
    return _Search(job).run()


def _partitions(job: _Job) -> tuple[list[tuple[int, ...]], int]:
    prefixes: list[tuple[int, ...]] = []
    nodes = _walk(job.inst, job.symmetry, job.cyclic, (), prefixes.append, depth=2)
    return prefixes, nodes


def _merge(job: _Job, partials: list[_Partial], extra_nodes: int) -> _Partial:
    """Combine subtree results; the winner does not depend on worker timing."""
    merged = _Search(job)
    for partial in partials:
        if partial.best_types is not None:
            merged._offer(partial.best_types, partial.best_value)
        for j, value in partial.per_length.items():
            merged.partial.per_length[j] = min(merged.partial.per_length.get(j, math.inf), value)
        merged.partial.nodes += partial.nodes
        merged.partial.evaluated += partial.evaluated
        merged.partial.stopped |= partial.stopped
    merged.partial.nodes += extra_nodes

    incumbents: list[tuple[tuple[int, ...], float, float]] = []
    for types, value, elapsed in sorted(
        (entry for partial in partials for entry in partial.incumbents), key=lambda e: e[2]
    ):
        if not incumbents or value < incumbents[-1][1] - _tolerance(incumbents[-1][1]):
            incumbents.append((types, value, elapsed))
    winner = merged.partial.best_types
    if winner is not None and (not incumbents or incumbents[-1][0] != winner):
        elapsed = incumbents[-1][2] if incumbents else 0.0
        incumbents.append((winner, merged.partial.best_value, elapsed))
    merged.partial.incumbents = incumbents
    return merged.partial


def _run(job: _Job, app: _app.Application) -> _Partial:
    if app.workers <= 1 or job.inst.n_pitches <= 2:
        return _search_subtree(job)
    prefixes, nodes = _partitions(job)
    logger.debug("searching %d subtrees on %d workers", len(prefixes), app.workers)
    jobs = [msgspec.structs.replace(job, prefix=prefix) for prefix in prefixes]
    partials = list(app.executor.map(_search_subtree, jobs))
    return _merge(job, partials, nodes)


def _deadline(inst: Instance, time_limit: float | None, app: _app.Application, started: float):
    limit = time_limit if time_limit is not None else app.time_limit
    if limit is None and inst.n_pitches > UNLIMITED_MAX_PITCHES:
        raise _errors.ValidationError(
            f"N={inst.n_pitches} needs an explicit time limit "
            f"(exhaustive search is only unbounded up to N={UNLIMITED_MAX_PITCHES})"
        )
    return None if limit is None else started + limit


def _result(
    job: _Job,
    partial: _Partial,
    started: float,
    *,
    optimal: float | None = None,
) -> SolveResult:
    inst = job.inst
    catalog = inst.catalog
    incumbents = tuple(
        Incumbent(make_sequence((t + 1 for t in types), catalog), value, elapsed)
        for types, value, elapsed in partial.incumbents
    )
    common = dict(
        objective=job.objective,
        symmetry=job.symmetry,
        nodes_explored=partial.nodes,
        candidates_evaluated=partial.evaluated,
        incumbent_updates=len(incumbents),
        wall_time=time.time() - started,
        per_length_best=dict(sorted(partial.per_length.items())),
        incumbents=incumbents,
    )
    if partial.best_types is None:
        if partial.stopped:
            status = _enums.SolveStatus.TIME_LIMIT
        elif job.seed is not None:
            status = _enums.SolveStatus.CUTOFF
        else:
            raise _errors.InfeasibleInstanceError(
                "no pitch sequence satisfies the occurrence, adjacency and run constraints"
            )
        return SolveResult(status=status, **common)

    best = make_sequence((t + 1 for t in partial.best_types), catalog)
    spectrum = profile_spectrum(best, catalog, inst.K)
    exact = exact_noise(spectrum)
    approx = approx_noise(spectrum)
    gap = None
    if optimal is not None and optimal > 0:
        gap = 100.0 * (exact.value - optimal) / optimal
    return SolveResult(
        status=_enums.SolveStatus.TIME_LIMIT if partial.stopped else _enums.SolveStatus.OPTIMAL,
        best_sequence=best,
        exact_noise=exact.value,
        approx_noise=approx.value,
        harmonic=exact.harmonic,
        approx_harmonic=approx.harmonic,
        optimal_reference=optimal,
        gap=gap,
        **common,
    )


def solve_exact(
    inst: Instance,
    symmetry: _enums.Symmetry = _enums.Symmetry.ROTATION_CUTS,
    seed_upper_bound: float | None = None,
    time_limit: float | None = None,
    app: _app.Application | None = None,
) -> SolveResult:
    """
    Find a sequence of least exact noise over every admissible tire length.

    Parameters
    ----------
    inst : Instance
        The instance. Adjacency and run constraints are enforced cyclically.
    symmetry : Symmetry, optional
        Search restriction; every option returns the same optimal value.
    seed_upper_bound : float, optional
        Initial upper bound; only sequences strictly below it are accepted.
    time_limit : float, optional
        Wall-clock limit in seconds. Mandatory beyond 15 pitches unless the
        application sets one.
    app : Application, optional
        Runtime configuration (workers, batch size).

    Returns
    -------
    SolveResult
        ``OPTIMAL`` with the rotation-canonical optimum; ``TIME_LIMIT`` with
        the best sequence so far; ``CUTOFF`` when nothing beats the seed bound.
        Among equally quiet sequences the smallest canonical form wins.

    Raises
    ------
    InfeasibleInstanceError
        If no sequence satisfies the instance.
    SymmetryOptionError
        If ``FIX_FIRST`` is requested while type 1 may be absent.
    ValidationError
        If ``N`` exceeds 15 and no time limit is set.
    """
    app = _app.check_initialized_app(app)
    inst.check_feasible()
    if symmetry is _enums.Symmetry.FIX_FIRST and inst.min_occ[0] < 1:
        raise _errors.SymmetryOptionError(
            "fixing the first pitch to type 1 requires minOcc_1 >= 1"
        )
    started = time.time()
    job = _Job(
        inst=inst,
        objective=_enums.Objective.EXACT,
        symmetry=symmetry,
        cyclic=True,
        prefix=(),
        batch_size=batch_rows(inst.n_pitches, inst.K, app.batch_size),
        started=started,
        deadline=_deadline(inst, time_limit, app, started),
        seed=seed_upper_bound,
    )
    logger.info("exact search N=%d symmetry=%s", inst.n_pitches, symmetry.value)
    return _result(job, _run(job, app), started)


def solve_approx(
    inst: Instance,
    optimal: float | None = None,
    cyclic: bool = True,
    time_limit: float | None = None,
    app: _app.Application | None = None,
) -> SolveResult:
    """
    Find a sequence of least approximated noise over every admissible tire length.

    This is the optimum of the MILP solved for every ``j``. The approximated
    noise depends on where the sequence starts, so every rotation is a
    distinct candidate.

    Parameters
    ----------
    inst : Instance
        The instance.
    optimal : float, optional
        Known exact optimum; enables the ``gap`` of the result.
    cyclic : bool, optional
        Enforce adjacency and run constraints across the wrap (default), or
        only along the sequence as the MILP does.
    time_limit : float, optional
        Wall-clock limit in seconds.
    app : Application, optional
        Runtime configuration.

    Returns
    -------
    SolveResult
        With both the approximated and the real noise of the sequence found.

    Raises
    ------
    InfeasibleInstanceError
        If no sequence satisfies the instance.
    """
    app = _app.check_initialized_app(app)
    inst.check_feasible()
    started = time.time()
    job = _Job(
        inst=inst,
        objective=_enums.Objective.APPROX,
        symmetry=_enums.Symmetry.ROTATION_CUTS if cyclic else _enums.Symmetry.NONE,
        cyclic=cyclic,
        prefix=(),
        batch_size=batch_rows(inst.n_pitches, inst.K, app.batch_size),
        started=started,
        deadline=_deadline(inst, time_limit, app, started),
        seed=None,
    )
    logger.info("approximated search N=%d cyclic=%s", inst.n_pitches, cyclic)
    return _result(job, _run(job, app), started, optimal=optimal)


class LengthBest(msgspec.Struct, frozen=True):
    j: int
    tire_length: int
    value: float


class ResultDocument(msgspec.Struct, frozen=True, kw_only=True):
    """JSON form of a :class:`SolveResult` with the instance it solves."""

    instance: Instance
    status: _enums.SolveStatus
    objective: _enums.Objective
    symmetry: _enums.Symmetry | None
    best_sequence: str | None
    exact_noise: float
    approx_noise: float
    harmonic: int
    approx_harmonic: int
    per_length: list[LengthBest]
    nodes_explored: int
    candidates_evaluated: int
    incumbent_updates: int
    wall_time: float
    optimal_reference: float | None
    gap: float | None


def result_document(result: SolveResult, inst: Instance) -> ResultDocument:
    return ResultDocument(
        instance=inst,
        status=result.status,
        objective=result.objective,
        symmetry=result.symmetry,
        best_sequence=None if result.best_sequence is None else str(result.best_sequence),
        exact_noise=result.exact_noise,
        approx_noise=result.approx_noise,
        harmonic=result.harmonic,
        approx_harmonic=result.approx_harmonic,
        per_length=[
            LengthBest(j, inst.tire_length(j), value) for j, value in result.per_length_best.items()
        ],
        nodes_explored=result.nodes_explored,
        candidates_evaluated=result.candidates_evaluated,
        incumbent_updates=result.incumbent_updates,
        wall_time=result.wall_time,
        optimal_reference=result.optimal_reference,
        gap=result.gap,
    )
