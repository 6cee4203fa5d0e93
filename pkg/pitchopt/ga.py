"""
Genetic-algorithm baseline.

Individuals are length-``N`` type vectors. Every generation is repaired so
that occurrence bounds always hold; run-length and adjacency violations
(checked around the tire) are penalized instead, each costing more than the
noise of any sequence can reach.
"""
import logging
import math
import os
import time
from collections.abc import Mapping as _Mapping
from typing import Any

import msgspec
import numpy as np
import numpy.typing as npt

from pitchopt import _app, _enums, _errors, _io
from pitchopt.exact import Incumbent, SolveResult
from pitchopt.pitch import Instance, make_sequence
from pitchopt.spectrum import (
    approx_noise,
    batch_exact_noise,
    batch_rows,
    exact_noise,
    profile_spectrum,
)

__all__ = (
    "GaConfig",
    "GenerationStats",
    "load_config",
    "run_ga",
    "solve_ga",
    "write_trace_csv",
)

logger = logging.getLogger(__name__)

IntArray = npt.NDArray[np.int64]
FloatArray = npt.NDArray[np.float64]


class GaConfig(msgspec.Struct, frozen=True, kw_only=True, forbid_unknown_fields=True):
    """Genetic-algorithm settings."""

    population_size: int = 1500
    crossover_prob: float = 0.3
    mutation_prob: float = 0.15
    """Probability that an individual has one gene redrawn."""
    selection: _enums.Selection = _enums.Selection.RANKING
    selection_pressure: float = 0.4
    """Linear ranking: the best rank is drawn ``1 + s`` times the average, the worst ``1 - s``."""
    max_generations: int = 500
    stagnation_limit: int = 100
    """Stop after this many generations without improving the best noise."""
    elitism: int = 1
    seed: int = 0
    time_limit: float | None = None

    def __post_init__(self) -> None:
        if self.population_size < 2:
            raise _errors.ValidationError(
                f"population_size must be at least 2, got {self.population_size}"
            )
        for name in ("crossover_prob", "mutation_prob", "selection_pressure"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise _errors.ValidationError(f"{name} must lie in [0, 1], got {value}")
        if self.max_generations < 1 or self.stagnation_limit < 1:
            raise _errors.ValidationError("generation limits must be positive")
        if not 0 <= self.elitism < self.population_size:
            raise _errors.ValidationError(
                f"elitism must lie in [0, population_size), got {self.elitism}"
            )
        if self.time_limit is not None and self.time_limit <= 0:
            raise _errors.ValidationError(f"time_limit must be positive, got {self.time_limit}")


class GenerationStats(msgspec.Struct, frozen=True):
    generation: int
    best: float
    """Best fitness ever reached, penalties included."""
    mean: float
    """Mean fitness of the generation."""
    feasible: int
    """Individuals without run-length or adjacency violations."""


def load_config(settings: _Mapping[str, Any], **overrides: Any) -> GaConfig:
    """
    Build a configuration from instance-file ``ga.*`` settings.

    ``None`` overrides are ignored.

    Raises
    ------
    InstanceFormatError
        For unknown keys or values of the wrong type.
    ValidationError
        For values out of range.
    """
    merged = dict(settings)
    merged.update((key, value) for key, value in overrides.items() if value is not None)
    try:
        return msgspec.convert(merged, GaConfig, strict=False)
    except msgspec.ValidationError as error:
        raise _errors.InstanceFormatError(f"ga settings: {error}") from None


class _Fitness:
    """Penalized exact noise of a population, rows of 0-based types."""

    __slots__ = ("inst", "penalty", "forbidden", "windows", "batch_size")

    def __init__(self, inst: Instance, batch_size: int) -> None:
        n = inst.n_pitches
        r = inst.catalog.r
        self.inst = inst
        self.batch_size = batch_size
        # no feasible sequence exceeds the first-harmonic bound
        self.penalty = 2.0 * n * inst.catalog.height / math.pi
        self.forbidden = np.zeros((r, r), dtype=bool)
        for a, b in inst.incompatible:
            self.forbidden[a - 1, b - 1] = True
        self.windows = [
            (p, (np.arange(n)[:, None] + np.arange(bound + 1)) % n)
            for p, bound in enumerate(inst.max_seq)
            if bound is not None and bound < n
        ]

    def violations(self, population: IntArray) -> IntArray:
        following = np.roll(population, -1, axis=1)
        count = self.forbidden[population, following].sum(axis=1)
        for p, window in self.windows:
            count += (population[:, window] == p).all(axis=2).sum(axis=1)
        return count.astype(np.int64)

    def __call__(self, population: IntArray) -> tuple[FloatArray, IntArray]:
        catalog = self.inst.catalog
        rows = batch_rows(self.inst.n_pitches, self.inst.K, self.batch_size)
        noise = np.concatenate([
            batch_exact_noise(population[start:start + rows] + 1, catalog, self.inst.K)[0]
            for start in range(0, len(population), rows)
        ])
        violations = self.violations(population)
        return noise + self.penalty * violations, violations


def _repair(genes: IntArray, inst: Instance, rng: np.random.Generator) -> None:
    """Reassign genes in place until every occurrence bound holds."""
    r = inst.catalog.r
    min_occ, max_occ = inst.min_occ, inst.max_occ
    counts = np.bincount(genes, minlength=r)
    free: list[int] = []
    for p in range(r):
        if counts[p] > max_occ[p]:
            drop = rng.choice(np.flatnonzero(genes == p), counts[p] - max_occ[p], replace=False)
            free.extend(drop.tolist())
            counts[p] = max_occ[p]
    need = [p for p in range(r) for _ in range(max(0, min_occ[p] - int(counts[p])))]
    while len(free) < len(need):
        donors = [p for p in range(r) if counts[p] > min_occ[p]]
        p = donors[int(rng.integers(len(donors)))]
        taken = set(free)
        positions = [i for i in np.flatnonzero(genes == p).tolist() if i not in taken]
        free.append(positions[int(rng.integers(len(positions)))])
        counts[p] -= 1
    order = rng.permutation(len(free)).tolist()
    slots = [free[i] for i in order]
    for position, p in zip(slots, need):
        genes[position] = p
        counts[p] += 1
    for position in slots[len(need):]:
        room = [p for p in range(r) if counts[p] < max_occ[p]]
        p = room[int(rng.integers(len(room)))]
        genes[position] = p
        counts[p] += 1


def _selection_probabilities(fitness: FloatArray, cfg: GaConfig) -> FloatArray:
    size = len(fitness)
    if cfg.selection is _enums.Selection.ROULETTE:
        weights = 1.0 / np.maximum(fitness, np.finfo(np.float64).tiny)
        return weights / weights.sum()
    order = np.argsort(fitness, kind="stable")
    slope = 2.0 * cfg.selection_pressure / (size - 1)
    probabilities = np.empty(size)
    probabilities[order] = (1.0 + cfg.selection_pressure - slope * np.arange(size)) / size
    return probabilities / probabilities.sum()


def _crossover(parents: IntArray, cfg: GaConfig, rng: np.random.Generator) -> IntArray:
    children = parents.copy()
    n = parents.shape[1]
    if n < 2:
        return children
    for first in range(0, len(children) - 1, 2):
        if rng.random() < cfg.crossover_prob:
            cut = int(rng.integers(1, n))
            tail = children[first, cut:].copy()
            children[first, cut:] = children[first + 1, cut:]
            children[first + 1, cut:] = tail
    return children


def _mutate(population: IntArray, r: int, cfg: GaConfig, rng: np.random.Generator) -> None:
    if r < 2:
        return
    n = population.shape[1]
    for row in np.flatnonzero(rng.random(len(population)) < cfg.mutation_prob).tolist():
        gene = int(rng.integers(n))
        shift = int(rng.integers(1, r))
        population[row, gene] = (population[row, gene] + shift) % r


def run_ga(
    inst: Instance,
    cfg: GaConfig | None = None,
    app: _app.Application | None = None,
) -> tuple[SolveResult, list[GenerationStats]]:
    """
    Evolve a population and return the best sequence with the per-generation trace.

    The run is fully determined by ``cfg.seed``.

    Raises
    ------
    InfeasibleInstanceError
        If the occurrence windows cannot add up to ``N``.
    """
    app = _app.check_initialized_app(app)
    cfg = cfg or GaConfig()
    inst.check_feasible()
    started = time.time()
    deadline = None if cfg.time_limit is None else started + cfg.time_limit
    rng = np.random.default_rng(cfg.seed)
    n, r = inst.n_pitches, inst.catalog.r
    fitness_of = _Fitness(inst, app.batch_size)

    population = rng.integers(0, r, size=(cfg.population_size, n), dtype=np.int64)
    for genes in population:
        _repair(genes, inst, rng)
    fitness, violations = fitness_of(population)

    trace: list[GenerationStats] = []
    incumbents: list[Incumbent] = []
    best_value = math.inf
    best_genes = population[0].copy()
    best_violations = 0
    stagnant = 0
    timed_out = False
    for generation in range(cfg.max_generations + 1):
        leader = int(fitness.argmin())
        if math.isinf(best_value) or fitness[leader] < best_value - 1e-9 * max(1.0, best_value):
            best_value = float(fitness[leader])
            best_genes = population[leader].copy()
            best_violations = int(violations[leader])
            stagnant = 0
            if not best_violations:
                incumbents.append(Incumbent(
                    make_sequence(best_genes + 1, inst.catalog), best_value, time.time() - started
                ))
        else:
            stagnant += 1
        trace.append(GenerationStats(
            generation, best_value, float(fitness.mean()), int((violations == 0).sum())
        ))
        logger.info(
            "generation %d best %.6f mean %.6f", generation, best_value, trace[-1].mean
        )
        if stagnant >= cfg.stagnation_limit or generation == cfg.max_generations:
            break
        if deadline is not None and time.time() > deadline:
            timed_out = True
            logger.warning("time limit reached after %d generations", generation)
            break

        parents = population[rng.choice(
            cfg.population_size, size=cfg.population_size, p=_selection_probabilities(fitness, cfg)
        )]
        children = _crossover(parents, cfg, rng)
        _mutate(children, r, cfg, rng)
        for genes in children:
            _repair(genes, inst, rng)
        child_fitness, child_violations = fitness_of(children)
        if cfg.elitism:
            elite = np.argsort(fitness, kind="stable")[:cfg.elitism]
            worst = np.argsort(child_fitness, kind="stable")[::-1][:cfg.elitism]
            children[worst] = population[elite]
            child_fitness[worst] = fitness[elite]
            child_violations[worst] = violations[elite]
        population, fitness, violations = children, child_fitness, child_violations

    common: dict[str, Any] = dict(
        objective=_enums.Objective.EXACT,
        nodes_explored=0,
        candidates_evaluated=cfg.population_size * len(trace),
        incumbent_updates=len(incumbents),
        wall_time=time.time() - started,
        incumbents=tuple(incumbents),
    )
    if best_violations:
        logger.warning("no sequence without run-length or adjacency violations was found")
        return SolveResult(status=_enums.SolveStatus.INFEASIBLE, **common), trace

    best = make_sequence(best_genes + 1, inst.catalog)
    spectrum = profile_spectrum(best, inst.catalog, inst.K)
    exact = exact_noise(spectrum)
    approx = approx_noise(spectrum)
    if timed_out:
        logger.info("best after time limit %.6f", exact.value)
    result = SolveResult(
        status=_enums.SolveStatus.FEASIBLE,
        best_sequence=best,
        exact_noise=exact.value,
        approx_noise=approx.value,
        harmonic=exact.harmonic,
        approx_harmonic=approx.harmonic,
        per_length_best={inst.l_max - best.total_length: exact.value},
        **common,
    )
    return result, trace


def solve_ga(
    inst: Instance,
    cfg: GaConfig | None = None,
    app: _app.Application | None = None,
) -> SolveResult:
    """
    Search for a quiet sequence with a genetic algorithm.

    Parameters
    ----------
    inst : Instance
        The instance. Run-length and adjacency constraints are checked around the tire.
    cfg : GaConfig, optional
        Settings; the defaults are population 1500, crossover 0.3, mutation
        0.15 and ranking selection with pressure 0.4.
    app : Application, optional
        Runtime configuration (evaluation batch size).

    Returns
    -------
    SolveResult
        ``FEASIBLE`` with the best sequence found, or ``INFEASIBLE`` without
        one when every individual kept violating a constraint.
    """
    return run_ga(inst, cfg, app)[0]


def write_trace_csv(trace: list[GenerationStats], path: str | os.PathLike[str]) -> int:
    return _io.write_csv(
        path,
        ("generation", "best", "mean", "feasible"),
        ((s.generation, repr(s.best), repr(s.mean), s.feasible) for s in trace),
    )
