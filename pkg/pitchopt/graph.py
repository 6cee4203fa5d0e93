"""
Layered start-position graph of a tire of length ``T``.

Node ``(p, i)`` means "a pitch of type ``p`` starts at unit ``i``" (1-based).
A path from ``"s"`` to ``"t"`` through ``N`` pitch nodes is a sequence of
``N`` pitches filling the tire exactly. The arc leaving ``(p, i)`` carries the
``a_k``/``b_k`` contribution of that pitch.
"""
import functools
import logging
import os
from collections.abc import Iterator as _Iterator

import msgspec
import networkx as nx
import numpy as np

from pitchopt import _enums
from pitchopt.pitch import PitchCatalog, PitchSequence, canonical_form
from pitchopt.spectrum import FloatArray, pitch_contribution

__all__ = (
    "PitchGraph",
    "PathResult",
    "build_graph",
    "count_compositions",
    "dump_edges",
    "enumerate_paths",
    "min_noise_path",
    "path_count",
)

logger = logging.getLogger(__name__)

SOURCE = "s"
SINK = "t"

Node = tuple[int, int] | str


class PitchGraph:
    """
    The DAG of pitch start positions for one tire length.

    Parameters
    ----------
    catalog : PitchCatalog
        Pitch types.
    tire_length : int
        ``T``, in units.
    harmonics : int
        Number of harmonics carried by arc weights.
    digraph : networkx.DiGraph
        The underlying graph; arcs leaving a pitch node hold ``wa`` and ``wb``
        weight vectors for ``k = 1..K``.
    """

    __slots__ = ("catalog", "tire_length", "harmonics", "digraph")

    def __init__(
        self,
        catalog: PitchCatalog,
        tire_length: int,
        harmonics: int,
        digraph: "nx.DiGraph[Node]",
    ) -> None:
        self.catalog = catalog
        self.tire_length = tire_length
        self.harmonics = harmonics
        self.digraph = digraph

    @property
    def node_count(self) -> int:
        return self.digraph.number_of_nodes()

    @property
    def arc_count(self) -> int:
        return self.digraph.number_of_edges()

    @property
    def source_arcs(self) -> list[tuple[Node, Node]]:
        return list(self.digraph.out_edges(SOURCE))

    @property
    def sink_arcs(self) -> list[tuple[Node, Node]]:
        return list(self.digraph.in_edges(SINK))


class PathResult(msgspec.Struct, frozen=True):
    """Outcome of :func:`min_noise_path`; ``sequence`` is ``None`` when infeasible."""

    sequence: PitchSequence | None
    value: float
    objective: _enums.Objective
    paths_examined: int

    @property
    def feasible(self) -> bool:
        return self.sequence is not None


def build_graph(catalog: PitchCatalog, T: int, K: int) -> PitchGraph:
    """
    Build the start-position graph of a tire of length ``T``.

    Arcs are ``s -> (p, 1)`` for every type, ``(p, i) -> (p', i + l_p)``
    whenever ``i + l_p <= T``, and ``(p, T - l_p + 1) -> t``. A tire shorter
    than every pitch yields a graph without any ``s``-``t`` path.
    """
    digraph: "nx.DiGraph[Node]" = nx.DiGraph()
    digraph.add_node(SOURCE)
    digraph.add_node(SINK)
    r = catalog.r
    digraph.add_nodes_from((p, i) for i in range(1, T + 1) for p in range(1, r + 1))
    digraph.add_edges_from((SOURCE, (p, 1)) for p in range(1, r + 1))

    for p, length in enumerate(catalog.lengths, start=1):
        last_start = T - length + 1
        if last_start < 1:
            continue
        wa, wb = pitch_contribution(T, np.arange(1, last_start + 1), length, catalog, K)
        for i in range(1, T + 1):
            if i + length <= T:
                weights = {"wa": wa[1:, i - 1], "wb": wb[1:, i - 1]}
                digraph.add_edges_from(
                    ((p, i), (q, i + length), weights) for q in range(1, r + 1)
                )
        digraph.add_edge((p, last_start), SINK, wa=wa[1:, -1], wb=wb[1:, -1])

    logger.debug(
        "graph T=%d: %d nodes, %d arcs", T, digraph.number_of_nodes(), digraph.number_of_edges()
    )
    return PitchGraph(catalog, T, K, digraph)


def _reachability(g: PitchGraph):
    """``reach(node, m)``: ``t`` is reachable through exactly ``m`` pitch nodes, node included."""
    digraph = g.digraph

    @functools.lru_cache(maxsize=None)
    def reach(node: Node, m: int) -> bool:
        if m == 0:
            return node == SINK
        if node == SINK:
            return False
        return any(reach(succ, m - 1) for succ in digraph.successors(node))

    return reach


def _walk_paths(g: PitchGraph, N: int) -> _Iterator[list[tuple[int, int]]]:
    digraph = g.digraph
    reach = _reachability(g)
    path: list[tuple[int, int]] = []

    def extend(node: tuple[int, int], left: int) -> _Iterator[list[tuple[int, int]]]:
        path.append(node)
        if left == 1:
            if digraph.has_edge(node, SINK):
                yield path
        else:
            for succ in digraph.successors(node):
                if succ != SINK and reach(succ, left - 1):
                    yield from extend(succ, left - 1)  # type: ignore[arg-type]
        path.pop()

    if N < 1:
        return
    for first in digraph.successors(SOURCE):
        if reach(first, N):
            yield from extend(first, N)  # type: ignore[arg-type]


def _to_sequence(g: PitchGraph, nodes: list[tuple[int, int]]) -> PitchSequence:
    types = tuple(p for p, _ in nodes)
    return PitchSequence(types, tuple(g.catalog.lengths[p - 1] for p in types))


def enumerate_paths(g: PitchGraph, N: int) -> list[PitchSequence]:
    """
    All ``s``-``t`` paths through exactly ``N`` pitch nodes, as sequences.

    The depth-first walk only enters nodes that can still reach ``t`` with
    the remaining pitch count.
    """
    return [_to_sequence(g, nodes) for nodes in _walk_paths(g, N)]


def path_count(g: PitchGraph, N: int) -> int:
    """Number of ``N``-pitch ``s``-``t`` paths, by dynamic programming over the DAG."""
    digraph = g.digraph
    ways: dict[Node, list[int]] = {node: [0] * (N + 1) for node in digraph.nodes}
    ways[SOURCE][0] = 1
    for node in nx.topological_sort(digraph):
        counts = ways[node]
        for succ in digraph.successors(node):
            target = ways[succ]
            if succ == SINK:
                for m in range(N + 1):
                    target[m] += counts[m]
            else:
                for m in range(N):
                    target[m + 1] += counts[m]
    return ways[SINK][N]


def count_compositions(T: int, N: int, lengths: tuple[int, ...]) -> int:
    """Ordered ways to write ``T`` as a sum of ``N`` parts drawn from ``lengths``."""
    table = [[0] * (T + 1) for _ in range(N + 1)]
    table[0][0] = 1
    for m in range(1, N + 1):
        for total in range(T + 1):
            table[m][total] = sum(
                table[m - 1][total - length] for length in lengths if length <= total
            )
    return table[N][T]


def _path_value(weights_a: FloatArray, weights_b: FloatArray, objective: _enums.Objective) -> float:
    if objective is _enums.Objective.EXACT:
        return float(np.hypot(weights_a, weights_b).max())
    return float(np.maximum(np.abs(weights_a), np.abs(weights_b)).max())


def _better(
    key: tuple[float, tuple[int, ...], tuple[int, ...]],
    best: tuple[float, tuple[int, ...], tuple[int, ...]],
) -> bool:
    tol = 1e-9 * max(1.0, abs(best[0]))
    if abs(key[0] - best[0]) <= tol:
        return key[1:] < best[1:]
    return key[0] < best[0]


def min_noise_path(
    g: PitchGraph,
    N: int,
    objective: _enums.Objective = _enums.Objective.EXACT,
) -> PathResult:
    """
    The ``N``-pitch path whose summed arc weights make the least noise.

    Values within a relative 1e-9 are ties, broken by the rotation-canonical
    form of the sequence, then by the sequence itself.

    Returns
    -------
    PathResult
        With ``sequence=None`` and an infinite value when no path exists.
    """
    digraph = g.digraph
    best: tuple[float, tuple[int, ...], tuple[int, ...]] | None = None
    best_sequence: PitchSequence | None = None
    examined = 0
    for nodes in _walk_paths(g, N):
        examined += 1
        arcs = list(zip(nodes, nodes[1:] + [SINK]))  # type: ignore[operator]
        sum_a = np.sum([digraph.edges[arc]["wa"] for arc in arcs], axis=0)
        sum_b = np.sum([digraph.edges[arc]["wb"] for arc in arcs], axis=0)
        value = _path_value(sum_a, sum_b, objective)
        sequence = _to_sequence(g, nodes)
        key = (value, canonical_form(sequence, reflect=False).types, sequence.types)
        if best is None or _better(key, best):
            best, best_sequence = key, sequence
    if best is None:
        return PathResult(None, float("inf"), objective, 0)
    return PathResult(best_sequence, best[0], objective, examined)


def dump_edges(
    g: PitchGraph,
    path: str | os.PathLike[str],
    weights: bool = False,
) -> int:
    """
    Write the arcs as ``from to`` lines, optionally followed by the weight vectors.

    Pitch nodes are written ``v{p}_{i}``. Returns the number of arcs written.
    """

    def label(node: Node) -> str:
        return node if isinstance(node, str) else f"v{node[0]}_{node[1]}"

    arcs = sorted(
        g.digraph.edges(data=True),
        key=lambda arc: (arc[0] != SOURCE, arc[1] == SINK, str(arc[0]), str(arc[1])),
    )
    with open(path, "w", encoding="utf-8") as file:
        file.write(f"# T={g.tire_length} K={g.harmonics} lengths={list(g.catalog.lengths)}\n")
        for tail, head, data in arcs:
            line = f"{label(tail)} {label(head)}"
            if weights and "wa" in data:
                line += " wa=" + ",".join(map(repr, data["wa"].tolist()))
                line += " wb=" + ",".join(map(repr, data["wb"].tolist()))
            file.write(line + "\n")
    logger.info("wrote %d arcs to %s", len(arcs), path)
    return len(arcs)
