import itertools

import numpy as np
import pytest

from pitchopt import _enums
from pitchopt.graph import (
    build_graph,
    count_compositions,
    dump_edges,
    enumerate_paths,
    min_noise_path,
    path_count,
)
from pitchopt.pitch import make_catalog, standard_catalog
from pitchopt.spectrum import approx_noise, exact_noise, profile_spectrum


@pytest.fixture
def example_catalog():
    return make_catalog((2, 3, 4))


def test_example_graph(example_catalog):
    g = build_graph(example_catalog, 6, 5)
    assert len(g.source_arcs) == 3
    assert len(g.sink_arcs) == 3
    assert g.arc_count == 33
    assert g.node_count == 6 * 3 + 2
    assert [seq.types for seq in enumerate_paths(g, 3)] == [(1, 1, 1)]
    assert sorted(seq.types for seq in enumerate_paths(g, 2)) == [(1, 3), (2, 2), (3, 1)]
    assert path_count(g, 3) == 1
    assert path_count(g, 2) == 3
    assert enumerate_paths(g, 4) == []


def test_tire_shorter_than_pitches(example_catalog):
    g = build_graph(example_catalog, 1, 3)
    assert enumerate_paths(g, 1) == []
    result = min_noise_path(g, 1)
    assert not result.feasible
    assert result.value == float("inf")


@pytest.mark.parametrize("lengths", [(2, 3), (2, 3, 4), (4, 5, 6)])
def test_path_counts_match_compositions(lengths):
    catalog = make_catalog(lengths)
    for T in range(1, 19):
        g = build_graph(catalog, T, 2)
        for n in range(1, 9):
            expected = count_compositions(T, n, lengths)
            assert path_count(g, n) == expected
            if T <= 12:
                assert len(enumerate_paths(g, n)) == expected


def test_compositions_by_hand():
    assert count_compositions(6, 2, (2, 3, 4)) == 3
    assert count_compositions(6, 3, (2, 3, 4)) == 1
    assert count_compositions(0, 0, (2,)) == 1
    assert count_compositions(5, 2, (2,)) == 0


def test_paths_fill_the_tire():
    catalog = make_catalog((2, 3))
    g = build_graph(catalog, 12, 4)
    for seq in enumerate_paths(g, 5):
        assert seq.total_length == 12


def test_arc_weights_sum_to_spectrum():
    catalog = standard_catalog()
    g = build_graph(catalog, 24, 12)
    for seq in enumerate_paths(g, 5):
        spec = profile_spectrum(seq, catalog, 12)
        nodes = list(zip(seq.types, seq.start_positions))
        arcs = list(zip(nodes, nodes[1:] + ["t"]))
        wa = np.sum([g.digraph.edges[arc]["wa"] for arc in arcs], axis=0)
        wb = np.sum([g.digraph.edges[arc]["wb"] for arc in arcs], axis=0)
        np.testing.assert_allclose(wa, spec.coeff_a[1:], atol=1e-9)
        np.testing.assert_allclose(wb, spec.coeff_b[1:], atol=1e-9)


@pytest.mark.parametrize("objective", list(_enums.Objective))
def test_min_noise_path_is_minimal(objective):
    catalog = standard_catalog()
    T, n, K = 26, 5, 15
    g = build_graph(catalog, T, K)
    result = min_noise_path(g, n, objective)
    measure = exact_noise if objective is _enums.Objective.EXACT else approx_noise
    values = [
        measure(profile_spectrum(seq, catalog, K)).value for seq in enumerate_paths(g, n)
    ]
    assert result.feasible
    assert result.paths_examined == len(values) == path_count(g, n)
    assert result.value == pytest.approx(min(values), abs=1e-9)
    assert measure(profile_spectrum(result.sequence, catalog, K)).value == pytest.approx(
        result.value, abs=1e-9
    )


def test_min_noise_path_is_deterministic():
    catalog = standard_catalog()
    g = build_graph(catalog, 25, 15)
    first = min_noise_path(g, 5)
    second = min_noise_path(build_graph(catalog, 25, 15), 5)
    assert first.sequence == second.sequence
    # every rotation has the same exact noise; the smallest one wins
    assert first.sequence.types == min(
        seq.types
        for seq in enumerate_paths(g, 5)
        if exact_noise(profile_spectrum(seq, catalog, 15)).value
        == pytest.approx(first.value, abs=1e-9)
    )


def test_dump_edges(tmp_path, example_catalog):
    g = build_graph(example_catalog, 6, 3)
    path = tmp_path / "edges.txt"
    assert dump_edges(g, path) == 33
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# T=6")
    assert lines[1:4] == ["s v1_1", "s v2_1", "s v3_1"]
    assert sum(line.endswith(" t") for line in lines) == 3
    dump_edges(g, path, weights=True)
    weighted = [line for line in path.read_text().splitlines() if "wa=" in line]
    assert len(weighted) == 30
    assert all(len(line.split("wa=")[1].split(" ")[0].split(",")) == 3 for line in weighted)


def test_exhaustive_small_graphs():
    catalog = make_catalog((2, 3))
    for n in range(1, 7):
        for T in range(2 * n, 3 * n + 1):
            g = build_graph(catalog, T, 3)
            expected = {
                types
                for types in itertools.product((1, 2), repeat=n)
                if sum(catalog.lengths[t - 1] for t in types) == T
            }
            assert {seq.types for seq in enumerate_paths(g, n)} == expected
