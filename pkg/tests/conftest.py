import itertools
import pathlib

import pytest

from pitchopt import _app
from pitchopt.pitch import (
    Instance,
    PitchCatalog,
    PitchSequence,
    make_catalog,
    make_sequence,
    standard_catalog,
    validate_sequence,
)
from pitchopt.spectrum import exact_noise, profile_spectrum

INSTANCES = pathlib.Path(__file__).resolve().parent.parent / "instances"

# optimal exact noise of the published (N, minOcc, maxOcc) instances
OPTIMA = {
    (10, 1, 8): 9.019,
    (10, 2, 6): 9.247,
    (10, 2, 4): 9.268,
    (10, 3, 4): 9.368,
    (15, 1, 13): 7.027,
    (15, 2, 11): 7.236,
    (15, 4, 7): 7.261,
    (15, 4, 6): 7.439,
}


@pytest.fixture
def catalog() -> PitchCatalog:
    return standard_catalog()


@pytest.fixture
def short_catalog() -> PitchCatalog:
    """Lengths 2 and 3, small enough for exhaustive oracles."""
    return make_catalog((2, 3))


@pytest.fixture
def app():
    app = _app.initialize_app(workers=1, batch_size=512, name="tests")
    yield app
    _app.close_app("tests")


def brute_force(inst: Instance) -> tuple[float, list[PitchSequence]]:
    """Least exact noise over every valid type tuple, and all tuples reaching it."""
    best = float("inf")
    winners: list[PitchSequence] = []
    types = range(1, inst.catalog.r + 1)
    for candidate in itertools.product(types, repeat=inst.n_pitches):
        seq = make_sequence(candidate, inst.catalog)
        if not validate_sequence(seq, inst).valid:
            continue
        value = exact_noise(profile_spectrum(seq, inst.catalog, inst.K)).value
        if value < best - 1e-9:
            best, winners = value, [seq]
        elif abs(value - best) <= 1e-9:
            winners.append(seq)
    return best, winners
