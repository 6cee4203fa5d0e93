from fractions import Fraction

import pytest

from pitchopt import _errors
from pitchopt.pitch import (
    canonical_form,
    default_harmonics,
    derive_unit,
    extreme_pair_incompatibility,
    format_sequence,
    make_catalog,
    make_instance,
    make_sequence,
    parse_sequence,
    reversed_sequence,
    rotations,
    standard_instance,
    validate_sequence,
)


def test_unit_of_standard_ratios():
    unit, lengths = derive_unit(("1", "1.25", "1.5"))
    assert unit == Fraction(1, 4)
    assert lengths == (4, 5, 6)


def test_unit_from_floats_and_integers():
    assert derive_unit((1.0, 1.25, 1.5)) == (Fraction(1, 4), (4, 5, 6))
    assert derive_unit((2, 3, 4)) == (Fraction(1), (2, 3, 4))
    assert derive_unit((Fraction(2, 3), Fraction(1))) == (Fraction(1, 3), (2, 3))


@pytest.mark.parametrize("ratios", [(), ("0", "1"), ("1.5", "1"), ("1", "1"), ("one",)])
def test_bad_ratios(ratios):
    with pytest.raises(_errors.ValidationError):
        derive_unit(ratios)


def test_catalog_rejects_groove_and_height():
    with pytest.raises(_errors.ValidationError):
        make_catalog((1, 2), groove=1.0)
    with pytest.raises(_errors.ValidationError):
        make_catalog((1, 2), height=0)


def test_instance_lengths(catalog):
    inst = standard_instance(10, 1, 8)
    assert inst.l_min == 40
    assert inst.l_max == 60
    assert list(inst.trailing_units) == list(range(21))
    assert inst.tire_length(0) == 60
    assert inst.tire_length(20) == 40
    assert inst.K == 15
    with pytest.raises(_errors.TrailingUnitsError):
        inst.tire_length(21)
    with pytest.raises(IndexError):
        inst.tire_length(-1)


def test_default_harmonics(catalog):
    assert [default_harmonics(n) for n in (1, 2, 10, 15, 20, 60)] == [1, 3, 15, 22, 30, 90]
    assert make_instance(catalog, 15).K == 22
    assert make_instance(catalog, 100).K == 150
    assert make_instance(catalog, 200).K == 200
    assert make_instance(catalog, 10, harmonics=30).K == 30


def test_infeasible_window(catalog):
    inst = make_instance(catalog, 10, 4, 5)
    with pytest.raises(_errors.InfeasibleInstanceError):
        inst.check_feasible()
    make_instance(catalog, 10, 0, 4).check_feasible()
    with pytest.raises(_errors.InfeasibleInstanceError):
        make_instance(catalog, 13, 0, 4).check_feasible()


def test_invalid_instance(catalog):
    with pytest.raises(_errors.ValidationError):
        make_instance(catalog, 10, 5, 4)
    with pytest.raises(_errors.ValidationError):
        make_instance(catalog, 10, incompatible=[(1, 4)])
    with pytest.raises(_errors.ValidationError):
        make_instance(catalog, 0)


def test_sequence_positions(catalog):
    seq = parse_sequence("1311323331", catalog)
    assert seq.types == (1, 3, 1, 1, 3, 2, 3, 3, 3, 1)
    assert seq.start_positions[:4] == (1, 5, 11, 15)
    assert seq.total_length == 51
    assert str(seq) == "1311323331"


def test_parse_sequence_forms(catalog):
    assert parse_sequence("1,3,2", catalog).types == (1, 3, 2)
    many = make_catalog(range(1, 12))
    seq = parse_sequence("1,11,2", many)
    assert format_sequence(seq) == "1,11,2"


@pytest.mark.parametrize("text", ["", "12a", "1,,2", "1401"])
def test_malformed_sequences(catalog, text):
    with pytest.raises(_errors.SequenceFormatError):
        parse_sequence(text, catalog)


def test_canonical_forms(catalog):
    seq = parse_sequence("1311323331", catalog)
    assert all(canonical_form(rot) == canonical_form(seq) for rot in rotations(seq))
    necklace = canonical_form(seq, reflect=False)
    assert necklace.types == min(rot.types for rot in rotations(seq))
    mirrored = reversed_sequence(seq)
    assert canonical_form(mirrored) == canonical_form(seq)
    assert canonical_form(seq, reflect=True).types <= necklace.types


def test_published_solutions_are_rotations(catalog):
    found = parse_sequence("1311323331", catalog)
    published = parse_sequence("1323331131", catalog)
    assert canonical_form(found, reflect=False) == canonical_form(published, reflect=False)


def test_validate_cyclic_and_linear(catalog):
    inst = make_instance(catalog, 6, 0, 6, max_seq=2, incompatible=extreme_pair_incompatibility(3))
    wrap = make_sequence((1, 1, 2, 2, 1, 2), catalog)
    report = validate_sequence(wrap, inst)
    assert report.valid

    runs_across_wrap = make_sequence((1, 2, 2, 1, 2, 1), catalog)
    report = validate_sequence(runs_across_wrap, inst)
    assert report.valid

    wrapped_run = make_sequence((1, 2, 1, 2, 1, 1), catalog)
    report = validate_sequence(wrapped_run, inst)
    assert report.max_seq_linear
    assert not report.max_seq
    assert report.cyclic
    assert any("ctMaxSeq" in v for v in report.violations)

    wrapped_pair = make_sequence((1, 2, 2, 1, 2, 3), catalog)
    report = validate_sequence(wrapped_pair, inst)
    assert report.incompatibility_linear
    assert not report.incompatibility
    assert any("wrap" in v for v in report.violations)


def test_validate_occurrences(catalog):
    inst = standard_instance(10, 2, 4)
    report = validate_sequence(parse_sequence("1333221311", catalog), inst)
    assert report.valid
    report = validate_sequence(parse_sequence("1111122333", catalog), inst)
    assert not report.min_max_occ
    report = validate_sequence(parse_sequence("133322131", catalog), inst)
    assert not report.valid


def test_single_type_cyclic_run(catalog):
    inst = make_instance(make_catalog((1,)), 3, max_seq=2)
    report = validate_sequence(make_sequence((1, 1, 1), inst.catalog), inst)
    assert not report.max_seq
    assert not report.max_seq_linear
