import mip
import numpy as np
import pytest

from pitchopt import _errors
from pitchopt.milp import (
    MilpOptions,
    Sense,
    add_incumbent_cuts,
    build_milp,
    decode_assignment,
    encode_sequence,
    evaluate_assignment,
    export_model,
    instance_options,
    read_model,
    to_mip_model,
)
from pitchopt.pitch import make_instance, make_sequence, parse_sequence, standard_instance
from pitchopt.spectrum import approx_noise, profile_spectrum


@pytest.fixture(scope="module")
def inst():
    return standard_instance(10, 1, 8)


@pytest.fixture(scope="module")
def models(inst):
    cache = {}

    def model(j):
        if j not in cache:
            cache[j] = build_milp(inst, j, instance_options(inst))
        return cache[j]

    return model


def test_binary_count(inst, models):
    m = models(0)
    assert m.tire_length == 60
    assert len(m.binaries) == (60 - 4 + 1) + (60 - 5 + 1) + (60 - 6 + 1)
    assert len(m.continuous) == 1 + 2 * inst.K
    assert m.variable_count == len(m.binaries) + len(m.continuous)


def test_row_families(inst, models):
    m = models(9)
    assert len(m.rows_tagged("c1")) == inst.K
    assert len(m.rows_tagged("c5")) == inst.K
    assert m.row("c8_fill").rhs == 51
    assert m.row("c10_count").rhs == 10
    assert m.row("c9_anchor").sense is Sense.EQ
    assert len(m.rows_tagged("c13")) == len(m.rows_tagged("c14")) == 3
    assert not m.rows_tagged("c15")
    assert not m.rows_tagged("c16")
    with pytest.raises(KeyError):
        m.row("c99")


def test_non_overlap_rows(models):
    m = models(9)
    with pytest.raises(KeyError):
        m.row("c9_i1")
    assert m.row("c9_anchor").terms == (("x_p1_i1", 1.0), ("x_p2_i1", 1.0), ("x_p3_i1", 1.0))
    inside_first = m.row("c9_i2")
    assert inside_first.terms == (("x_p1_i2", -1.0), ("x_p2_i2", -1.0), ("x_p3_i2", -1.0))
    assert m.row("c9_i5").terms[0] == ("x_p1_i1", 1.0)
    assert len(m.rows_tagged("c9")) == m.tire_length


def test_invalid_j(inst):
    with pytest.raises(_errors.TrailingUnitsError):
        build_milp(inst, 21)


def test_random_assignments_match_approx_noise(inst, models):
    rng = np.random.default_rng(10)
    checked = 0
    while checked < 100:
        types = rng.integers(1, 4, size=10)
        counts = np.bincount(types, minlength=4)[1:]
        if counts.min() < 1:
            continue
        seq = make_sequence(types, inst.catalog)
        m = models(inst.l_max - seq.total_length)
        report = evaluate_assignment(m, encode_sequence(m, seq))
        assert report.feasible, report.violated
        expected = approx_noise(profile_spectrum(seq, inst.catalog, inst.K)).value
        assert report.objective == pytest.approx(expected, abs=1e-9)
        assert decode_assignment(m, encode_sequence(m, seq)) == seq
        checked += 1


def test_overlapping_assignment_is_infeasible(inst, models):
    seq = parse_sequence("1311323331", inst.catalog)
    m = models(inst.l_max - seq.total_length)
    assignment = encode_sequence(m, seq)
    assignment["x_p1_i1"] = 0.0
    assignment["x_p2_i2"] = 1.0
    report = evaluate_assignment(m, assignment)
    assert not report.feasible
    assert np.isnan(report.objective)
    assert any(name.startswith("c9") for name in report.violated)


def test_occurrence_rows(models, inst):
    seq = parse_sequence("1111111111", inst.catalog)
    m = models(inst.l_max - seq.total_length)
    report = evaluate_assignment(m, encode_sequence(m, seq))
    assert "c14_p1" in report.violated
    assert "c13_p2" in report.violated


def test_missing_binaries(models):
    m = models(0)
    with pytest.raises(_errors.ValidationError):
        evaluate_assignment(m, {})


def test_encode_requires_exact_fill(models, inst):
    with pytest.raises(_errors.ValidationError):
        encode_sequence(models(0), parse_sequence("1311323331", inst.catalog))


def test_run_windows(catalog):
    inst = make_instance(catalog, 6, max_seq=(2, None, None))
    m = build_milp(inst, 9, instance_options(inst))
    windows = m.rows_tagged("c15")
    assert windows
    assert all(row.name.startswith("c15_p1_") and len(row.terms) == 3 for row in windows)
    seq = parse_sequence("111222", catalog)
    assert seq.total_length == m.tire_length == 27
    report = evaluate_assignment(m, encode_sequence(m, seq))
    assert "c15_p1_i1" in report.violated
    ok = parse_sequence("112122", catalog)
    assert evaluate_assignment(m, encode_sequence(m, ok)).feasible


def test_default_incompatible_pair(catalog):
    inst = make_instance(catalog, 4)
    m = build_milp(inst, 0, MilpOptions(incompatibility=True))
    assert m.rows_tagged("c16") and all("_a1_b3_" in row.name for row in m.rows_tagged("c16"))
    assert m.rows_tagged("c17") and all("_a3_b1_" in row.name for row in m.rows_tagged("c17"))
    seq = parse_sequence("3333", catalog)
    assert evaluate_assignment(m, encode_sequence(m, seq)).feasible
    seq = parse_sequence("1313", catalog)
    m = build_milp(inst, inst.l_max - seq.total_length, MilpOptions(incompatibility=True))
    report = evaluate_assignment(m, encode_sequence(m, seq))
    assert {"c16_a1_b3_i1", "c17_a3_b1_i5", "c16_a1_b3_i11"} <= set(report.violated)


def test_symmetry_fix(inst):
    m = build_milp(inst, 0, MilpOptions(symmetry_fix=True))
    row = m.row("c22_fix_first")
    assert row.terms == (("x_p1_i1", 1.0),)
    seq = parse_sequence("3333333333", inst.catalog)
    assert "c22_fix_first" in evaluate_assignment(m, encode_sequence(m, seq)).violated


def test_incumbent_cuts(inst, models):
    seq = parse_sequence("1311323331", inst.catalog)
    m = models(inst.l_max - seq.total_length)
    value = evaluate_assignment(m, encode_sequence(m, seq)).objective

    cut = add_incumbent_cuts(m, value, seq)
    assert len(cut.rows) == len(m.rows) + 2
    report = evaluate_assignment(cut, encode_sequence(cut, seq))
    assert report.violated == ("c21_nogood_0",)

    tighter = add_incumbent_cuts(cut, value - 1.0, seq, rotations_too=True)
    assert len(tighter.rows_tagged("c20")) == 1
    assert tighter.row("c20_ub").rhs == value - 1.0
    assert len(tighter.rows_tagged("c21")) == 1 + 10
    report = evaluate_assignment(tighter, encode_sequence(tighter, seq))
    assert "c20_ub" in report.violated


def test_mip_model(inst, models):
    m = models(9)
    model = to_mip_model(m)
    assert model.num_cols == m.variable_count
    assert model.num_rows == len(m.rows)
    assert model.var_by_name("x_p1_i1").var_type == mip.BINARY
    assert model.var_by_name("za_k1").lb < -1e20
    assert model.var_by_name("z").lb == 0.0
    assert model.constr_by_name("c10_count").rhs == 10


def test_export_round_trip(tmp_path, inst):
    cut = make_sequence((1, 1, 1, 1, 2, 3, 3, 3, 3, 3), inst.catalog)
    j = inst.l_max - cut.total_length
    m = build_milp(inst, j, MilpOptions(min_max_occ=True, incompatibility=True, symmetry_fix=True))
    m = add_incumbent_cuts(m, 9.5, cut)
    path = tmp_path / "model.lp"
    export_model(m, path)
    assert "c8_fill" in path.read_text()

    parsed = read_model(path)
    assert (parsed.j, parsed.tire_length, parsed.n_pitches) == (9, 51, 10)
    assert parsed.harmonics == inst.K
    assert parsed.lengths == (4, 5, 6)
    assert parsed.objective == "z"
    assert sorted(parsed.binaries) == sorted(m.binaries)
    assert sorted(parsed.continuous) == sorted(m.continuous)
    assert [row.name for row in parsed.rows] == [row.name for row in m.rows]
    assert sorted(parsed.row("c8_fill").terms) == sorted(m.row("c8_fill").terms)
    assert parsed.row("c21_nogood_0").rhs == 9

    seq = make_sequence((1, 1, 1, 2, 3, 3, 3, 3, 2, 2), inst.catalog)
    assert seq.total_length == 51
    before = evaluate_assignment(m, encode_sequence(m, seq))
    after = evaluate_assignment(parsed, encode_sequence(parsed, seq))
    assert set(after.violated) == set(before.violated)
    assert after.za == pytest.approx(before.za, abs=1e-3)
    assert after.zb == pytest.approx(before.zb, abs=1e-3)
    assert decode_assignment(parsed, encode_sequence(parsed, seq)) == seq


def test_export_requires_model_suffix(tmp_path, models):
    with pytest.raises(_errors.ValidationError):
        export_model(models(0), tmp_path / "model.txt")
    with pytest.raises(_errors.ValidationError):
        read_model(tmp_path / "model.txt")


def test_read_model_rejects_foreign_files(tmp_path):
    other = mip.Model(solver_name=mip.CBC)
    x = other.add_var(name="x", var_type=mip.BINARY)
    y = other.add_var(name="y", var_type=mip.BINARY)
    other.objective = mip.minimize(x + y)
    other.add_constr(x + y >= 1, name="cover")
    path = tmp_path / "other.lp"
    other.write(str(path))
    with pytest.raises(_errors.ModelFormatError):
        read_model(path)
