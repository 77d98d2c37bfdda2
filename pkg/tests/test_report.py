import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adabo.bench import RunEnsemble
from adabo.gpr import Doe
from adabo.optimizer import IterationRecord, OptimizerConfig, RunHistory, Variant
from adabo.report import (
    IllDefinedRatioError,
    WcriReport,
    emit_history_plotdata,
    emit_table,
    parse_table,
    wcri,
    wcri_report,
    worst_case_aggregate,
)


def history(curve, gpi_at=()):
    recs = [IterationRecord(i + 1, np.array([0.5]), float(v), float(v), 0, i + 1 in gpi_at)
            for i, v in enumerate(curve)]
    return RunHistory(OptimizerConfig(iterations=len(curve)), Doe([[0.1]], [100.0]), recs)


def ensemble(curves, variant=Variant.BO, gpi_at=(), objective="Sphere-2D"):
    curves = np.atleast_2d(curves)
    cfg = OptimizerConfig(variant=variant, iterations=curves.shape[1])
    return RunEnsemble(cfg, list(range(len(curves))), [history(c, gpi_at) for c in curves], objective)


BASE = np.array([[8.0, 4.0, 2.0, 1.0], [6.0, 6.0, 3.0, 2.0], [9.0, 5.0, 5.0, 4.0]])


def test_worst_case_aggregate_examples():
    a = ensemble(BASE)
    np.testing.assert_array_equal(worst_case_aggregate([a], 2), np.median(BASE, axis=0))
    b = ensemble(BASE * 2)
    np.testing.assert_array_equal(worst_case_aggregate([a, b], 4), BASE.max(axis=0) * 2)
    np.testing.assert_array_equal(worst_case_aggregate([a, b], 1), worst_case_aggregate([b, a], 1))
    with pytest.raises(ValueError):
        worst_case_aggregate([a, ensemble(BASE[:, :3])], 2)
    with pytest.raises(ValueError):
        worst_case_aggregate([a], 5)


def test_wcri_examples():
    ref = [ensemble(BASE)]
    for k in range(5):
        assert wcri(ref, ref, k) == 0.0
        assert wcri(ref, [ensemble(BASE * 0.5)], k) == pytest.approx(50.0, abs=1e-12)
        assert wcri(ref, [ensemble(BASE * 2)], k) == pytest.approx(-100.0, abs=1e-12)


def test_wcri_median_of_even_series_is_midpoint():
    ref = [ensemble(np.ones((2, 4)))]
    new = [ensemble(np.tile([0.1, 0.2, 0.6, 0.9], (2, 1)))]
    assert wcri(ref, new, 2) == pytest.approx(100 * (1 - 0.4))


def test_negative_curves_need_an_offset():
    ref = [ensemble(BASE - 10.0)]
    with pytest.raises(IllDefinedRatioError):
        wcri(ref, ref, 2)
    assert wcri(ref, [ensemble(BASE * 0.5 - 10.0)], 2, offset=-10.0) == pytest.approx(50.0)
    rep = wcri_report(ref, ref, offset=-10.0)
    assert rep.values == (0.0,) * 5 and rep.offset == -10.0


@settings(max_examples=40, deadline=None)
@given(rho=st.floats(0.05, 0.95))
def test_constant_ratio_anti_symmetry(rho):
    a, b = [ensemble(BASE)], [ensemble(BASE * rho)]
    forward = wcri(a, b, 2)
    backward = wcri(b, a, 2)
    assert forward > 0
    assert backward / 100 == pytest.approx(1 - 1 / rho, rel=1e-9)


@settings(max_examples=40, deadline=None)
@given(scale=st.floats(1e-3, 1e3), seed=st.integers(0, 1000))
def test_scale_invariance(scale, seed):
    rng = np.random.default_rng(seed)
    r = np.sort(rng.uniform(1, 10, (3, 5)), axis=1)[:, ::-1]
    c = np.sort(rng.uniform(1, 10, (3, 5)), axis=1)[:, ::-1]
    base = wcri([ensemble(r)], [ensemble(c)], 3)
    assert wcri([ensemble(r * scale)], [ensemble(c * scale)], 3) == pytest.approx(base, rel=1e-9, abs=1e-9)


def reports():
    zero = WcriReport((0.0,) * 5, "ref", "ref")
    good = WcriReport((75.04, 80.0, 90.36, 95.0, -18.76), "ref", "new")
    return {
        ("Sphere-6D", Variant.BO_GPI_IADA, "Uniform"): good,
        ("AlpineN2-3D", Variant.BO, None): zero,
        ("Sphere-6D", Variant.BO_GPI_IADA, "Categorical"): good,
        ("Sphere-6D", Variant.BO, None): zero,
        ("Sphere-6D", Variant.BO_IADA, "Uniform"): WcriReport((-0.04,) * 5, "ref", "x"),
    }


def test_table_layout_and_ordering():
    text = emit_table(reports())
    lines = text.splitlines()
    assert lines[0] == "objective,model_init,adaptivity,sel,Q0,Q1,Q2,Q3,Q4"
    assert lines[1] == "AlpineN2-3D,No GPi,No Ada,-,0.0,0.0,0.0,0.0,0.0"
    assert lines[2] == "Sphere-6D,No GPi,No Ada,-,0.0,0.0,0.0,0.0,0.0"
    # -0.04 rounds to 0.0 without a sign
    assert lines[3] == "Sphere-6D,No GPi,iAda,Sel_U,0.0,0.0,0.0,0.0,0.0"
    assert lines[4] == "Sphere-6D,GPi,iAda,Sel_Cat,75.0,80.0,90.4,95.0,-18.8"
    assert lines[5].startswith("Sphere-6D,GPi,iAda,Sel_U,")


def test_table_single_row_and_round_trip():
    single = {("Sphere-2D", Variant.BO, None): WcriReport((1.25, 2.0, 3.0, 4.0, 5.0), "a", "b")}
    assert len(emit_table(single).splitlines()) == 2
    for delim in (",", "\t"):
        text = emit_table(reports(), delim)
        parsed = parse_table(text, delim)
        assert parsed[("Sphere-6D", "GPi", "iAda", "Sel_Cat")] == (75.0, 80.0, 90.4, 95.0, -18.8)
        assert emit_table(reports(), delim) == text
    with pytest.raises(ValueError):
        emit_table({})
    with pytest.raises(ValueError):
        parse_table("a,b\n")


def test_plotdata_rows_and_markers():
    bo = ensemble(BASE[:, :3])
    gpi = ensemble(BASE[:, :3], variant=Variant.BO_GPI_IADA, gpi_at=(1,))
    lines = emit_history_plotdata([bo, gpi]).splitlines()
    assert lines[0] == "ensemble,objective,iteration,q0,q1,q2,q3,q4,gpi_event"
    body = [line.split(",") for line in lines[1:]]
    assert len(body) == 6
    assert [r[2] for r in body] == ["1", "2", "3"] * 2
    assert [r[-1] for r in body[:3]] == ["", "", ""]
    assert [r[-1] for r in body[3:]] == ["1", "0", "0"]
    assert float(body[0][3]) == BASE[:, 0].min()
