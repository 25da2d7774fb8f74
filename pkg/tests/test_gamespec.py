import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multitime_games.gamespec import (Bounds, ControlSet, FiniteDifferenceError, SpecError, check_cic,
                                      check_closedness, halton, load_spec, parse_spec, validate_bounds)

from conftest import make_spec


# control sets

def test_ball_discretization_contains_center_axes_and_stays_inside():
    cs = ControlSet.ball(2, 1.5, 5)
    g = cs.grid
    assert np.all(np.linalg.norm(g, axis=-1) <= 1.5 * (1 + 1e-12))
    for p in ([0, 0], [1.5, 0], [-1.5, 0], [0, 1.5], [0, -1.5]):
        assert cs.in_grid(p)
    assert len(np.unique(g, axis=0)) == len(g)


def test_box_and_finite_sets():
    b = ControlSet.box([-1, 0], [1, 2], 3)
    assert b.grid.shape == (9, 2)
    f = ControlSet.finite([[0.0], [1.0]])
    assert f.kind == "finite-grid" and f.contains([1.0]) and not f.contains([0.5])


def test_halton_prefix_property():
    a = halton(3, 50)
    b = halton(3, 100)
    np.testing.assert_array_equal(a, b[:50])
    assert np.all((b >= 0) & (b < 1))


# bounds

def test_zero_spec_estimates_zero():
    rep = validate_bounds(make_spec(), 256)
    assert np.all(rep.A_est == 0) and rep.B_est == 0 and np.all(rep.C_est == 0)
    assert rep.ok


def test_sine_terminal_cost_within_declared_bound():
    spec = make_spec(g=["sin", ["x", 0]], bounds=Bounds([1.0], 1.0, [1.0]))
    rep = validate_bounds(spec, 512)
    assert rep.sup_g <= 1.0 and rep.ok


def test_terminal_cost_violation_reported():
    spec = make_spec(g=["mul", ["const", 2.0], ["x", 0]], bounds=Bounds([1.0], 1.0, [1.0]))
    rep = validate_bounds(spec, 512)
    assert not rep.ok
    assert any(v["quantity"] == "|g|" and v["value"] > 1.0 for v in rep.violations)


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 400), st.integers(1, 400))
def test_bound_estimates_monotone_in_sample_count(a, b):
    lo, hi = sorted((a, b))
    spec = make_spec(X=[["sin", ["mul", ["const", 3.0], ["x", 0]]]], L=[["mul", ["x", 0], ["t", 0]]],
                     g=["exp", ["x", 0]])
    r1, r2 = validate_bounds(spec, lo), validate_bounds(spec, hi)
    assert np.all(r2.A_est >= r1.A_est) and r2.B_est >= r1.B_est and np.all(r2.C_est >= r1.C_est)


# closedness

def test_constant_running_cost_is_closed():
    spec = make_spec(m=2, L=[["const", 1.0], ["const", 2.0]], X=[["x", 0], ["const", 1.0]])
    np.testing.assert_array_equal(check_closedness(spec, [0.3, 0.2], [0.5], 0.0, 0.0), np.zeros((2, 2)))


def test_single_time_closedness_is_trivial():
    spec = make_spec(L=[["x", 0]], X=[["x", 0]])
    assert check_closedness(spec, [0.1], [0.4], 0.0, 0.0).shape == (1, 1)
    assert check_closedness(spec, [0.1], [0.4], 0.0, 0.0)[0, 0] == 0.0


def test_static_flow_state_cost_is_closed():
    spec = make_spec(m=2, L=[["x", 0], ["x", 0]])
    assert abs(check_closedness(spec, [0.2, 0.7], [1.3], 0.0, 0.0)[0, 1]) < 1e-12


def test_non_closed_cost_detected():
    spec = make_spec(m=2, X=[["const", 0.0], ["const", 1.0]], L=[["x", 0], ["const", 0.0]])
    r = check_closedness(spec, [0.2, 0.3], [0.1], 0.0, 0.0)
    assert abs(r[0, 1] - 1.0) < 1e-8


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=3, max_size=3))
def test_closedness_antisymmetric_bitwise(z):
    spec = make_spec(m=3, n=1, X=[["sin", ["x", 0]], ["t", 0], ["mul", ["x", 0], ["t", 2]]],
                     L=[["mul", ["x", 0], ["x", 0]], ["cos", ["t", 1]], ["x", 0]])
    r = check_closedness(spec, np.abs(z), [z[0]], 0.0, 0.0)
    assert np.array_equal(r, -r.T)


def test_step_underflow_raises():
    spec = make_spec(m=2, L=[["x", 0], ["x", 0]])
    with pytest.raises(FiniteDifferenceError):
        check_closedness(spec, [0.0, 0.0], [1.0], 0.0, 0.0, step=1e-300)


# complete integrability

def test_commuting_linear_fields_pass_cic():
    A1 = [[0.0, 1.0], [-1.0, 0.0]]
    A2 = [[2.0, 0.0], [0.0, 2.0]]
    spec = make_spec(m=2, n=2, X=[["lin", A1, ["x"]], ["lin", A2, ["x"]]], g=["x", 0])
    r = check_cic(spec, [0.1, 0.2], [0.3, -0.4], 0.0, 0.0)
    assert np.max(np.abs(r)) <= 1e-6


def test_single_time_cic_is_zero():
    spec = make_spec(X=[["sin", ["x", 0]]])
    np.testing.assert_array_equal(check_cic(spec, [0.1], [0.3], 0.0, 0.0), np.zeros((1, 1, 1)))


def test_noncommuting_bracket_at_one_one():
    # [X1, X2] = (DX2) X1 - (DX1) X2 = (-x1, x2); residual is its negative
    spec = make_spec(m=2, n=2, X=[["vec", ["x", 1], ["const", 0.0]], ["vec", ["const", 0.0], ["x", 0]]])
    r = check_cic(spec, [0.0, 0.0], [1.0, 1.0], 0.0, 0.0)
    np.testing.assert_allclose(r[0, 1], [1.0, -1.0], atol=1e-8)
    np.testing.assert_array_equal(r[1, 0], -r[0, 1])


def test_control_derivative_terms_enter_lhs():
    spec = make_spec(m=2, X=[["u", 0], ["const", 0.0]])
    du = np.zeros((2, 1, 2))
    du[0, 0, 1] = 3.0
    r = check_cic(spec, [0.0, 0.0], [0.0], 0.0, 0.0, du=du)
    assert abs(r[0, 1, 0] - 3.0) < 1e-8


def test_cic_residual_second_order_in_step():
    # both t-derivatives agree analytically, so the residual is pure truncation error
    c = ["cos", ["mul", ["t", 0], ["t", 1]]]
    spec = make_spec(m=2, X=[["mul", ["x", 0], ["mul", ["t", 1], c]], ["mul", ["x", 0], ["mul", ["t", 0], c]]])
    args = ([0.7, 0.9], [1.3], 0.0, 0.0)
    r1 = np.abs(check_cic(spec, *args, step=1e-2)).max()
    r2 = np.abs(check_cic(spec, *args, step=5e-3)).max()
    assert r1 > 0 and r1 / r2 >= 3.0


# documents

MINIMAL = {"m": 1, "n": 1, "X": [["const", 0.0]], "L": [["const", 0.0]], "g": ["const", 0.0]}


def test_minimal_document_estimates_bounds():
    spec = parse_spec(dict(MINIMAL))
    assert spec.bounds is not None and spec.bounds.estimated
    assert spec.X[0].is_zero


def test_document_errors_name_fields():
    doc = dict(MINIMAL, n=2, X=[["const", [0.0, 0.0, 1.0]]], bounds={"A": [-1.0], "B": 1.0, "C": [1.0]})
    with pytest.raises(SpecError) as err:
        parse_spec(doc)
    paths = [p for p, _ in err.value.errors]
    assert any(p.startswith("X[0]") for p in paths)
    assert "bounds" in paths


def test_unknown_primitive_reported_with_path():
    doc = dict(MINIMAL, L=[["add", ["const", 0.0], ["zap", ["x", 0]]]])
    with pytest.raises(SpecError) as err:
        parse_spec(doc)
    assert any(p.startswith("L[0]") and "zap" in msg for p, msg in err.value.errors)


def test_load_json_and_yaml(tmp_path):
    j = tmp_path / "g.json"
    j.write_text(json.dumps(dict(MINIMAL, T=[2.0], lattice={"steps": [4]})))
    assert load_spec(j).lattice().steps == (4,)
    y = tmp_path / "g.yaml"
    y.write_text("m: 1\nn: 1\nX: [[const, 1.0]]\nL: [[const, 0.0]]\ng: [x, 0]\n")
    spec = load_spec(str(y))
    assert spec.bounds.A[0] == pytest.approx(1.0)
