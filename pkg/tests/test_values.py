import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multitime_games import Bounds
from multitime_games.dynamics import ControlSignal, payoff
from multitime_games.lattice import Lattice, LatticeError, StateGrid, canonical_path
from multitime_games.values import (BudgetError, DiscreteStrategy, brute_force_value, check_value_bounds,
                                    dpp_consistency, dpp_step, solve_values)

from conftest import finite, make_spec

SG = StateGrid([-2.0], [2.0], (41,))


def solve(spec, steps, sg=SG, kind="upper", **kw):
    lat = Lattice.uniform(spec.T, steps)
    return solve_values(spec, lat, sg, canonical_path(lat.box, lat), kind, **kw)


# single steps

def test_zero_step_is_identity():
    spec = make_spec()
    lat = Lattice.uniform([1.0], [2])
    nxt = np.linspace(-1, 1, SG.size) ** 3
    for kind in ("lower", "upper"):
        np.testing.assert_array_equal(dpp_step(spec, lat, SG, [0.0], 0, nxt, kind), nxt)


def test_constant_cost_adds_length():
    spec = make_spec(L=[["const", 1.0]])
    lat = Lattice.uniform([1.0], [2])
    nxt = np.sin(SG.nodes()[:, 0])
    np.testing.assert_allclose(dpp_step(spec, lat, SG, [0.0], 0, nxt, "lower"), nxt + 0.5, atol=1e-14)


def test_pursuit_cell_orders(pursuit):
    # lower: max_u min_v (the minimizer answers), upper: min_v max_u
    lat = Lattice.uniform([0.5], [1])
    g = SG.nodes()[:, 0] ** 2
    k0 = SG.size // 2
    assert dpp_step(pursuit, lat, SG, [0.0], 0, g, "lower")[k0] == pytest.approx(0.0, abs=1e-12)
    assert dpp_step(pursuit, lat, SG, [0.0], 0, g, "upper")[k0] == pytest.approx(0.25, abs=1e-12)
    path = canonical_path(lat.box, lat)
    assert brute_force_value(pursuit, path, [0.0], "lower") == pytest.approx(0.0, abs=1e-12)
    assert brute_force_value(pursuit, path, [0.0], "upper") == pytest.approx(0.25, abs=1e-12)


# whole solves

def test_zero_fields_value_is_identity_of_g():
    spec = make_spec(m=2, g=["x", 0])
    for kind in ("lower", "upper"):
        grid = solve(spec, [2, 2], kind=kind)
        for row in grid.values:
            np.testing.assert_allclose(row, SG.nodes()[:, 0], atol=1e-15)


def test_constant_running_cost_both_kinds():
    spec = make_spec(m=2, L=[["const", 1.0], ["const", 2.0]], bounds=Bounds([1.0, 1.0], 1e-300, [1.0, 2.0]))
    for kind in ("lower", "upper"):
        grid = solve(spec, [2, 3], kind=kind)
        assert grid.value_at([0.0, 0.0], [0.3]) == pytest.approx(3.0, abs=1e-13)
        rep = check_value_bounds(grid, spec)
        assert rep.max_abs_value == pytest.approx(rep.D_path, abs=1e-12)
        assert rep.ok


def test_terminal_slice_bitwise(pursuit):
    grid = solve(pursuit, [1])
    np.testing.assert_array_equal(grid.slice([0.5]), pursuit.eval_g(SG.nodes()))


def test_single_opponent_point_reduces_to_maximization():
    spec = make_spec(T=[1.0], X=[["u", 0]], g=["neg", ["mul", ["x", 0], ["x", 0]]], U=finite(-1, 0, 1))
    lat = Lattice.uniform([1.0], [2])
    path = canonical_path(lat.box, lat)
    best = max(payoff(spec, path, ControlSignal(np.array(seq)[:, None]), ControlSignal.constant([0.0], 2), [0.7])
               for seq in itertools.product([-1.0, 0.0, 1.0], repeat=2))
    for kind in ("lower", "upper"):
        assert brute_force_value(spec, path, [0.7], kind) == pytest.approx(best, abs=1e-12)


def test_budget_error_names_requirement(pursuit):
    lat = Lattice.uniform([0.5], [3])
    with pytest.raises(BudgetError) as err:
        brute_force_value(pursuit, canonical_path(lat.box, lat), [0.0], "lower", max_nodes=100)
    assert err.value.required == 3 * 9 ** 3


def _strategy_oracle(spec, path, x0, kind):
    """Explicit enumeration over nonanticipating strategy tables."""
    Ug, Vg = spec.U_grid, spec.V_grid
    ns = path.n_segments
    own, opp = (Vg, Ug) if kind == "lower" else (Ug, Vg)
    histories = [h for k in range(1, ns + 1) for h in itertools.product(range(len(opp)), repeat=k)]
    best = None
    for choice in itertools.product(range(len(own)), repeat=len(histories)):
        strat = DiscreteStrategy(dict(zip(histories, choice)))
        worst = None
        for seq in itertools.product(range(len(opp)), repeat=ns):
            resp = strat.respond(seq)
            o = ControlSignal(opp[list(seq)])
            r = ControlSignal(own[resp])
            u, v = (o, r) if kind == "lower" else (r, o)
            J = payoff(spec, path, u, v, x0)
            worst = J if worst is None else (max(worst, J) if kind == "lower" else min(worst, J))
        best = worst if best is None else (min(best, worst) if kind == "lower" else max(best, worst))
    return best


@pytest.mark.parametrize("kind", ["lower", "upper"])
def test_backward_induction_equals_strategy_enumeration(kind):
    spec = make_spec(T=[1.0], X=[["mul", ["u", 0], ["add", ["const", 1.0], ["v", 0]]]],
                     L=[["mul", ["x", 0], ["v", 0]]], g=["sin", ["mul", ["const", 3.0], ["x", 0]]],
                     U=finite(-1, 1), V=finite(-0.5, 0.5))
    lat = Lattice.uniform([1.0], [2])
    path = canonical_path(lat.box, lat)
    assert brute_force_value(spec, path, [0.2], kind) == pytest.approx(_strategy_oracle(spec, path, [0.2], kind),
                                                                       abs=1e-12)


# invariants on random small games

coef = st.floats(-1.0, 1.0)


@st.composite
def small_games(draw):
    a, b, c, d = (draw(coef) for _ in range(4))
    X = [["add", ["mul", ["const", a], ["u", 0]], ["mul", ["const", b], ["v", 0]]]]
    L = [["add", ["mul", ["const", c], ["mul", ["u", 0], ["v", 0]]], ["mul", ["const", d], ["x", 0]]]]
    return make_spec(T=[0.5], X=X, L=L, g=["sin", ["mul", ["const", 2.0], ["x", 0]]],
                     U=finite(-1, 0, 1), V=finite(-1, 1))


@settings(max_examples=25, deadline=None)
@given(small_games())
def test_lower_never_exceeds_upper(spec):
    lo, up = solve(spec, [2], kind="lower"), solve(spec, [2], kind="upper")
    assert np.all(lo.values <= up.values + 1e-9 * (1 + np.abs(up.values)))


@settings(max_examples=15, deadline=None)
@given(small_games(), st.floats(-5, 5))
def test_constant_shift_in_g(spec, c):
    base = solve(spec, [2], kind="upper")
    shifted = solve(spec.with_g(["add", spec.g.to_list(), ["const", c]]), [2], kind="upper")
    np.testing.assert_allclose(shifted.values, base.values + c, atol=1e-12 * max(1.0, abs(c)) + 1e-13)


@settings(max_examples=15, deadline=None)
@given(small_games())
def test_monotone_in_g(spec):
    lo = solve(spec, [2], kind="lower")
    hi = solve(spec.with_g(["add", spec.g.to_list(), ["mul", ["const", 0.1], ["exp", ["x", 0]]]]), [2], kind="lower")
    assert np.all(hi.values >= lo.values - 1e-12)


# consistency and bounds

def test_dpp_consistency_trivial_cases(pursuit):
    spec = make_spec(m=2, X=[["mul", ["const", 0.3], ["u", 0]], ["mul", ["const", 0.2], ["v", 0]]],
                     g=["mul", ["x", 0], ["x", 0]], U=finite(-1, 1), V=finite(-1, 1))
    grid = solve(spec, [2, 2])
    assert dpp_consistency(spec, grid, [0.0, 0.0], [0.0, 0.0]) == 0.0
    assert dpp_consistency(spec, grid, [0.0, 0.0], [0.5, 0.0]) == 0.0
    with pytest.raises(LatticeError):
        dpp_consistency(spec, grid, [0.0, 0.5], [0.5, 0.0])


def test_full_lattice_agrees_on_path():
    spec = make_spec(m=2, X=[["mul", ["const", 0.3], ["u", 0]], ["mul", ["const", 0.2], ["v", 0]]],
                     g=["mul", ["x", 0], ["x", 0]], U=finite(-1, 1), V=finite(-1, 1))
    path_grid = solve(spec, [2, 2])
    full = solve(spec, [2, 2], full_lattice=True)
    assert len(full.nodes) == 9
    for node in path_grid.nodes:
        np.testing.assert_array_equal(full.slice(node), path_grid.slice(node))


def test_lipschitz_constants_against_derived():
    spec = make_spec(T=[1.0], X=[["mul", ["const", 0.2], ["u", 0]]], L=[["mul", ["const", 0.3], ["sin", ["x", 0]]]],
                     g=["mul", ["const", 0.5], ["sin", ["x", 0]]], U=finite(-1, 1),
                     bounds=Bounds([0.2], 0.5, [0.3]))
    rep = check_value_bounds(solve(spec, [4]), spec)
    assert rep.ok and rep.max_abs_value <= rep.D_used
    assert rep.F_meas <= 1.1 * rep.F_derived


def test_spill_is_measured(pursuit):
    grid = solve(pursuit, [1])
    assert grid.spill_fraction > 0.01 and grid.unreliable
    wide = solve(pursuit, [1], sg=StateGrid([-2.0], [2.0], (41,)))
    assert wide.spill_fraction == grid.spill_fraction


def test_csv_layout_and_determinism(pursuit):
    a = solve(pursuit, [1]).csv_text()
    b = solve(pursuit, [1], workers=3).csv_text()
    assert a == b
    lines = a.splitlines()
    assert lines[0] == "t^1,x^1,value"
    assert len(lines) == 1 + 2 * SG.size
    assert lines[1].startswith("0.0,-2.0,")
    assert lines[-1] == "0.5,2.0,4.0"
