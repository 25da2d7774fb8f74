"""Acceptance criteria, one test per criterion.

Each test records a ``PASS``/``FAIL`` line (printed in the terminal summary)
before asserting, so a failing criterion is reported with its numbers.
"""

import time
from pathlib import Path

import numpy as np

from multitime_games import Bounds
from multitime_games.cli import main
from multitime_games.dynamics import ControlSignal, integrate_flow, payoff
from multitime_games.gamespec import validate_bounds
from multitime_games.hamiltonian import HamiltonianForm, eval_lower, eval_upper, hj_march, hjiu_residual
from multitime_games.lattice import (Lattice, MultitimeBox, StateGrid, canonical_path, enumerate_staircases)
from multitime_games.representation import (build_affine_rep, build_homogeneous_rep, certify_representation,
                                            sample_points, value_representation)
from multitime_games.values import brute_force_value, check_value_bounds, dpp_consistency, solve_values

from conftest import ACCEPTANCE, finite, make_spec

CONFIGS = Path(__file__).resolve().parents[1] / "demos" / "configs"


def record(number, ok, detail):
    ACCEPTANCE.append(f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")
    assert ok, detail


# random discrete games with on-grid displacements

DX = 0.125
SG = StateGrid([-8.0], [8.0], (129,))


def random_instance(rng):
    m = int(rng.integers(1, 3))
    steps = [int(rng.integers(1, 4))] if m == 1 else [[1, 1], [1, 2], [2, 1]][rng.integers(3)]
    h = rng.choice([0.25, 0.5], size=m)
    T = list(h * np.array(steps))
    c = rng.choice([1.0, 2.0], size=m)
    pool = np.array([-1.0, -0.5, 0.0, 0.5, 1.0])
    U = finite(*rng.choice(pool, size=int(rng.integers(1, 4)), replace=False))
    V = finite(*rng.choice(pool, size=int(rng.integers(1, 4)), replace=False))
    X = [["mul", ["const", float(c[a])], ["sub", ["u", 0], ["v", 0]]] for a in range(m)]
    coef = rng.uniform(-1, 1, size=(m, 3))
    L = [["add", ["mul", ["const", coef[a, 0]], ["sin", ["x", 0]]],
          ["add", ["mul", ["const", coef[a, 1]], ["mul", ["u", 0], ["v", 0]]],
           ["mul", ["const", coef[a, 2]], ["cos", ["t", 0]]]]] for a in range(m)]
    d, e, k = rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0.5, 2)
    g = ["add", ["mul", ["const", d], ["sin", ["mul", ["const", k], ["x", 0]]]],
         ["mul", ["const", e], ["tanh", ["x", 0]]]]
    bounds = Bounds(A=2 * c, B=max(abs(d) + abs(e), abs(d) * k + abs(e)), C=np.abs(coef).sum(axis=1))
    spec = make_spec(m=m, T=T, X=X, L=L, g=g, U=U, V=V, bounds=bounds, state_box=([-8.0], [8.0]))
    x0 = [float(rng.integers(-8, 9) * DX)]
    return spec, steps, x0


def instances():
    rng = np.random.default_rng(20261018)
    return [random_instance(rng) for _ in range(24)]


def test_criterion_1_oracle_equivalence():
    start = time.perf_counter()
    worst, count = 0.0, 0
    for spec, steps, x0 in instances():
        lat = Lattice.uniform(spec.T, steps)
        path = canonical_path(lat.box, lat)
        for kind in ("lower", "upper"):
            grid = solve_values(spec, lat, SG, path, kind)
            oracle = brute_force_value(spec, path, x0, kind)
            worst = max(worst, abs(grid.value_at(path.start, x0) - oracle))
            count += 1
    elapsed = time.perf_counter() - start
    record(1, worst <= 1e-6 and elapsed <= 60,
           f"{count} solves vs brute force, max |diff| = {worst:.3g} (<= 1e-6), {elapsed:.1f} s (<= 60 s)")


def test_criterion_2_minimax_ordering():
    worst_nodes, worst_H = -np.inf, -np.inf
    for spec, steps, _ in instances():
        lat = Lattice.uniform(spec.T, steps)
        path = canonical_path(lat.box, lat)
        lo = solve_values(spec, lat, SG, path, "lower")
        up = solve_values(spec, lat, SG, path, "upper")
        D = check_value_bounds(lo, spec).D_used
        worst_nodes = max(worst_nodes, float(np.max(lo.values - up.values)) / max(D, 1e-300))
        s = np.random.default_rng(0).uniform(size=(64, spec.m + 2))
        t, x, p = s[:, :spec.m] * spec.T, -8 + 16 * s[:, -2:-1], -2 + 4 * s[:, -1:]
        worst_H = max(worst_H, float(np.max(eval_lower(spec, t, x, p) - eval_upper(spec, t, x, p))))
    record(2, worst_nodes <= 1e-9 and worst_H <= 1e-12,
           f"max (lower - upper)/D = {worst_nodes:.3g} (<= 1e-9), max (H- - H+) = {worst_H:.3g} (<= 0)")


def test_criterion_3_value_bounds():
    worst, Es, Fs = -np.inf, [], []
    for spec, steps, _ in instances():
        assert validate_bounds(spec, 512).ok
        lat = Lattice.uniform(spec.T, steps)
        path = canonical_path(lat.box, lat)
        for kind in ("lower", "upper"):
            rep = check_value_bounds(solve_values(spec, lat, SG, path, kind), spec)
            worst = max(worst, rep.max_abs_value - rep.D_used)
            Es.append(rep.E_meas / rep.E_derived if rep.E_derived > 0 else 0.0)
            Fs.append(rep.F_meas / rep.F_derived if rep.F_derived > 0 else 0.0)
    record(3, worst <= 1e-9,
           f"max(|value| - D) = {worst:.3g} (<= 1e-9); measured/derived E up to {max(Es):.3g}, "
           f"F up to {max(Fs):.3g} (report only)")


# closed, commuting specs

def _flow(c, w):
    return ["mul", ["const", c], ["add", ["x", 0], ["mul", ["const", w], ["sub", ["u", 0], ["v", 0]]]]]


COSL = [["mul", ["const", 0.05], ["cos", ["x", 0]]], ["mul", ["const", 0.025], ["cos", ["x", 0]]]]
CIC_SPECS = {
    "commuting flows": make_spec(m=2, T=[0.5, 0.5], X=[_flow(0.5, 0.0), _flow(0.25, 0.0)], L=COSL,
                                 g=["sin", ["x", 0]]),
    "pure control": make_spec(m=2, T=[0.5, 0.5], X=[["mul", ["const", 0.5], ["sub", ["u", 0], ["v", 0]]],
                                                     ["mul", ["const", 0.25], ["sub", ["u", 0], ["v", 0]]]],
                              g=["sin", ["x", 0]], U=finite(-1, 0, 1), V=finite(-1, 0, 1)),
}


def _order_residual(spec, kind, steps, points):
    lat = Lattice.uniform(spec.T, [steps, steps])
    grid = solve_values(spec, lat, StateGrid([-2.0], [2.0], (points,)), canonical_path(lat.box, lat), kind,
                        full_lattice=True)
    return max(dpp_consistency(spec, grid, [0.0, 0.0], lat.spacing, order=o) for o in ([0, 1], [1, 0]))


def test_criterion_4_dpp_consistency():
    ok, parts = True, []
    for name, spec in CIC_SPECS.items():
        for kind in ("lower", "upper"):
            coarse = _order_residual(spec, kind, 8, 321)
            fine = _order_residual(spec, kind, 16, 641)
            rate = coarse / fine if fine > 0 else np.inf
            ok &= coarse <= 1e-4 and rate >= 1.5
            parts.append(f"{name}/{kind} {coarse:.2g}->{fine:.2g} (x{rate:.2f})")
    record(4, ok, "two-axis lookahead both orders <= 1e-4, rate >= 1.5: " + "; ".join(parts))


def test_criterion_5_path_independence():
    spec = make_spec(m=2, T=[0.5, 0.5], X=[_flow(0.5, 0.2), _flow(0.25, 0.2)],
                     L=[["mul", ["const", 0.1], ["x", 0]], ["mul", ["const", 0.05], ["x", 0]]],
                     g=["x", 0], U=finite(-1, 0.5), V=finite(-0.5, 1))
    lat = Lattice.uniform(spec.T, [3, 3])
    paths = enumerate_staircases(lat.box, lat, 5)
    sg = StateGrid([-3.0], [3.0], (241,))
    pays, vals = [], {"lower": [], "upper": []}
    for path in paths:
        u = ControlSignal.constant([0.5], path.n_segments)
        v = ControlSignal.constant([-0.5], path.n_segments)
        pays.append(payoff(spec, path, u, v, [0.3]))
        for kind in vals:
            vals[kind].append(solve_values(spec, lat, sg, path, kind).value_at(path.start, [0.3]))
    spread = max(np.ptp(pays), *(np.ptp(v) for v in vals.values()))
    # linear commuting flows: x(T) = x0 exp(a . T)
    lin = make_spec(m=2, T=[0.7, 1.3], X=[["mul", ["const", 0.5], ["x", 0]], ["mul", ["const", 0.25], ["x", 0]]])
    lat2 = Lattice.uniform(lin.T, [4, 4])
    errs = []
    for path in enumerate_staircases(lat2.box, lat2, 4):
        sig = ControlSignal.constant([0.0], path.n_segments)
        final = integrate_flow(lin, path, sig, sig, [1.0]).final[0]
        errs.append(abs(final - np.exp(0.5 * 0.7 + 0.25 * 1.3)))
    ok = len(paths) >= 3 and spread <= 1e-5 and max(errs) <= 1e-6
    record(5, ok, f"{len(paths)} staircases: payoff/value spread {spread:.3g} (<= 1e-5); "
                  f"exp(a.T) error {max(errs):.3g} (<= 1e-6)")


def test_criterion_6_hjiu_residuals():
    # L = d(phi) for phi = sin(t^1 + 2 t^2), so the exact value is linear in x
    dphi = ["cos", ["add", ["t", 0], ["mul", ["const", 2.0], ["t", 1]]]]
    smooth = make_spec(m=2, T=[1.0, 1.0], X=[["mul", ["const", 0.5], ["u", 0]], ["mul", ["const", 0.25], ["u", 0]]],
                       L=[dphi, ["mul", ["const", 2.0], dphi]], g=["x", 0], U=finite(-1, 1))
    sg = StateGrid([-3.0], [3.0], (61,))
    inner = sg.interior_mask(0.75 + 2 * sg.spacing[0])
    res = []
    for N in (4, 8, 16):
        lat = Lattice.uniform(smooth.T, [N, N])
        grid = solve_values(smooth, lat, sg, canonical_path(lat.box, lat), "upper", full_lattice=True)
        res.append(float(np.nanmax(hjiu_residual(grid, smooth).values[:, inner])))
    rates = [res[i] / res[i + 1] for i in range(2)]
    transport = make_spec(X=[["const", 1.0]], g=["x", 0])
    tsg = StateGrid([-3.0], [3.0], (121,))
    lat = Lattice.uniform(transport.T, [10])
    tres = float(np.nanmax(hjiu_residual(solve_values(transport, lat, tsg, canonical_path(lat.box, lat), "upper"),
                                         transport).values[:, tsg.interior_mask(1.2)]))
    ok = min(rates) >= 1.5 and tres <= 2 * lat.spacing[0]
    record(6, ok, f"smooth residuals {', '.join(f'{r:.3g}' for r in res)} (rates "
                  f"{', '.join(f'{r:.2f}' for r in rates)} >= 1.5); transport {tres:.3g} <= 2h = "
                  f"{2 * lat.spacing[0]:.3g}")


def _max_of_affine(rng):
    k = int(rng.integers(2, 5))
    a, b = rng.uniform(-1, 1, k), rng.uniform(-0.5, 0.5, k)
    tree = ["max"] + [["add", ["mul", ["const", a[j]], ["p", 0]], ["const", b[j]]] for j in range(k)]
    return tree if k > 1 else tree[1]


def _affine_certs(H, ks, samples):
    out = []
    for k in ks:
        rep = build_affine_rep(H, P=2.0, points_per_axis=k)
        cert = certify_representation(rep, samples)
        out.append((cert.max_abs_error, float(np.max(rep.K)) * rep.v_spacing))
    return out


def test_criterion_7_affine_certification():
    start = time.perf_counter()
    rng = np.random.default_rng(7)
    box = ([-1.0], [1.0])
    trees = [["norm", ["p"]]] + [_max_of_affine(rng) for _ in range(5)]
    ok, parts = True, []
    for tree in trees:
        H = HamiltonianForm.from_exprs([tree], 1, T=[1.0], state_box=box)
        res = _affine_certs(H, (9, 17, 33), sample_points(H, 500, P=2.0, seed=1))
        rates = [res[i][0] / res[i + 1][0] for i in range(2)]
        ok &= all(e <= b for e, b in res) and min(rates) >= 1.5
        parts.append("/".join(f"{e / b:.2f}" for e, b in res) + f" x{min(rates):.2f}")
    # two dimensions: bound at every level, halving over two doublings combined
    H2 = HamiltonianForm.from_exprs([["norm", ["p"]]], 2, T=[1.0], state_box=([-1.0, -1.0], [1.0, 1.0]))
    res = _affine_certs(H2, (9, 17, 33), sample_points(H2, 500, P=2.0, seed=1))
    overall = res[0][0] / res[2][0]
    ok &= all(e <= b for e, b in res) and overall >= 1.5 ** 2
    elapsed = time.perf_counter() - start
    ok &= elapsed <= 120
    record(7, ok, f"n=1 error/(K delta) and min rate: {'; '.join(parts)}; n=2 |p| error/(K delta) "
                  f"{'/'.join(f'{e / b:.2f}' for e, b in res)}, 9->33 rate x{overall:.2f} (>= 2.25); "
                  f"{elapsed:.1f} s (<= 120 s)")


def test_criterion_8_homogeneous_certification():
    ok, parts = True, []
    for n, tree in ((1, ["mul", ["const", 1.5], ["norm", ["p"]]]),
                    (2, ["add", ["norm", ["p"]], ["mul", ["const", 0.3], ["p", 1]]]),
                    (2, ["max", ["abs", ["p", 0]], ["mul", ["const", 0.5], ["abs", ["p", 1]]]])):
        H = HamiltonianForm.from_exprs([tree], n, T=[1.0], state_box=(-np.ones(n), np.ones(n)))
        rep = build_homogeneous_rep(H, points_per_axis=9, samples=128, seed=0)
        t, x, p = sample_points(H, 300, P=1.0, seed=2, sphere=True)
        err = certify_representation(rep, (t, x, p)).max_abs_error
        bound = float(np.max(rep.K)) * rep.v_spacing
        base = rep.maxmin(t, x, p)
        homog = max(float(np.max(np.abs(rep.maxmin(t, x, lam * p) - lam * base))) for lam in (0.0, 0.5, 2.0, 3.7))
        ok &= err <= bound and homog <= 1e-12
        parts.append(f"n={n} error {err:.3g} <= {bound:.3g}, homogeneity defect {homog:.2g}")
    record(8, ok, "; ".join(parts))


def test_criterion_9_value_formula_round_trip():
    cases = {"eikonal": ["neg", ["norm", ["p"]]], "transport": ["mul", ["const", 0.5], ["p", 0]]}
    ok, parts = True, []
    for name, tree in cases.items():
        H = HamiltonianForm.from_exprs([tree], 1, T=[1.0], state_box=([-3.0], [3.0]))
        diffs = []
        for steps in (10, 20):
            lat = Lattice.uniform([1.0], [steps])
            sg = StateGrid([-3.0], [3.0], (6 * steps + 1,))
            path = canonical_path(MultitimeBox([0.0], [0.5]), lat)
            march = hj_march(H, ["abs", ["x", 0]], lat, sg, path, direction="forward")
            d = max(abs(value_representation(H, ["abs", ["x", 0]], lat, sg, [0.5], [x0])
                        - march.value_at(path.end, [x0])) for x0 in (-0.7, 0.0, 0.3, 1.0))
            ok &= d <= 5 * lat.spacing[0]
            diffs.append(d)
        ok &= diffs[1] < diffs[0]
        parts.append(f"{name} {diffs[0]:.3g} -> {diffs[1]:.3g} (<= 5h)")
    record(9, ok, "value formula vs march: " + "; ".join(parts))


def test_criterion_10_classical_reduction(capsys, tmp_path):
    codes = {}
    for name in ("zero", "pursuit", "transport"):
        cfg = CONFIGS / f"{name}.yaml"
        codes[name] = [main(["validate", "--spec", str(cfg), "--out", str(tmp_path / f"{name}.txt")]),
                       main(["value", "--spec", str(cfg), "--out", str(tmp_path / f"{name}.csv")]),
                       main(["crosscheck", "--spec", str(cfg)])]
    capsys.readouterr()
    ok = all(c == 0 for cs in codes.values() for c in cs)
    record(10, ok, "m=1 validate/value/crosscheck exit codes " +
           ", ".join(f"{k}={v}" for k, v in codes.items()))
