"""Hamiltonians as games, and the value formula that comes with it.

Any Hamiltonian that is Lipschitz in p is the max-min of an affine game on a
ball of momenta; a positively homogeneous one needs no cost at all. The last
part solves M_t + |M_x| = 0, M(0) = |x| through the game and compares it with
the exact solution max(|x| - t, 0).
"""

import numpy as np

from multitime_games.hamiltonian import HamiltonianForm
from multitime_games.lattice import Lattice, StateGrid
from multitime_games.representation import (build_affine_rep, build_homogeneous_rep, certify_representation,
                                            sample_points, value_representation)

H = HamiltonianForm.from_exprs([["max", ["sub", ["p", 0], ["const", 0.3]], ["mul", ["const", -0.5], ["p", 0]]]],
                               n=1, T=[1.0], state_box=([-1.0], [1.0]))
for k in (9, 17, 33):
    rep = build_affine_rep(H, P=2.0, points_per_axis=k)
    cert = certify_representation(rep, sample_points(H, 500, P=2.0, seed=0))
    print(f"affine, {k} points per axis: error {cert.max_abs_error:.4f} <= K*delta = {rep.K[0] * rep.v_spacing:.4f}")

N = HamiltonianForm.from_exprs([["add", ["norm", ["p"]], ["mul", ["const", 0.3], ["p", 1]]]],
                               n=2, T=[1.0], state_box=([-1.0, -1.0], [1.0, 1.0]))
rep = build_homogeneous_rep(N, points_per_axis=9)
t, x, p = sample_points(N, 200, P=1.0, seed=1, sphere=True)
cert = certify_representation(rep, (t, x, p))
print(f"homogeneous |p| + 0.3 p2: error {cert.max_abs_error:.4f}, "
      f"H(2p) - 2H(p) = {np.abs(rep.maxmin(t, x, 2 * p) - 2 * rep.maxmin(t, x, p)).max():.1e}")

E = HamiltonianForm.from_exprs([["norm", ["p"]]], n=1, T=[1.0], state_box=([-3.0], [3.0]))
for steps in (10, 20):
    lattice = Lattice.uniform([1.0], [steps])
    grid = StateGrid([-3.0], [3.0], (6 * steps + 1,))
    for x0 in (0.0, 0.3, 1.0):
        m = value_representation(E, ["abs", ["x", 0]], lattice, grid, [0.5], [x0])
        print(f"h = {1 / steps:.2f}, x = {x0}: game formula {m:.4f}, exact {max(abs(x0) - 0.5, 0.0):.4f}")
