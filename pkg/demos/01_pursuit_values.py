"""Lower and upper values of a one-cell pursuit game.

The state moves with dx/dt = u - v and the maximizer is paid x(T)^2. When
the minimizer answers the maximizer inside a cell (lower value) it can copy
the move and keep x fixed; when it has to commit first (upper value) the
maximizer steps away. The gap is the price of moving first.
"""

from pathlib import Path

from multitime_games import load_spec
from multitime_games.lattice import StateGrid, canonical_path
from multitime_games.values import brute_force_value, solve_values

spec = load_spec(Path(__file__).parent / "configs" / "pursuit.yaml")
lattice = spec.lattice()
path = canonical_path(lattice.box, lattice)
grid = StateGrid([-4.0], [4.0], (81,))

for kind in ("lower", "upper"):
    values = solve_values(spec, lattice, grid, path, kind)
    dpp = values.value_at(path.start, [0.0])
    tree = brute_force_value(spec, path, [0.0], kind)
    print(f"{kind:5s} value at x=0: grid {dpp:.6f}, game tree {tree:.6f}")

# refine the lattice: with more cells the commitment disadvantage shrinks
for steps in (1, 2, 4, 8):
    lat = spec.lattice([steps])
    p = canonical_path(lat.box, lat)
    up = solve_values(spec, lat, grid, p, "upper").value_at(p.start, [0.0])
    lo = solve_values(spec, lat, grid, p, "lower").value_at(p.start, [0.0])
    print(f"{steps} cells: upper - lower = {up - lo:.4f}")
