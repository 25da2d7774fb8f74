"""Curvilinear payoff along different staircases of a closed, commuting game.

With commuting flows and a closed running cost, the state at T and the work
of the cost do not depend on the order in which the time axes are advanced.
Breaking closedness makes the order visible.
"""

import numpy as np

from multitime_games import ControlSet, GameSpec
from multitime_games.dynamics import ControlSignal, integrate_flow, payoff
from multitime_games.gamespec import check_cic, check_closedness
from multitime_games.lattice import Lattice, enumerate_staircases

U = ControlSet.finite([[-1.0], [1.0]])


def game(L):
    X = (["mul", ["const", 0.5], ["x", 0]], ["mul", ["const", 0.25], ["x", 0]])
    return GameSpec(m=2, n=1, q=1, T=[0.6, 0.6], X=X, L=L, g=["x", 0], U=U, V=U)


closed = game((["mul", ["const", 0.5], ["x", 0]], ["mul", ["const", 0.25], ["x", 0]]))
open_ = game((["const", 1.0], ["x", 0]))

print("closedness residual:", np.abs(check_closedness(closed, [0.1, 0.2], [0.7], [1.0], [1.0])).max(),
      "vs", np.abs(check_closedness(open_, [0.1, 0.2], [0.7], [1.0], [1.0])).max())
print("commutator of the flows:", np.abs(check_cic(closed, [0.1, 0.2], [0.7], [1.0], [1.0])).max())

lattice = Lattice.uniform(closed.T, [3, 3])
for path in enumerate_staircases(lattice.box, lattice, 6):
    sig = ControlSignal.constant([1.0], path.n_segments)
    final = integrate_flow(closed, path, sig, sig, [1.0]).final[0]
    print(f"axes {''.join(str(a + 1) for a in path.axes)}: x(T) = {final:.10f}, "
          f"closed payoff {payoff(closed, path, sig, sig, [1.0]):.10f}, "
          f"non-closed payoff {payoff(open_, path, sig, sig, [1.0]):.6f}")
print("exp(0.5*0.6 + 0.25*0.6) =", np.exp(0.45))
