import pytest

from multitime_games import ControlSet, GameSpec

ZERO = ["const", 0.0]


def finite(*pts):
    return ControlSet.finite([[float(p)] for p in pts])


def make_spec(m=1, n=1, T=None, X=None, L=None, g=None, U=None, V=None, **kw):
    T = [1.0] * m if T is None else T
    if X is None:
        X = [ZERO if n == 1 else ["vec"] + [ZERO] * n] * m
    L = [ZERO] * m if L is None else L
    g = ZERO if g is None else g
    U = finite(0.0) if U is None else U
    V = finite(0.0) if V is None else V
    return GameSpec(m=m, n=n, q=U.dim, T=T, X=tuple(X), L=tuple(L), g=g, U=U, V=V, **kw)


@pytest.fixture
def pursuit():
    """dx/dt = u - v, payoff x(T)^2, one cell of length 0.5."""
    F = finite(-1, 0, 1)
    return make_spec(T=[0.5], X=[["sub", ["u", 0], ["v", 0]]], g=["mul", ["x", 0], ["x", 0]], U=F, V=F)


@pytest.fixture
def linear_flow():
    """Commuting scalar flows dx/dt^1 = 0.5 x, dx/dt^2 = 0.25 x."""
    return make_spec(m=2, X=[["mul", ["const", 0.5], ["x", 0]], ["mul", ["const", 0.25], ["x", 0]]],
                     g=["x", 0])


# acceptance report: one line per criterion, printed after the run
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
