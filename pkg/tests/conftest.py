import numpy as np
import pytest

from bmc_ama import rl_core

STAY, GO = "stay", "go"


def two_state_step(s, a):
    """Deterministic 2-state MDP: `go` toggles L<->R and pays 1 only when leaving L."""
    if a == STAY:
        return s, 0.0
    return ("R", 1.0) if s == "L" else ("L", 0.0)


def value_iteration_two_state(gamma, tol=1e-14):
    q = {(s, a): 0.0 for s in "LR" for a in (STAY, GO)}
    while True:
        new = {}
        for (s, a) in q:
            s2, r = two_state_step(s, a)
            new[(s, a)] = r + gamma * max(q[(s2, b)] for b in (STAY, GO))
        if max(abs(new[k] - q[k]) for k in q) < tol:
            return new
        q = new


def run_q_learning_two_state(gamma=0.9, eta=0.1, epsilon=0.1, steps=100_000, seed=0, tol=1e-3):
    """Returns (Q-table, steps used, optimum). Stops early once every entry is within tol."""
    opt = value_iteration_two_state(gamma)
    q = rl_core.QTable()
    rng = np.random.default_rng(seed)
    s = "L"
    actions = [STAY, GO]
    for n in range(1, steps + 1):
        a = rl_core.epsilon_greedy_sample(q, s, actions, epsilon, rng)
        s2, r = two_state_step(s, a)
        tr = rl_core.Transition(s, a, r, s2, tuple(actions))
        rl_core.td_update(q, s, a, rl_core.target_q(q, tr, gamma), eta)
        s = s2
        if n % 500 == 0 and max(abs(q[k] - v) for k, v in opt.items()) < tol:
            return q, n, opt
    return q, steps, opt


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
