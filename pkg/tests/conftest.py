from __future__ import annotations

import numpy as np
import pytest
from hypothesis import strategies as st
from scipy.linalg import expm, null_space

from faultsync.graph import WeightedDigraph
from faultsync.simulator import analyze
from faultsync.sync import left_eigenvector


def random_graph(rng: np.random.Generator, n: int, p: float = 0.3, wmax: float = 3.0) -> WeightedDigraph:
    edges = []
    for s in range(1, n + 1):
        for d in range(1, n + 1):
            if s != d and rng.random() < p:
                edges.append((s, d, float(rng.uniform(0.1, wmax))))
    return WeightedDigraph(n, edges)


def random_faulted_graph(rng: np.random.Generator, sizes=(3, 2), n_extra: int = 3) -> WeightedDigraph:
    """Basic bicomponents of the given sizes (cycles with random weights) plus
    ``n_extra`` nodes that listen to them and to each other."""
    edges = []
    start = 1
    basic = []
    for size in sizes:
        comp = list(range(start, start + size))
        basic.append(comp)
        for a, b in zip(comp, comp[1:] + comp[:1]):
            if a != b:
                edges.append((a, b, float(rng.uniform(0.5, 2.0))))
        start += size
    extra = list(range(start, start + n_extra))
    n = start + n_extra - 1
    sources = [v for comp in basic for v in comp]
    for v in extra:
        for s in rng.choice(sources, size=min(2, len(sources)), replace=False):
            edges.append((int(s), v, float(rng.uniform(0.5, 2.0))))
    for a in extra:
        for b in extra:
            if a != b and rng.random() < 0.4:
                edges.append((a, b, float(rng.uniform(0.5, 2.0))))
    return WeightedDigraph(n, edges)


@st.composite
def graphs(draw, max_nodes: int = 8):
    n = draw(st.integers(1, max_nodes))
    pairs = [(s, d) for s in range(1, n + 1) for d in range(1, n + 1) if s != d]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=len(pairs))) if pairs else []
    weights = draw(st.lists(st.floats(0.1, 5.0), min_size=len(chosen), max_size=len(chosen)))
    return WeightedDigraph(n, [(s, d, w) for (s, d), w in zip(chosen, weights)])


# ---------------------------------------------------------------- oracles


def reachability(g: WeightedDigraph) -> np.ndarray:
    """Boolean closure ``R[a, b]``: b reachable from a (including a == b)."""
    n = g.n
    r = np.eye(n, dtype=bool)
    for s, d in g.weights:
        r[s - 1, d - 1] = True
    for k in range(n):
        r = r | (r[:, [k]] & r[[k], :])
    return r


def brute_force_bicomponents(g: WeightedDigraph):
    """Mutual-reachability classes and their basic flags, as a set."""
    r = reachability(g)
    mutual = r & r.T
    classes = {tuple(int(v) + 1 for v in np.flatnonzero(mutual[i])) for i in range(g.n)}
    out = set()
    for comp in classes:
        inside = set(comp)
        basic = not any(d in inside and s not in inside for s, d in g.weights)
        out.add((comp, basic))
    return out


def beta_via_nullspace(lap: np.ndarray, basic_components, nonbasic_nodes) -> np.ndarray:
    """Weights from the right null space of L: the null vector equal to 1 on
    basic bicomponent i and 0 on the others takes the value beta[:, i] on
    the non-basic nodes."""
    ns = null_space(lap)
    reps = [c[0] - 1 for c in basic_components]
    coeff = np.linalg.solve(ns[reps, :], np.eye(len(reps)))
    vecs = ns @ coeff
    return vecs[[v - 1 for v in nonbasic_nodes], :]


def match_multisets(a, b) -> float:
    """Largest distance under the optimal one-to-one matching."""
    from scipy.optimize import linear_sum_assignment

    a, b = np.asarray(a), np.asarray(b)
    assert a.shape == b.shape
    cost = np.abs(a[:, None] - b[None, :])
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].max())


def conservation_gap(sc, seed=None) -> float:
    """Worst deviation of each basic bicomponent's weighted average from the
    exact flow of A~ (matrix exponential or matrix power), scaled by 1 + |x0|."""
    run = analyze(sc, seed=seed)
    At = run.system.Atilde
    worst = 0.0
    for i, comp in enumerate(run.blocks.basic_components):
        alpha = left_eigenvector(run.blocks.Li[i])
        idx = [v - 1 for v in comp]
        w = np.einsum("j,tjd->td", alpha, run.series.states[:, idx, :])
        for t, wt in zip(run.series.times, w):
            ref = (expm(t * At) if sc.time_domain == "continuous" else np.linalg.matrix_power(At, int(t))) @ w[0]
            worst = max(worst, float(np.max(np.abs(wt - ref))))
    return worst / (1 + np.max(np.abs(run.x0)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one summary line per acceptance criterion, filled in by test_acceptance
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
