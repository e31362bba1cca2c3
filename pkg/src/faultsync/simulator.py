"""Closed-loop network simulation and empirical checks of the predictions."""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, NonFinite, NotCertified, RankDeficient
from .graph import LaplacianBlocks, block_decomposition, laplacian, row_stochastic
from .protocol import TildeSystem, canonical_lambdas, certify_scale_free, check_agent_admissibility, closed_loop
from .sync import beta_weights, predict_nonbasic, sync_initials

DIVERGENCE_LIMIT = 1e12
MAX_CONDITION = 1e8
DEFAULT_STEP = 1e-2
DEFAULT_HORIZON = 50.0
DEFAULT_STEPS = 2000
DEFAULT_TAIL = 0.2


@dataclass(frozen=True, eq=False)
class NetworkSystem:
    """``x+ = M x`` for the stacked states of all agents.

    ``order[p]`` is the 0-based original index of the node stored in slot
    ``p`` of the stacked state.
    """

    M: np.ndarray
    dim: int
    order: np.ndarray
    time_domain: str

    @property
    def N(self) -> int:
        return len(self.order)


def build_network(coupling, sys: TildeSystem, *, stochastic: bool = False) -> NetworkSystem:
    """Assemble ``I (x) A~ + Lc (x) B~C~``.

    ``coupling`` is either :class:`LaplacianBlocks` (nodes are stored in block
    order) or a square matrix in original order: the Laplacian for continuous
    time, ``I - D`` for discrete time, or ``D`` itself with ``stochastic=True``.
    """
    if isinstance(coupling, LaplacianBlocks):
        lc, order = coupling.assemble(), coupling.perm
    else:
        lc = np.asarray(coupling, dtype=float)
        if lc.ndim != 2 or lc.shape[0] != lc.shape[1]:
            raise DimensionMismatch(f"coupling must be square, got {lc.shape}")
        if stochastic:
            lc = np.eye(lc.shape[0]) - lc
        order = np.arange(lc.shape[0])
    n_nodes = lc.shape[0]
    M = np.kron(np.eye(n_nodes), sys.Atilde) + np.kron(lc, sys.BC)
    return NetworkSystem(M=M, dim=sys.dim, order=np.asarray(order), time_domain=sys.time_domain)


def autonomous(Atilde: np.ndarray, copies: int, time_domain: str) -> NetworkSystem:
    """``copies`` uncoupled agents evolving under ``A~`` alone."""
    d = Atilde.shape[0]
    M = np.kron(np.eye(copies), Atilde)
    return NetworkSystem(M=M, dim=d, order=np.arange(copies), time_domain=time_domain)


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Samples ``states[t, node, component]`` in original node order."""

    times: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        if self.states.ndim != 3 or self.states.shape[0] != len(self.times):
            raise DimensionMismatch("states must have shape (samples, nodes, dim)")
        if len(self.times) > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("sample times must increase")

    def tail_mask(self, tail_fraction: float) -> np.ndarray:
        if not 0 < tail_fraction <= 1:
            raise ValueError(f"tail fraction must lie in (0, 1], got {tail_fraction}")
        t0, t1 = self.times[0], self.times[-1]
        return self.times >= t1 - tail_fraction * (t1 - t0)

    def to_csv(self, every: int = 1) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "node", "component", "value"])
        for ti in range(0, len(self.times), every):
            t = self.times[ti]
            t_text = repr(int(t)) if float(t).is_integer() and self.times.dtype.kind in "iu" else repr(float(t))
            for v, row in enumerate(self.states[ti], start=1):
                for c, x in enumerate(row):
                    w.writerow([t_text, v, c, repr(float(x))])
        return buf.getvalue()

    def to_dict(self, every: int = 1) -> dict:
        return {
            "times": self.times[::every].tolist(),
            "states": self.states[::every].tolist(),
        }


def rk4_propagator(M: np.ndarray, h: float) -> np.ndarray:
    """One classical RK4 step for ``x' = M x`` written as a matrix.

    The four stages are applied to the identity, so ``P @ x`` equals the
    usual ``x + h/6 (k1 + 2 k2 + 2 k3 + k4)`` update.
    """
    eye = np.eye(M.shape[0])
    k1 = M
    k2 = M @ (eye + 0.5 * h * k1)
    k3 = M @ (eye + 0.5 * h * k2)
    k4 = M @ (eye + h * k3)
    return eye + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def simulate(net: NetworkSystem, x0, horizon: float | None = None, step: float = DEFAULT_STEP) -> TimeSeries:
    """Integrate the network from ``x0`` (shape ``(N, dim)``, original node order).

    Continuous time uses fixed-step RK4 and samples every step; discrete
    time iterates ``x(t+1) = M x(t)`` for ``horizon`` steps (``step`` is
    ignored).

    Raises:
        NonFinite: if any state exceeds the divergence guard.
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (net.N, net.dim):
        if x0.size != net.N * net.dim:
            raise DimensionMismatch(f"initial state has shape {x0.shape}, expected {(net.N, net.dim)}")
        x0 = x0.reshape(net.N, net.dim)
    if net.time_domain == "continuous":
        horizon = DEFAULT_HORIZON if horizon is None else horizon
        if not step > 0 or not horizon >= step:
            raise ValueError(f"need step > 0 and horizon >= step, got h={step}, T={horizon}")
        n_steps = int(round(horizon / step))
        prop = rk4_propagator(net.M, step)
        times = np.arange(n_steps + 1) * step
    else:
        n_steps = DEFAULT_STEPS if horizon is None else int(horizon)
        if n_steps < 1 or n_steps != horizon and horizon is not None:
            raise ValueError(f"discrete horizon must be a positive step count, got {horizon}")
        prop = net.M
        times = np.arange(n_steps + 1)
    x = x0[net.order].reshape(-1)
    out = np.empty((n_steps + 1, x.size))
    out[0] = x
    for s in range(1, n_steps + 1):
        x = prop @ x
        if not np.all(np.abs(x) <= DIVERGENCE_LIMIT):
            bad = times[s]
            raise NonFinite(f"state magnitude exceeded {DIVERGENCE_LIMIT:g} at t={bad}")
        out[s] = x
    states = np.empty((n_steps + 1, net.N, net.dim))
    states[:, net.order, :] = out.reshape(n_steps + 1, net.N, net.dim)
    return TimeSeries(times=times, states=states)


def disagreement(series: TimeSeries, nodes: Sequence[int], tail_fraction: float = DEFAULT_TAIL):
    """Largest pairwise sup-norm state difference within ``nodes`` (1-based).

    Returns:
        ``(per_time, tail_sup)``: the disagreement at every sample and its
        maximum over the final ``tail_fraction`` of the horizon.
    """
    idx = [v - 1 for v in nodes]
    if not idx:
        raise ValueError("node set must be nonempty")
    mask = series.tail_mask(tail_fraction)
    sub = series.states[:, idx, :]
    per_time = (sub.max(axis=1) - sub.min(axis=1)).max(axis=1)
    return per_time, float(per_time[mask].max())


@dataclass
class WeightFit:
    weights: np.ndarray
    residual: float
    condition: float


def _stack_sync(sync) -> np.ndarray:
    if isinstance(sync, np.ndarray):
        return sync
    parts = []
    for s in sync:
        st = s.states if isinstance(s, TimeSeries) else np.asarray(s)
        parts.append(st.reshape(st.shape[0], -1))
    return np.stack(parts, axis=1)


def estimate_weights(
    series: TimeSeries,
    sync,
    node: int,
    tail_fraction: float = DEFAULT_TAIL,
    affine: bool = True,
) -> WeightFit:
    """Fit the tail of ``node``'s trajectory as ``sum_i w_i sync_i(t)``.

    ``sync`` is an array ``(samples, k, dim)`` or a sequence of ``k``
    single-trajectory series sampled at the same times as ``series``.

    With ``affine=True`` the row ``sum_i w_i = 1`` is appended to the
    stacked least-squares system. Without it a single trajectory cannot
    separate bicomponents whose synchronized states are parallel (e.g.
    integrator agents, which sit still), or more bicomponents than the
    persistent state dimension.

    Raises:
        RankDeficient: if the design matrix has condition number above 1e8.
    """
    s = _stack_sync(sync)
    if s.shape[0] != len(series.times):
        raise DimensionMismatch("synchronized trajectories are sampled at different times")
    mask = series.tail_mask(tail_fraction)
    k = s.shape[1]
    design = s[mask].transpose(0, 2, 1).reshape(-1, k)
    target = series.states[mask, node - 1, :].reshape(-1)
    if affine:
        scale = max(1.0, np.linalg.norm(design) / np.sqrt(k))
        design = np.vstack([design, scale * np.ones((1, k))])
        rhs = np.concatenate([target, [scale]])
    else:
        rhs = target
    sv = np.linalg.svd(design, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv.size and sv[-1] > 0 else float("inf")
    if not cond <= MAX_CONDITION:
        raise RankDeficient(f"synchronized trajectories are degenerate (condition {cond:.3e})")
    w, *_ = np.linalg.lstsq(design, rhs, rcond=None)
    fit = design[: target.size] @ w
    resid = float(np.linalg.norm(fit - target) / max(np.linalg.norm(target), np.finfo(float).tiny))
    return WeightFit(weights=w, residual=resid, condition=cond)


# --------------------------------------------------------------------------
# end-to-end


@dataclass
class SyncReport:
    scenario_id: str
    time_domain: str
    k: int
    bicomponents: list
    nonbasic_nodes: list
    disagreement: list
    nonbasic_error: float
    predicted_beta: dict
    measured_beta: list | None
    max_beta_deviation: float | None
    fit_residuals: list
    fit_status: str
    certification: dict
    tolerance: float
    passed: bool
    seed: int | None
    rng: str
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RunArtifacts:
    """Everything :func:`analyze` computed, for tests and the CLI."""

    report: SyncReport
    blocks: LaplacianBlocks
    system: TildeSystem
    x0: np.ndarray
    series: TimeSeries
    sync: np.ndarray
    prediction: np.ndarray


def coupling_matrix(scenario) -> np.ndarray:
    """``L`` for continuous scenarios, ``I - D`` for discrete ones."""
    g = scenario.graph
    if scenario.time_domain == "continuous":
        return laplacian(g)
    return np.eye(g.n) - row_stochastic(g, scenario.q_config())


def certification_summary(scenario, sys: TildeSystem | None = None, lambdas=None) -> dict:
    sys = sys or closed_loop(scenario.agent, scenario.protocol)
    mode = "collaborative" if scenario.protocol.collaborative else "non-collaborative"
    adm = check_agent_admissibility(scenario.agent, mode)
    if lambdas is None:
        g = scenario.graph
        base = laplacian(g) if scenario.time_domain == "continuous" else row_stochastic(g, scenario.q_config())
        lambdas = canonical_lambdas(base, scenario.time_domain)
    cert = certify_scale_free(sys, lambdas) if lambdas else None
    return {
        "admissibility": adm.to_dict(),
        "scale_free": cert.to_dict() if cert else None,
        "passed": bool(adm.admissible and (cert is None or cert.passed)),
    }


def analyze(scenario, *, certify: bool = True, tolerance: float = 1e-3, seed: int | None = None) -> RunArtifacts:
    """Predict, simulate, and compare for one scenario.

    Raises:
        NotCertified: if certification fails and ``certify`` is true.
    """
    from .scenario import RNG_NAME

    sys = closed_loop(scenario.agent, scenario.protocol)
    summary = certification_summary(scenario, sys) if certify else {"waived": True, "passed": None}
    if certify and not summary["passed"]:
        raise NotCertified(summary)

    g = scenario.graph
    blocks = block_decomposition(g, coupling_matrix(scenario))
    beta = beta_weights(blocks)
    x0 = scenario.initial_states(seed)
    td = scenario.time_domain
    horizon = scenario.sim.T
    net = build_network(blocks, sys)
    series = simulate(net, x0, horizon, scenario.sim.h)

    w0 = sync_initials(blocks, x0)
    sync_series = simulate(autonomous(sys.Atilde, blocks.k, td), w0, horizon, scenario.sim.h)
    sync = sync_series.states

    tail = scenario.sim.tail_fraction
    mask = series.tail_mask(tail)
    dis = [disagreement(series, comp, tail)[1] for comp in blocks.basic_components]

    nb = [v - 1 for v in blocks.nonbasic_nodes]
    prediction = predict_nonbasic(blocks, sync)
    if nb:
        err = np.abs(series.states[:, nb, :] - prediction).max(axis=(1, 2))
        nonbasic_error = float(err[mask].max())
    else:
        nonbasic_error = 0.0

    notes = []
    measured: list | None = []
    residuals = []
    status = "ok"
    try:
        for v in blocks.nonbasic_nodes:
            fit = estimate_weights(series, sync, v, tail)
            measured.append(fit.weights.tolist())
            residuals.append(fit.residual)
    except RankDeficient as exc:
        measured, residuals = None, []
        status = "weights unidentifiable"
        notes.append(str(exc))
    if measured:
        max_dev = float(np.max(np.abs(np.asarray(measured) - beta.beta)))
    else:
        max_dev = 0.0 if measured is not None else None

    passed = max(dis, default=0.0) < tolerance and nonbasic_error < tolerance
    if max_dev is not None:
        passed = passed and max_dev < tolerance
    report = SyncReport(
        scenario_id=scenario.id,
        time_domain=td,
        k=blocks.k,
        bicomponents=[list(c) for c in blocks.basic_components],
        nonbasic_nodes=list(blocks.nonbasic_nodes),
        disagreement=dis,
        nonbasic_error=nonbasic_error,
        predicted_beta=beta.to_dict(),
        measured_beta=measured,
        max_beta_deviation=max_dev,
        fit_residuals=residuals,
        fit_status=status,
        certification=summary,
        tolerance=tolerance,
        passed=bool(passed),
        seed=scenario.effective_seed(seed),
        rng=RNG_NAME,
        notes=notes,
    )
    return RunArtifacts(report, blocks, sys, x0, series, sync, prediction)
