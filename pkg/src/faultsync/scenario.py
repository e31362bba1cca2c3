"""Scenario files: graph, agent, protocol, simulation settings, initial states.

Schema (JSON)::

    {
      "id": "three-node-fault",
      "time_domain": "continuous" | "discrete",
      "graph": {"nodes": 3, "edges": [[1, 3, 1.0], [2, 3, 3.0]]} | "graph.json" | "edges.csv",
      "agent": {"A": [[...]], "B": [[...]], "C": [[...]]},
      "protocol": {"type": "non-collaborative", "Ac": ..., "Bc": ..., "Fc": ..., "Gc": ...}
                | {"type": "collaborative", "Ac", "Bc", "Ec", "Fc", "Gc1", "Gc2", "Hc"},
      "q": [q_1, ..., q_N] | {"<node>": q, ...},          (optional, discrete only)
      "faults": [[from, to], ...],                          (optional)
      "sim": {"T": 50, "h": 0.01, "tail_fraction": 0.2, "seed": 0},
      "initial": {"kind": "random", "seed": 1} | {"kind": "explicit", "states": [[...], ...]}
    }

For discrete scenarios ``sim.T`` is the number of steps and ``h`` is unused.
Initial states have ``n + n_c`` entries per node (agent state, then protocol state).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any

import numpy as np

from .errors import FaultSyncError, InvalidGraph, ParseError, ValidationError
from .graph import RowStochasticConfig, WeightedDigraph, graph_from_dict, inject_fault, load_graph
from .protocol import AgentModel, CollaborativeProtocol, NonCollaborativeProtocol, ProtocolSpec
from .simulator import DEFAULT_HORIZON, DEFAULT_STEP, DEFAULT_STEPS, DEFAULT_TAIL

RNG_NAME = "numpy.random.Generator(PCG64)"


@dataclass(frozen=True)
class SimConfig:
    T: float
    h: float = DEFAULT_STEP
    tail_fraction: float = DEFAULT_TAIL
    seed: int | None = None


@dataclass(frozen=True, eq=False)
class InitialSpec:
    kind: str
    seed: int | None = None
    states: np.ndarray | None = None

    def __eq__(self, other):
        if not isinstance(other, InitialSpec):
            return NotImplemented
        same_states = (self.states is None and other.states is None) or (
            self.states is not None and other.states is not None and np.array_equal(self.states, other.states)
        )
        return self.kind == other.kind and self.seed == other.seed and same_states


@dataclass(frozen=True, eq=False)
class Scenario:
    id: str
    graph: WeightedDigraph
    agent: AgentModel
    protocol: ProtocolSpec
    sim: SimConfig
    initial: InitialSpec
    q: tuple[float, ...] | None = None
    faults: tuple[tuple[int, int], ...] = ()

    @property
    def time_domain(self) -> str:
        return self.agent.time_domain

    @property
    def dim(self) -> int:
        return self.agent.n + self.protocol.nc

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        return serialize(self) == serialize(other)

    __hash__ = None

    def q_config(self) -> RowStochasticConfig | None:
        return RowStochasticConfig(self.q) if self.q is not None else None

    def faulted(self, extra: tuple[tuple[int, int], ...] = ()) -> "Scenario":
        """Copy with all listed faults removed from the graph."""
        g = inject_fault(self.graph, list(self.faults) + list(extra))
        return replace(self, graph=g, faults=())

    def effective_seed(self, seed: int | None = None) -> int | None:
        if self.initial.kind != "random":
            return None
        return self.initial.seed if seed is None else seed

    def initial_states(self, seed: int | None = None) -> np.ndarray:
        """Initial states ``(N, n + n_c)``; random ones are uniform in [-1, 1]."""
        shape = (self.graph.n, self.dim)
        if self.initial.kind == "explicit":
            return np.array(self.initial.states, dtype=float)
        rng = np.random.Generator(np.random.PCG64(self.effective_seed(seed)))
        return rng.uniform(-1.0, 1.0, size=shape)

    def to_dict(self) -> dict:
        sim = {"T": self.sim.T, "h": self.sim.h, "tail_fraction": self.sim.tail_fraction}
        if self.sim.seed is not None:
            sim["seed"] = self.sim.seed
        if self.initial.kind == "random":
            initial: dict[str, Any] = {"kind": "random", "seed": self.initial.seed}
        else:
            initial = {"kind": "explicit", "states": self.initial.states.tolist()}
        out = {
            "id": self.id,
            "time_domain": self.time_domain,
            "graph": self.graph.to_dict(),
            "agent": {"A": self.agent.A.tolist(), "B": self.agent.B.tolist(), "C": self.agent.C.tolist()},
            "protocol": self.protocol.to_dict(),
            "sim": sim,
            "initial": initial,
        }
        if self.q is not None:
            out["q"] = list(self.q)
        if self.faults:
            out["faults"] = [list(e) for e in self.faults]
        return out


def serialize(scenario: Scenario) -> str:
    return json.dumps(scenario.to_dict(), indent=2) + "\n"


def _require(obj: dict, key: str, path: str):
    if not isinstance(obj, dict) or key not in obj:
        raise ValidationError(f"{path}.{key}" if path else key, "missing")
    return obj[key]


def _matrix(value, name: str) -> np.ndarray:
    try:
        m = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValidationError(name, "not a numeric matrix") from exc
    if m.ndim == 1 and m.size == 0:
        return m.reshape(0, 0)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    if m.ndim != 2:
        raise ValidationError(name, f"expected a row-major nested array, got {m.ndim} dimensions")
    if not np.all(np.isfinite(m)):
        raise ValidationError(name, "non-finite entry")
    return m


def _parse_agent(data: dict, time_domain: str) -> AgentModel:
    A = _matrix(_require(data, "A", "agent"), "agent.A")
    B = _matrix(_require(data, "B", "agent"), "agent.B")
    C = _matrix(_require(data, "C", "agent"), "agent.C")
    if A.shape[0] != A.shape[1] or A.size == 0:
        raise ValidationError("agent.A", f"must be square and nonempty, got {A.shape}")
    if B.shape[0] != A.shape[0]:
        raise ValidationError("agent.B", f"has {B.shape[0]} rows but agent.A is {A.shape[0]}x{A.shape[0]}")
    if C.shape[1] != A.shape[0]:
        raise ValidationError("agent.C", f"has {C.shape[1]} columns but agent.A is {A.shape[0]}x{A.shape[0]}")
    return AgentModel(A, B, C, time_domain)


def _check_shape(m: np.ndarray, name: str, shape: tuple[int, int], against: str) -> None:
    if m.shape != shape:
        raise ValidationError(name, f"has shape {m.shape}, expected {shape} from {against}")


def _parse_protocol(data: dict, agent: AgentModel) -> ProtocolSpec:
    if not isinstance(data, dict):
        raise ValidationError("protocol", "must be an object")
    kind = data.get("type", "non-collaborative")
    n_in, n_out = agent.m, agent.p
    if kind == "non-collaborative":
        Gc = _matrix(_require(data, "Gc", "protocol"), "protocol.Gc")
        _check_shape(Gc, "protocol.Gc", (n_in, n_out), "agent.B/agent.C")
        Ac = _matrix(data.get("Ac", []), "protocol.Ac")
        nc = Ac.shape[0]
        if Ac.shape != (nc, nc):
            raise ValidationError("protocol.Ac", f"must be square, got {Ac.shape}")
        Bc = _matrix(data.get("Bc", []), "protocol.Bc")
        Fc = _matrix(data.get("Fc", []), "protocol.Fc")
        if nc == 0:
            Bc, Fc = np.zeros((0, n_out)), np.zeros((n_in, 0))
        _check_shape(Bc, "protocol.Bc", (nc, n_out), "protocol.Ac/agent.C")
        _check_shape(Fc, "protocol.Fc", (n_in, nc), "agent.B/protocol.Ac")
        return NonCollaborativeProtocol(Gc=Gc, Ac=Ac, Bc=Bc, Fc=Fc)
    if kind == "collaborative":
        mats = {k: _matrix(_require(data, k, "protocol"), f"protocol.{k}") for k in ("Ac", "Bc", "Ec", "Fc", "Gc1", "Gc2", "Hc")}
        nc = mats["Ac"].shape[0]
        if nc == 0 or mats["Ac"].shape != (nc, nc):
            raise ValidationError("protocol.Ac", f"must be square and nonempty, got {mats['Ac'].shape}")
        h = mats["Hc"].shape[0]
        _check_shape(mats["Hc"], "protocol.Hc", (h, nc), "protocol.Ac")
        _check_shape(mats["Bc"], "protocol.Bc", (nc, n_out), "protocol.Ac/agent.C")
        _check_shape(mats["Ec"], "protocol.Ec", (nc, h), "protocol.Ac/protocol.Hc")
        _check_shape(mats["Fc"], "protocol.Fc", (n_in, nc), "agent.B/protocol.Ac")
        _check_shape(mats["Gc1"], "protocol.Gc1", (n_in, n_out), "agent.B/agent.C")
        _check_shape(mats["Gc2"], "protocol.Gc2", (n_in, h), "agent.B/protocol.Hc")
        return CollaborativeProtocol(**mats)
    raise ValidationError("protocol.type", f"unknown protocol type {kind!r}")


def _parse_graph(value, base_dir: Path | None) -> WeightedDigraph:
    try:
        if isinstance(value, str):
            path = Path(value)
            if not path.is_absolute() and base_dir is not None:
                path = base_dir / path
            return load_graph(path)
        return graph_from_dict(value)
    except InvalidGraph as exc:
        raise ValidationError("graph", str(exc)) from exc
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError("graph", f"cannot read graph file: {exc}") from exc


def _parse_q(value, g: WeightedDigraph) -> tuple[float, ...] | None:
    if value is None:
        return None
    if isinstance(value, dict):
        q = RowStochasticConfig.default(g).q
        q = list(q)
        for key, v in value.items():
            try:
                node = int(key)
            except ValueError as exc:
                raise ValidationError("q", f"bad node label {key!r}") from exc
            if not 1 <= node <= g.n:
                raise ValidationError("q", f"node {node} outside 1..{g.n}")
            q[node - 1] = float(v)
    elif isinstance(value, list):
        if len(value) != g.n:
            raise ValidationError("q", f"expected {g.n} bounds, got {len(value)}")
        q = [float(v) for v in value]
    else:
        raise ValidationError("q", "must be a list or an object keyed by node")
    try:
        RowStochasticConfig(tuple(q)).validate(g)
    except FaultSyncError as exc:
        raise ValidationError("q", str(exc)) from exc
    return tuple(q)


def _parse_int(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
        raise ValidationError(name, f"expected an integer, got {value!r}")
    return int(value)


def parse_scenario(text: str, base_dir: str | Path | None = None) -> Scenario:
    """Parse and fully validate a scenario document.

    Raises:
        ParseError: malformed JSON (with line number).
        ValidationError: inconsistent or missing fields (names the field).
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from exc
    if not isinstance(data, dict):
        raise ParseError("scenario must be a JSON object", line=1)
    base = Path(base_dir) if base_dir is not None else None

    td = data.get("time_domain", "continuous")
    if td not in ("continuous", "discrete"):
        raise ValidationError("time_domain", f"must be 'continuous' or 'discrete', got {td!r}")
    graph = _parse_graph(_require(data, "graph", ""), base)
    agent = _parse_agent(_require(data, "agent", ""), td)
    protocol = _parse_protocol(_require(data, "protocol", ""), agent)

    q = _parse_q(data.get("q"), graph)
    if q is not None and td != "discrete":
        raise ValidationError("q", "degree bounds only apply to discrete time")

    faults = []
    for e in data.get("faults", []) or []:
        if not isinstance(e, list) or len(e) != 2:
            raise ValidationError("faults", f"entries must be [from, to], got {e!r}")
        edge = (_parse_int(e[0], "faults"), _parse_int(e[1], "faults"))
        if edge not in graph.weights:
            raise ValidationError("faults", f"edge {edge[0]}->{edge[1]} not in graph")
        faults.append(edge)

    sim_data = data.get("sim", {}) or {}
    if not isinstance(sim_data, dict):
        raise ValidationError("sim", "must be an object")
    T = sim_data.get("T", DEFAULT_HORIZON if td == "continuous" else DEFAULT_STEPS)
    h = float(sim_data.get("h", DEFAULT_STEP))
    tail = float(sim_data.get("tail_fraction", DEFAULT_TAIL))
    if td == "discrete":
        T = _parse_int(T, "sim.T")
        if T < 1:
            raise ValidationError("sim.T", "must be at least one step")
    else:
        T = float(T)
        if not h > 0:
            raise ValidationError("sim.h", "must be positive")
        if not T >= h:
            raise ValidationError("sim.T", "must be at least one step (sim.h)")
    if not 0 < tail <= 1:
        raise ValidationError("sim.tail_fraction", "must lie in (0, 1]")
    sim_seed = sim_data.get("seed")
    sim = SimConfig(T=T, h=h, tail_fraction=tail, seed=None if sim_seed is None else _parse_int(sim_seed, "sim.seed"))

    dim = agent.n + protocol.nc
    init = data.get("initial", {"kind": "random"})
    kind = init.get("kind") if isinstance(init, dict) else None
    if kind == "random":
        seed = init.get("seed", sim.seed)
        if seed is None:
            raise ValidationError("initial.seed", "random initial states need a seed")
        initial = InitialSpec("random", seed=_parse_int(seed, "initial.seed"))
    elif kind == "explicit":
        states = _matrix(_require(init, "states", "initial"), "initial.states")
        if states.shape != (graph.n, dim):
            raise ValidationError("initial.states", f"has shape {states.shape}, expected {(graph.n, dim)} from graph.nodes/agent+protocol")
        initial = InitialSpec("explicit", states=states)
    else:
        raise ValidationError("initial.kind", "must be 'random' or 'explicit'")

    return Scenario(
        id=str(data.get("id", "scenario")),
        graph=graph,
        agent=agent,
        protocol=protocol,
        sim=sim,
        initial=initial,
        q=q,
        faults=tuple(faults),
    )


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    return parse_scenario(path.read_text(), base_dir=path.parent)


def fixture_names() -> list[str]:
    from importlib.resources import files

    return sorted(p.name[:-5] for p in files("faultsync.fixtures").iterdir() if p.name.endswith(".json"))


def load_fixture(name: str) -> Scenario:
    """Load a bundled scenario by name (see :func:`fixture_names`)."""
    from importlib.resources import files

    res = files("faultsync.fixtures") / f"{name}.json"
    if not res.is_file():
        raise ValidationError("scenario", f"no bundled fixture named {name!r}; have {fixture_names()}")
    return parse_scenario(res.read_text())
