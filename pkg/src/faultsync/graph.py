"""Weighted directed communication graphs.

Nodes are labelled ``1..n``. An edge ``(j, i, w)`` carries information from
node ``j`` to node ``i`` and contributes ``a_ij = w`` to the adjacency matrix,
so row ``i`` of the Laplacian collects what node ``i`` hears.

Matrix-valued helpers return dense ``numpy`` arrays indexed ``0..n-1``.
"""

from __future__ import annotations

import csv
import heapq
import io
import json
from dataclasses import dataclass
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import BoundViolation, InvalidGraph, UnknownEdge

# singular values below ZERO_RTOL * ||L||_inf count as zero
ZERO_RTOL = 1e-9

Edge = tuple[int, int]


class WeightedDigraph:
    """Immutable weighted digraph ``(V, E, A)``.

    Args:
        n: number of nodes.
        edges: iterable of ``(from, to, weight)`` triples with 1-based labels,
            or a mapping ``{(from, to): weight}``.
    """

    __slots__ = ("n", "weights")

    n: int
    weights: Mapping[Edge, float]

    def __init__(self, n: int, edges: Iterable[Sequence[float]] | Mapping[Edge, float] = ()):
        if int(n) != n or n < 0:
            raise InvalidGraph(f"node count must be a nonnegative integer, got {n!r}")
        n = int(n)
        items = edges.items() if isinstance(edges, Mapping) else ((e[:2], e[2]) for e in edges)
        weights: dict[Edge, float] = {}
        for (src, dst), w in items:
            if int(src) != src or int(dst) != dst:
                raise InvalidGraph(f"node labels must be integers: {(src, dst)!r}")
            src, dst = int(src), int(dst)
            if not (1 <= src <= n and 1 <= dst <= n):
                raise InvalidGraph(f"edge {src}->{dst} references a node outside 1..{n}")
            if src == dst:
                raise InvalidGraph(f"self-loop at node {src}")
            w = float(w)
            if not np.isfinite(w) or w <= 0.0:
                raise InvalidGraph(f"edge {src}->{dst} has non-positive weight {w!r}")
            if (src, dst) in weights:
                raise InvalidGraph(f"duplicate edge {src}->{dst}")
            weights[(src, dst)] = w
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "weights", MappingProxyType(dict(sorted(weights.items()))))

    def __setattr__(self, name, value):
        raise AttributeError("WeightedDigraph is immutable")

    @property
    def edges(self) -> list[tuple[int, int, float]]:
        return [(s, d, w) for (s, d), w in self.weights.items()]

    def adjacency(self) -> np.ndarray:
        """Return ``A`` with ``A[i-1, j-1] = a_ij`` for every edge ``j -> i``."""
        a = np.zeros((self.n, self.n))
        for (src, dst), w in self.weights.items():
            a[dst - 1, src - 1] = w
        return a

    def successors(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.n)]
        for src, dst in self.weights:
            out[src - 1].append(dst - 1)
        return out

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, WeightedDigraph):
            return NotImplemented
        return self.n == other.n and dict(self.weights) == dict(other.weights)

    def __hash__(self) -> int:
        return hash((self.n, tuple(self.weights.items())))

    def __repr__(self) -> str:
        return f"WeightedDigraph(n={self.n}, edges={self.edges!r})"

    def to_dict(self) -> dict:
        return {"nodes": self.n, "edges": [[s, d, w] for s, d, w in self.edges]}


def laplacian(g: WeightedDigraph) -> np.ndarray:
    """Laplacian with in-degrees on the diagonal and ``-a_ij`` off it.

    The diagonal is formed as the negated sum of the off-diagonal row, so
    adding it to that same off-diagonal sum gives exactly zero.
    """
    lap = 0.0 - g.adjacency()
    np.fill_diagonal(lap, 0.0)
    np.fill_diagonal(lap, -lap.sum(axis=1))
    return lap


def in_degrees(g: WeightedDigraph) -> np.ndarray:
    return g.adjacency().sum(axis=1)


@dataclass(frozen=True)
class RowStochasticConfig:
    """Per-node bounds ``q_i >= d_in(i)`` used to normalize discrete coupling."""

    q: tuple[float, ...]

    @classmethod
    def default(cls, g: WeightedDigraph) -> "RowStochasticConfig":
        return cls(tuple(float(d) for d in in_degrees(g)))

    @classmethod
    def with_margin(cls, g: WeightedDigraph, margin: float) -> "RowStochasticConfig":
        return cls(tuple(float(d) + margin for d in in_degrees(g)))

    def validate(self, g: WeightedDigraph) -> None:
        if len(self.q) != g.n:
            raise BoundViolation(f"expected {g.n} bounds, got {len(self.q)}")
        for i, (q, d) in enumerate(zip(self.q, in_degrees(g)), start=1):
            if not q >= d:
                raise BoundViolation(f"q_{i} = {q} is below d_in({i}) = {d}")


def row_stochastic(g: WeightedDigraph, cfg: RowStochasticConfig | None = None) -> np.ndarray:
    """Row-stochastic matrix ``D`` with ``(I + Q)^-1 L = I - D``.

    Raises:
        BoundViolation: if some ``q_i < d_in(i)``.
    """
    cfg = cfg or RowStochasticConfig.default(g)
    cfg.validate(g)
    q = np.asarray(cfg.q, dtype=float)
    d = g.adjacency() / (1.0 + q)[:, None]
    np.fill_diagonal(d, 0.0)
    np.fill_diagonal(d, 1.0 - d.sum(axis=1))
    return d


def normalized_laplacian(g: WeightedDigraph, cfg: RowStochasticConfig | None = None) -> np.ndarray:
    """``I - D``, the discrete-time counterpart of the Laplacian."""
    return np.eye(g.n) - row_stochastic(g, cfg)


# --------------------------------------------------------------------------
# bicomponents


def strongly_connected_components(n: int, succ: Sequence[Sequence[int]]) -> list[list[int]]:
    """Tarjan's lowlink algorithm, iterative. Nodes are ``0..n-1``.

    Components are emitted in reverse topological order of the condensation
    (every component appears before any component that reaches it).
    """
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    comps: list[list[int]] = []
    counter = 0
    for root in range(n):
        if index[root] >= 0:
            continue
        work = [(root, 0)]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            v, pos = work[-1]
            if pos < len(succ[v]):
                work[-1] = (v, pos + 1)
                w = succ[v][pos]
                if index[w] < 0:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, 0))
                elif on_stack[w]:
                    low[v] = min(low[v], index[w])
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                comps.append(sorted(comp))
    return comps


@dataclass(frozen=True)
class BicomponentPartition:
    """Bicomponents in canonical order: non-basic first, basic last.

    ``components`` hold 1-based node labels, each tuple sorted ascending.
    """

    components: tuple[tuple[int, ...], ...]
    basic: tuple[bool, ...]

    @property
    def basic_components(self) -> list[tuple[int, ...]]:
        return [c for c, b in zip(self.components, self.basic) if b]

    @property
    def nonbasic_components(self) -> list[tuple[int, ...]]:
        return [c for c, b in zip(self.components, self.basic) if not b]

    @property
    def k(self) -> int:
        return sum(self.basic)

    def component_of(self) -> dict[int, int]:
        return {v: ci for ci, comp in enumerate(self.components) for v in comp}


def _condensation(g: WeightedDigraph, comps: Sequence[Sequence[int]]):
    comp_of = {v: ci for ci, comp in enumerate(comps) for v in comp}
    succ: list[set[int]] = [set() for _ in comps]
    for src, dst in g.weights:
        a, b = comp_of[src - 1], comp_of[dst - 1]
        if a != b:
            succ[a].add(b)
    return comp_of, succ


def bicomponents(g: WeightedDigraph) -> BicomponentPartition:
    """Partition ``g`` into bicomponents and flag the basic ones.

    Ordering: reverse topological order of the condensation, produced by
    repeatedly taking the available sink with the smallest node label; then
    non-basic components are moved ahead of basic ones (stable).
    """
    raw = strongly_connected_components(g.n, g.successors())
    _, succ = _condensation(g, raw)
    m = len(raw)
    pred: list[set[int]] = [set() for _ in range(m)]
    for a in range(m):
        for b in succ[a]:
            pred[b].add(a)
    out_deg = [len(s) for s in succ]
    heap = [(raw[c][0], c) for c in range(m) if out_deg[c] == 0]
    heapq.heapify(heap)
    order: list[int] = []
    while heap:
        _, c = heapq.heappop(heap)
        order.append(c)
        for p in pred[c]:
            out_deg[p] -= 1
            if out_deg[p] == 0:
                heapq.heappush(heap, (raw[p][0], p))
    is_basic = [not pred[c] for c in range(m)]
    order = [c for c in order if not is_basic[c]] + [c for c in order if is_basic[c]]
    return BicomponentPartition(
        components=tuple(tuple(v + 1 for v in raw[c]) for c in order),
        basic=tuple(is_basic[c] for c in order),
    )


@dataclass(frozen=True, eq=False)
class LaplacianBlocks:
    """Block form of a Laplacian-like matrix after permuting nodes.

    ``perm[p]`` is the 0-based original index of the node placed at position
    ``p``. The first ``k0`` positions hold the non-basic nodes, followed by
    the basic bicomponents in order.
    """

    perm: np.ndarray
    L0: np.ndarray
    L0i: tuple[np.ndarray, ...]
    Li: tuple[np.ndarray, ...]
    basic_components: tuple[tuple[int, ...], ...]
    nonbasic_nodes: tuple[int, ...]

    @property
    def k(self) -> int:
        return len(self.Li)

    @property
    def k0(self) -> int:
        return self.L0.shape[0]

    @property
    def n(self) -> int:
        return len(self.perm)

    @property
    def sizes(self) -> list[int]:
        return [self.k0] + [b.shape[0] for b in self.Li]

    @property
    def offsets(self) -> list[int]:
        """Start positions ``k_0=0, k_1, ..., k_{k+1}=n`` in permuted order."""
        return [0, *np.cumsum(self.sizes).tolist()]

    def block_slice(self, i: int) -> slice:
        """Permuted positions of block ``i`` (0 is the non-basic block)."""
        off = self.offsets
        return slice(off[i], off[i + 1])

    def assemble(self) -> np.ndarray:
        """Reassemble the permuted matrix from its blocks."""
        n = self.n
        out = np.zeros((n, n))
        k0 = self.k0
        out[:k0, :k0] = self.L0
        for i in range(1, self.k + 1):
            sl = self.block_slice(i)
            out[:k0, sl] = self.L0i[i - 1]
            out[sl, sl] = self.Li[i - 1]
        return out

    def unpermuted(self) -> np.ndarray:
        """Reassemble and undo the permutation."""
        permuted = self.assemble()
        out = np.empty_like(permuted)
        out[np.ix_(self.perm, self.perm)] = permuted
        return out


def block_decomposition(g: WeightedDigraph, matrix: np.ndarray | None = None) -> LaplacianBlocks:
    """Split ``matrix`` (default: the Laplacian of ``g``) along the bicomponents.

    ``matrix`` must share the sparsity pattern of ``laplacian(g)``; passing
    ``I - D`` gives the discrete-time blocks.
    """
    lap = laplacian(g) if matrix is None else np.asarray(matrix, dtype=float)
    if lap.shape != (g.n, g.n):
        raise InvalidGraph(f"matrix shape {lap.shape} does not match {g.n} nodes")
    part = bicomponents(g)
    nonbasic = [v for comp in part.nonbasic_components for v in comp]
    basic = part.basic_components
    perm = np.array([v - 1 for v in nonbasic] + [v - 1 for comp in basic for v in comp], dtype=int)
    pl = lap[np.ix_(perm, perm)]
    k0 = len(nonbasic)
    L0i, Li = [], []
    start = k0
    for comp in basic:
        sl = slice(start, start + len(comp))
        L0i.append(pl[:k0, sl].copy())
        Li.append(pl[sl, sl].copy())
        start += len(comp)
    return LaplacianBlocks(
        perm=perm,
        L0=pl[:k0, :k0].copy(),
        L0i=tuple(L0i),
        Li=tuple(Li),
        basic_components=tuple(basic),
        nonbasic_nodes=tuple(nonbasic),
    )


def has_spanning_tree(g: WeightedDigraph) -> bool:
    return bicomponents(g).k == 1


def zero_eigenvalue_multiplicity(lap: np.ndarray) -> int:
    """Count singular values of ``lap`` below ``ZERO_RTOL * ||lap||_inf``."""
    lap = np.asarray(lap, dtype=float)
    if lap.size == 0:
        return 0
    tol = ZERO_RTOL * np.linalg.norm(lap, np.inf)
    sv = np.linalg.svd(lap, compute_uv=False)
    return int(np.sum(sv <= tol))


def inject_fault(g: WeightedDigraph, removed: Iterable[Sequence[int]]) -> WeightedDigraph:
    """Return a copy of ``g`` without the listed ``(from, to)`` edges.

    Raises:
        UnknownEdge: if a listed edge is not present.
    """
    weights = dict(g.weights)
    for e in removed:
        key = (int(e[0]), int(e[1]))
        if key not in weights:
            raise UnknownEdge(f"edge {key[0]}->{key[1]} not in graph")
        del weights[key]
    return WeightedDigraph(g.n, weights)


def relabel(g: WeightedDigraph, mapping: Sequence[int]) -> WeightedDigraph:
    """Rename node ``v`` to ``mapping[v-1]`` (a permutation of ``1..n``)."""
    return WeightedDigraph(g.n, [(mapping[s - 1], mapping[d - 1], w) for s, d, w in g.edges])


# --------------------------------------------------------------------------
# I/O


def graph_from_dict(data: Mapping) -> WeightedDigraph:
    try:
        n = data["nodes"]
        edges = data.get("edges", [])
    except (KeyError, AttributeError, TypeError) as exc:
        raise InvalidGraph("graph must be an object with 'nodes' and 'edges'") from exc
    for e in edges:
        if not isinstance(e, (list, tuple)) or len(e) != 3:
            raise InvalidGraph(f"edge entries must be [from, to, weight], got {e!r}")
    return WeightedDigraph(n, edges)


def graph_from_csv(text: str, n: int | None = None) -> WeightedDigraph:
    """Parse a ``from,to,weight`` edge list; ``n`` defaults to the largest label."""
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["from", "to", "weight"]:
        raise InvalidGraph("CSV edge list needs the header from,to,weight")
    edges = []
    for row in reader:
        row = {k.strip(): v for k, v in row.items()}
        try:
            edges.append((int(row["from"]), int(row["to"]), float(row["weight"])))
        except (TypeError, ValueError) as exc:
            raise InvalidGraph(f"bad CSV row on line {reader.line_num}: {row}") from exc
    if n is None:
        n = max((max(s, d) for s, d, _ in edges), default=0)
    return WeightedDigraph(n, edges)


def load_graph(path: str | Path) -> WeightedDigraph:
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".csv":
        return graph_from_csv(text)
    return graph_from_dict(json.loads(text))


def condensation_dot(g: WeightedDigraph, name: str = "condensation") -> str:
    """DOT text for the condensation DAG; basic bicomponents are marked."""
    part = bicomponents(g)
    comp_of = part.component_of()
    lines = [f"digraph {name} {{"]
    for ci, (comp, basic) in enumerate(zip(part.components, part.basic)):
        label = ",".join(str(v) for v in comp)
        kind = "basic" if basic else "nonbasic"
        lines.append(f'  c{ci} [label="{{{label}}}", kind="{kind}"];')
    arcs = sorted({(comp_of[s], comp_of[d]) for s, d in g.weights if comp_of[s] != comp_of[d]})
    for a, b in arcs:
        lines.append(f"  c{a} -> c{b};")
    lines.append("}")
    return "\n".join(lines) + "\n"
