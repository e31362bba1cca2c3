"""Asymptotic predictions for networks without a directed spanning tree.

Every basic bicomponent synchronizes to a trajectory of the closed-loop
agent matrix started from a left-eigenvector average of its members'
initial states. Every remaining node converges to a fixed convex combination
of those trajectories, with weights ``beta = -L0^-1 L0i 1_i``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .errors import DimensionMismatch, InternalConsistency, NotSimpleZero, SingularL0
from .graph import LaplacianBlocks, zero_eigenvalue_multiplicity

RESIDUAL_TOL = 1e-9
CLAMP_TOL = 1e-10
NEGATIVE_FAIL = 1e-8
# reciprocal condition number of L0 below which it is treated as singular
RCOND_MIN = 1e-12


def _clamp_nonnegative(v: np.ndarray, what: str) -> np.ndarray:
    if v.size and v.min() < -NEGATIVE_FAIL:
        raise InternalConsistency(f"{what} has entry {v.min():.3e} < 0")
    v = v.copy()
    v[(v < 0) & (v >= -CLAMP_TOL)] = 0.0
    # entries in (-1e-8, -1e-10) are left as computed and surface in reports
    return v


def left_eigenvector(Li: np.ndarray) -> np.ndarray:
    """Nonnegative left null vector of a strongly connected Laplacian, summing to 1.

    Solves the stacked system ``[Li^T; 1^T] alpha = (0; 1)`` by least squares.

    Raises:
        NotSimpleZero: if the zero eigenvalue of ``Li`` is not simple.
    """
    Li = np.asarray(Li, dtype=float)
    m = Li.shape[0]
    if Li.shape != (m, m) or m == 0:
        raise DimensionMismatch(f"expected a nonempty square matrix, got shape {Li.shape}")
    mult = zero_eigenvalue_multiplicity(Li)
    if mult != 1:
        raise NotSimpleZero(f"zero eigenvalue has multiplicity {mult}")
    lhs = np.vstack([Li.T, np.ones((1, m))])
    rhs = np.zeros(m + 1)
    rhs[-1] = 1.0
    alpha, *_ = np.linalg.lstsq(lhs, rhs, rcond=None)
    resid = np.linalg.norm(lhs @ alpha - rhs, np.inf)
    if resid >= RESIDUAL_TOL * max(1.0, np.linalg.norm(Li, np.inf)):
        raise NotSimpleZero(f"left null vector residual {resid:.3e}")
    return _clamp_nonnegative(alpha, "left eigenvector")


@dataclass(frozen=True, eq=False)
class WeightMatrix:
    """Row ``j`` gives the weights of non-basic node ``nodes[j]`` over the
    basic bicomponents ``bicomponents``."""

    beta: np.ndarray
    nodes: tuple[int, ...]
    bicomponents: tuple[tuple[int, ...], ...]

    def row(self, node: int) -> np.ndarray:
        return self.beta[self.nodes.index(node)]

    def to_dict(self) -> dict:
        return {
            "nodes": list(self.nodes),
            "bicomponents": [list(c) for c in self.bicomponents],
            "beta": self.beta.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "WeightMatrix":
        comps = tuple(tuple(c) for c in data["bicomponents"])
        beta = np.asarray(data["beta"], dtype=float).reshape(len(data["nodes"]), len(comps))
        return cls(beta=beta, nodes=tuple(data["nodes"]), bicomponents=comps)


def _grounded_solve(blocks: LaplacianBlocks) -> np.ndarray:
    """Return ``-L0^-1 [L01 1_1, ..., L0k 1_k]`` using one LU factorization."""
    k0, k = blocks.k0, blocks.k
    if k0 == 0:
        return np.zeros((0, k))
    rhs = np.column_stack([b.sum(axis=1) for b in blocks.L0i]) if k else np.zeros((k0, 0))
    try:
        rcond = 1.0 / np.linalg.cond(blocks.L0, 1)
    except np.linalg.LinAlgError:
        rcond = 0.0
    if not rcond >= RCOND_MIN:
        raise SingularL0(f"grounded block has reciprocal condition {rcond:.3e}")
    lu_piv = la.lu_factor(blocks.L0, check_finite=False)
    return 0.0 - la.lu_solve(lu_piv, rhs, check_finite=False)  # avoid -0.0


def beta_weights(blocks: LaplacianBlocks) -> WeightMatrix:
    """Convex-combination weights of every non-basic node.

    Raises:
        SingularL0: if the grounded block cannot be inverted.
    """
    if blocks.k < 1:
        raise DimensionMismatch("graph has no basic bicomponent")
    beta = _clamp_nonnegative(_grounded_solve(blocks), "beta")
    return WeightMatrix(beta=beta, nodes=blocks.nonbasic_nodes, bicomponents=blocks.basic_components)


def _node_states(blocks: LaplacianBlocks, x0) -> np.ndarray:
    x0 = np.asarray(x0, dtype=float)
    if x0.ndim != 2 or x0.shape[0] != blocks.n:
        raise DimensionMismatch(f"expected initial states of shape ({blocks.n}, dim), got {x0.shape}")
    return x0


def sync_initial(blocks: LaplacianBlocks, i: int, x0) -> np.ndarray:
    """Initial condition of the synchronized trajectory of basic bicomponent ``i``.

    Args:
        blocks: decomposition of ``L`` (continuous) or ``I - D`` (discrete).
        i: 1-based index of the basic bicomponent.
        x0: array ``(N, n + n_c)``; row ``v-1`` is the stacked agent and
            protocol state of node ``v``.
    """
    if not 1 <= i <= blocks.k:
        raise DimensionMismatch(f"bicomponent index {i} outside 1..{blocks.k}")
    x0 = _node_states(blocks, x0)
    alpha = left_eigenvector(blocks.Li[i - 1])
    members = [v - 1 for v in blocks.basic_components[i - 1]]
    return alpha @ x0[members]


def sync_initials(blocks: LaplacianBlocks, x0) -> np.ndarray:
    """Stack :func:`sync_initial` for all basic bicomponents, shape ``(k, dim)``."""
    return np.vstack([sync_initial(blocks, i, x0) for i in range(1, blocks.k + 1)])


def predict_nonbasic(blocks: LaplacianBlocks, sync_states) -> np.ndarray:
    """Steady trajectory of the non-basic nodes given the synchronized states.

    ``sync_states`` has shape ``(k, dim)`` or ``(T, k, dim)``; the result has
    shape ``(k0, dim)`` or ``(T, k0, dim)`` with rows ordered as
    ``blocks.nonbasic_nodes``.
    """
    s = np.asarray(sync_states, dtype=float)
    if s.ndim not in (2, 3) or s.shape[-2] != blocks.k:
        raise DimensionMismatch(f"expected {blocks.k} synchronized states, got shape {s.shape}")
    coeff = _grounded_solve(blocks)
    return np.einsum("ji,...id->...jd", coeff, s)
