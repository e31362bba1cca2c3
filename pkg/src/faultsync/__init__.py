"""Fault-tolerance analysis of scale-free synchronization protocols.

Decompose a directed network into bicomponents, predict where every agent
ends up once the directed spanning tree is lost, and check the prediction
against a simulation of the closed loop.
"""

from .errors import (
    BoundViolation,
    DimensionMismatch,
    FaultSyncError,
    NonFinite,
    NotCertified,
    NotSimpleZero,
    ParseError,
    RankDeficient,
    SingularL0,
    UnknownEdge,
    ValidationError,
)
from .graph import (
    BicomponentPartition,
    LaplacianBlocks,
    RowStochasticConfig,
    WeightedDigraph,
    bicomponents,
    block_decomposition,
    condensation_dot,
    has_spanning_tree,
    in_degrees,
    inject_fault,
    laplacian,
    row_stochastic,
)
from .protocol import (
    AgentModel,
    CollaborativeProtocol,
    NonCollaborativeProtocol,
    TildeSystem,
    canonical_lambdas,
    certify_scale_free,
    check_agent_admissibility,
    closed_loop,
)
from .scenario import Scenario, load_fixture, load_scenario, parse_scenario, serialize
from .simulator import (
    NetworkSystem,
    SyncReport,
    TimeSeries,
    analyze,
    build_network,
    disagreement,
    estimate_weights,
    simulate,
)
from .sync import WeightMatrix, beta_weights, left_eigenvector, predict_nonbasic, sync_initial

__version__ = "0.1.0"

__all__ = [
    "AgentModel",
    "analyze",
    "beta_weights",
    "BicomponentPartition",
    "bicomponents",
    "block_decomposition",
    "BoundViolation",
    "build_network",
    "canonical_lambdas",
    "certify_scale_free",
    "check_agent_admissibility",
    "closed_loop",
    "CollaborativeProtocol",
    "condensation_dot",
    "DimensionMismatch",
    "disagreement",
    "estimate_weights",
    "FaultSyncError",
    "has_spanning_tree",
    "in_degrees",
    "inject_fault",
    "laplacian",
    "LaplacianBlocks",
    "left_eigenvector",
    "load_fixture",
    "load_scenario",
    "NetworkSystem",
    "NonCollaborativeProtocol",
    "NonFinite",
    "NotCertified",
    "NotSimpleZero",
    "parse_scenario",
    "ParseError",
    "predict_nonbasic",
    "RankDeficient",
    "row_stochastic",
    "RowStochasticConfig",
    "Scenario",
    "serialize",
    "simulate",
    "SingularL0",
    "sync_initial",
    "SyncReport",
    "TildeSystem",
    "TimeSeries",
    "UnknownEdge",
    "ValidationError",
    "WeightedDigraph",
    "WeightMatrix",
]
