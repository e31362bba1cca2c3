"""Agent and protocol models, closed-loop matrices, and stability certificates.

Agents are ``x+ = A x + B u, y = C x`` with ``x+`` the derivative
(continuous) or the next sample (discrete). A non-collaborative protocol

    xc+ = Ac xc + Bc zeta,    u = Fc xc + Gc zeta

sees only the relative output ``zeta``. A collaborative protocol also
receives ``zeta_hat``, the relative value of ``Hc xc`` over the same network:

    xc+ = Ac xc + Bc zeta + Ec zeta_hat,    u = Fc xc + Gc1 zeta + Gc2 zeta_hat
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Literal, Sequence

import numpy as np

from .errors import DimensionMismatch

TimeDomain = Literal["continuous", "discrete"]
TIME_DOMAINS = ("continuous", "discrete")

# decision margins: abscissa < -STABILITY_MARGIN, radius < 1 - STABILITY_MARGIN
STABILITY_MARGIN = 1e-9
# eigenvalues closer than this to the stability boundary count as on it
BOUNDARY_TOL = 1e-8
RANK_RTOL = 1e-9


def _mat(x, name: str, shape: tuple[int | None, int | None] = (None, None)) -> np.ndarray:
    m = np.array(x, dtype=float)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    if m.ndim != 2:
        raise DimensionMismatch(f"{name} must be a matrix, got {m.ndim} dimensions")
    for axis, want in enumerate(shape):
        if want is not None and m.shape[axis] != want:
            raise DimensionMismatch(f"{name} has shape {m.shape}, expected {shape}")
    m.setflags(write=False)
    return m


def _check_domain(time_domain: str) -> None:
    if time_domain not in TIME_DOMAINS:
        raise ValueError(f"time domain must be one of {TIME_DOMAINS}, got {time_domain!r}")


@dataclass(frozen=True, eq=False)
class AgentModel:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    time_domain: TimeDomain = "continuous"

    def __post_init__(self):
        _check_domain(self.time_domain)
        A = _mat(self.A, "A")
        if A.shape[0] != A.shape[1]:
            raise DimensionMismatch(f"A must be square, got {A.shape}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", _mat(self.B, "B", (A.shape[0], None)))
        object.__setattr__(self, "C", _mat(self.C, "C", (None, A.shape[0])))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]


def _protocol_mat(x, name, shape):
    if x is None or (np.size(x) == 0 and 0 in shape):
        return _mat(np.zeros(shape), name, shape)
    return _mat(x, name, shape)


@dataclass(frozen=True, eq=False)
class NonCollaborativeProtocol:
    """Dynamic output feedback on ``zeta``. ``n_c`` may be zero (static gain)."""

    Gc: np.ndarray
    Ac: np.ndarray | None = None
    Bc: np.ndarray | None = None
    Fc: np.ndarray | None = None

    collaborative = False

    def __post_init__(self):
        Gc = _mat(self.Gc, "Gc")
        m, p = Gc.shape
        nc = 0 if self.Ac is None or np.size(self.Ac) == 0 else np.shape(self.Ac)[0]
        object.__setattr__(self, "Gc", Gc)
        object.__setattr__(self, "Ac", _protocol_mat(self.Ac, "Ac", (nc, nc)))
        object.__setattr__(self, "Bc", _protocol_mat(self.Bc, "Bc", (nc, p)))
        object.__setattr__(self, "Fc", _protocol_mat(self.Fc, "Fc", (m, nc)))

    @property
    def nc(self) -> int:
        return self.Ac.shape[0]

    def check(self, agent: AgentModel) -> None:
        if self.Gc.shape != (agent.m, agent.p):
            raise DimensionMismatch(f"Gc has shape {self.Gc.shape}, agent needs {(agent.m, agent.p)}")

    def to_dict(self) -> dict:
        return {
            "type": "non-collaborative",
            "Ac": self.Ac.tolist(),
            "Bc": self.Bc.tolist(),
            "Fc": self.Fc.tolist(),
            "Gc": self.Gc.tolist(),
        }


@dataclass(frozen=True, eq=False)
class CollaborativeProtocol:
    Ac: np.ndarray
    Bc: np.ndarray
    Ec: np.ndarray
    Fc: np.ndarray
    Gc1: np.ndarray
    Gc2: np.ndarray
    Hc: np.ndarray

    collaborative = True

    def __post_init__(self):
        Ac = _mat(self.Ac, "Ac")
        nc = Ac.shape[0]
        if Ac.shape != (nc, nc) or nc == 0:
            raise DimensionMismatch(f"Ac must be nonempty and square, got {Ac.shape}")
        Hc = _mat(self.Hc, "Hc", (None, nc))
        Gc1 = _mat(self.Gc1, "Gc1")
        m, p = Gc1.shape
        object.__setattr__(self, "Ac", Ac)
        object.__setattr__(self, "Hc", Hc)
        object.__setattr__(self, "Gc1", Gc1)
        object.__setattr__(self, "Bc", _mat(self.Bc, "Bc", (nc, p)))
        object.__setattr__(self, "Ec", _mat(self.Ec, "Ec", (nc, Hc.shape[0])))
        object.__setattr__(self, "Fc", _mat(self.Fc, "Fc", (m, nc)))
        object.__setattr__(self, "Gc2", _mat(self.Gc2, "Gc2", (m, Hc.shape[0])))

    @property
    def nc(self) -> int:
        return self.Ac.shape[0]

    def check(self, agent: AgentModel) -> None:
        if self.Gc1.shape != (agent.m, agent.p):
            raise DimensionMismatch(f"Gc1 has shape {self.Gc1.shape}, agent needs {(agent.m, agent.p)}")

    def to_dict(self) -> dict:
        return {
            "type": "collaborative",
            **{k: getattr(self, k).tolist() for k in ("Ac", "Bc", "Ec", "Fc", "Gc1", "Gc2", "Hc")},
        }


ProtocolSpec = NonCollaborativeProtocol | CollaborativeProtocol


@dataclass(frozen=True, eq=False)
class TildeSystem:
    Atilde: np.ndarray
    Btilde: np.ndarray
    Ctilde: np.ndarray
    time_domain: TimeDomain
    collaborative: bool = False

    def __post_init__(self):
        _check_domain(self.time_domain)
        d = self.Atilde.shape[0]
        if self.Atilde.shape != (d, d) or (self.Btilde @ self.Ctilde).shape != (d, d):
            raise DimensionMismatch("inconsistent closed-loop matrices")

    @property
    def dim(self) -> int:
        return self.Atilde.shape[0]

    @property
    def BC(self) -> np.ndarray:
        return self.Btilde @ self.Ctilde

    def coupled(self, lam: complex) -> np.ndarray:
        """``A~ + lam B~C~`` (continuous) or ``A~ + (1 - lam) B~C~`` (discrete)."""
        gain = lam if self.time_domain == "continuous" else 1.0 - lam
        return self.Atilde + gain * self.BC


def closed_loop(agent: AgentModel, proto: ProtocolSpec) -> TildeSystem:
    """Assemble ``(A~, B~, C~)`` for one agent in feedback with its protocol."""
    proto.check(agent)
    A, B, C = agent.A, agent.B, agent.C
    n, nc = agent.n, proto.nc
    At = np.block([[A, B @ proto.Fc], [np.zeros((nc, n)), proto.Ac]])
    if proto.collaborative:
        Bt = np.block([[B @ proto.Gc1, B @ proto.Gc2], [proto.Bc, proto.Ec]])
        h = proto.Hc.shape[0]
        Ct = np.block([[C, np.zeros((agent.p, nc))], [np.zeros((h, n)), proto.Hc]])
    else:
        Bt = np.vstack([B @ proto.Gc, proto.Bc])
        Ct = np.hstack([C, np.zeros((agent.p, nc))])
    return TildeSystem(At, Bt, Ct, agent.time_domain, proto.collaborative)


# --------------------------------------------------------------------------
# agent admissibility


@dataclass
class AdmissibilityReport:
    mode: str
    time_domain: str
    poles: list[complex]
    asymptotically_stable: bool
    poles_in_closed_region: bool
    neutrally_stable: bool
    stabilizable: bool
    detectable: bool
    admissible: bool
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["poles"] = [[float(z.real), float(z.imag)] for z in self.poles]
        return d


def _boundary_distance(z: complex, time_domain: str) -> float:
    """Signed distance to the stability boundary (negative means stable side)."""
    return z.real if time_domain == "continuous" else abs(z) - 1.0


def _rank(m: np.ndarray) -> int:
    if m.size == 0:
        return 0
    sv = np.linalg.svd(m, compute_uv=False)
    return int(np.sum(sv > RANK_RTOL * max(1.0, sv[0])))


def _cluster(eigs: Sequence[complex], tol: float = 1e-6) -> list[tuple[complex, int]]:
    groups: list[list[complex]] = []
    for z in eigs:
        for g in groups:
            if abs(g[0] - z) < tol:
                g.append(z)
                break
        else:
            groups.append([z])
    return [(complex(np.mean(g)), len(g)) for g in groups]


def check_agent_admissibility(agent: AgentModel, mode: str = "non-collaborative") -> AdmissibilityReport:
    """Pole location, neutral stability, and PBH stabilizability/detectability.

    ``mode`` selects the solvability conditions: non-collaborative designs
    need an asymptotically stable agent or a stabilizable, detectable,
    neutrally stable one; collaborative designs relax neutral stability to
    all poles in the closed stability region. Zero-structure conditions
    (minimum phase, uniform rank) are not checked.
    """
    if mode not in ("non-collaborative", "collaborative"):
        raise ValueError(f"unknown mode {mode!r}")
    td = agent.time_domain
    A, n = agent.A, agent.n
    eigs = [complex(z) for z in np.linalg.eigvals(A)]
    dist = [_boundary_distance(z, td) for z in eigs]
    asym = all(d < -BOUNDARY_TOL for d in dist)
    closed = all(d <= BOUNDARY_TOL for d in dist)
    eye = np.eye(n)

    neutral = closed
    notes: list[str] = []
    for z, alg in _cluster(eigs):
        if abs(_boundary_distance(z, td)) <= BOUNDARY_TOL:
            geo = n - _rank(A - z * eye)
            if geo < alg:
                neutral = False
                notes.append(f"boundary eigenvalue {z:.6g} is not semisimple")

    stabilizable = detectable = True
    for z, _ in _cluster(eigs):
        if _boundary_distance(z, td) >= -BOUNDARY_TOL:
            if _rank(np.hstack([A - z * eye, agent.B])) < n:
                stabilizable = False
                notes.append(f"mode {z:.6g} is not controllable")
            if _rank(np.vstack([A - z * eye, agent.C])) < n:
                detectable = False
                notes.append(f"mode {z:.6g} is not observable")

    if asym:
        admissible = True
    elif mode == "non-collaborative":
        admissible = stabilizable and detectable and neutral
    else:
        admissible = stabilizable and detectable and closed
    if not closed:
        region = "closed left-half plane" if td == "continuous" else "closed unit disc"
        notes.append(f"poles outside the {region}")
    return AdmissibilityReport(
        mode=mode,
        time_domain=td,
        poles=sorted(eigs, key=lambda z: (round(z.real, 12), round(z.imag, 12))),
        asymptotically_stable=asym,
        poles_in_closed_region=closed,
        neutrally_stable=neutral,
        stabilizable=stabilizable,
        detectable=detectable,
        admissible=admissible,
        notes=notes,
    )


# --------------------------------------------------------------------------
# scale-free certification


@dataclass
class LambdaCheck:
    lam: complex
    measure: float
    stable: bool
    in_region: bool

    def to_dict(self) -> dict:
        return {
            "lambda": [float(self.lam.real), float(self.lam.imag)],
            "measure": float(self.measure),
            "stable": self.stable,
            "in_region": self.in_region,
        }


@dataclass
class CertificationReport:
    time_domain: str
    strict: bool
    measure: str
    entries: list[LambdaCheck]

    @property
    def checked(self) -> list[LambdaCheck]:
        return [e for e in self.entries if e.in_region]

    @property
    def passed(self) -> bool:
        return all(e.stable for e in self.checked)

    @property
    def worst(self) -> float | None:
        return max((e.measure for e in self.checked), default=None)

    def to_dict(self) -> dict:
        return {
            "time_domain": self.time_domain,
            "strict": self.strict,
            "measure": self.measure,
            "passed": self.passed,
            "worst": self.worst,
            "entries": [e.to_dict() for e in self.entries],
        }


def spectral_abscissa(m: np.ndarray) -> float:
    return float(np.max(np.linalg.eigvals(m).real)) if m.size else float("-inf")


def spectral_radius(m: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(m)))) if m.size else 0.0


def _in_region(lam: complex, time_domain: str, strict: bool) -> bool:
    if time_domain == "continuous":
        return lam.real > 0 if strict else lam.real >= 0
    return abs(lam) < 1 if strict else abs(lam) <= 1


def certify_scale_free(sys: TildeSystem, lambdas: Iterable[complex], strict: bool = True) -> CertificationReport:
    """Check ``A~ + lam B~C~`` Hurwitz (continuous) or ``A~ + (1-lam) B~C~`` Schur.

    Values of ``lam`` outside the required region (open right-half plane or
    open unit disc when ``strict``, their closures otherwise) are recorded
    but do not affect the verdict.
    """
    lambdas = [complex(z) for z in lambdas]
    if not lambdas:
        raise ValueError("need at least one lambda")
    entries = []
    for lam in lambdas:
        m = sys.coupled(lam)
        if sys.time_domain == "continuous":
            value = spectral_abscissa(m)
            stable = value < -STABILITY_MARGIN
        else:
            value = spectral_radius(m)
            stable = value < 1.0 - STABILITY_MARGIN
        entries.append(LambdaCheck(lam, value, stable, _in_region(lam, sys.time_domain, strict)))
    measure = "spectral_abscissa" if sys.time_domain == "continuous" else "spectral_radius"
    return CertificationReport(sys.time_domain, strict, measure, entries)


def canonical_lambdas(coupling: np.ndarray, time_domain: str, tol: float = 1e-9) -> list[complex]:
    """Network eigenvalues a protocol must handle.

    ``coupling`` is ``L`` (continuous: its nonzero eigenvalues) or ``D``
    (discrete: its eigenvalues in the closed unit disc, excluding 1).
    """
    eigs = np.linalg.eigvals(np.asarray(coupling, dtype=float)) if np.size(coupling) else []
    scale = max(1.0, float(np.linalg.norm(coupling, np.inf))) if np.size(coupling) else 1.0
    if time_domain == "continuous":
        out = [complex(z) for z in eigs if abs(z) > tol * scale]
    else:
        out = [complex(z) for z in eigs if abs(z - 1.0) > tol and abs(z) <= 1.0 + tol]
    return sorted(out, key=lambda z: (z.real, z.imag))


def halfplane_grid(re_min: float = 0.05, re_max: float = 50.0, im_max: float = 50.0, n_re: int = 20, n_im: int = 20) -> list[complex]:
    """Log-spaced grid over ``re_min <= Re <= re_max``, ``|Im| <= im_max``."""
    re = np.logspace(np.log10(re_min), np.log10(re_max), n_re)
    n_neg = n_im // 2
    n_pos = n_im - n_neg - 1
    im = np.concatenate([
        -np.logspace(-2, np.log10(im_max), n_neg)[::-1],
        [0.0],
        np.logspace(-2, np.log10(im_max), n_pos),
    ])
    return [complex(r, i) for r in re for i in im]


def disc_grid(n_radii: int = 10, n_angles: int = 10, r_max: float = 0.95) -> list[complex]:
    """Polar grid strictly inside the unit disc."""
    radii = np.linspace(r_max / n_radii, r_max, n_radii)
    angles = 2 * np.pi * np.arange(n_angles) / n_angles
    return [complex(r * np.cos(a), r * np.sin(a)) for r in radii for a in angles]
