"""Numerical monodromy of linear systems by analytic continuation of Y' = A(x)Y.

Transfer matrices are computed with an adaptive high-order integrator along
piecewise paths (segments and circular arcs).  Generators are taken along
keyhole loops; the generator at infinity is integrated along a large clockwise
circle, so the cyclic relation is a genuine numerical check rather than a
definition.

Convention: continuing a fundamental matrix Y along a positively oriented
loop gamma sends Y to Y . M_gamma, and for concatenated paths
transfer(p1 then p2) = transfer(p2) @ transfer(p1).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import StepFloor
from .linear_systems import RationalSystem

__all__ = [
    "Segment",
    "Arc",
    "Path",
    "transfer_matrix",
    "MonodromyRep",
    "monodromy_rep",
    "CompareReport",
    "compare_reps",
]


@dataclass(frozen=True)
class Segment:
    start: complex
    end: complex

    def at(self, s: float) -> complex:
        return self.start + s * (self.end - self.start)

    def velocity(self, s: float) -> complex:
        return self.end - self.start

    def length(self) -> float:
        return abs(self.end - self.start)

    def min_distance(self, pts) -> float:
        # distance from a segment to each point, exact projection formula
        d = self.end - self.start
        out = np.inf
        for u in pts:
            if abs(d) == 0:
                out = min(out, abs(self.start - u))
                continue
            t = np.clip(((u - self.start) / d).real, 0.0, 1.0)
            out = min(out, abs(self.start + t * d - u))
        return out


@dataclass(frozen=True)
class Arc:
    center: complex
    radius: float
    phi_start: float
    phi_end: float  # radians; phi_end < phi_start gives clockwise traversal

    def at(self, s: float) -> complex:
        phi = self.phi_start + s * (self.phi_end - self.phi_start)
        return self.center + self.radius * np.exp(1j * phi)

    def velocity(self, s: float) -> complex:
        phi = self.phi_start + s * (self.phi_end - self.phi_start)
        return self.radius * 1j * (self.phi_end - self.phi_start) * np.exp(1j * phi)

    def length(self) -> float:
        return self.radius * abs(self.phi_end - self.phi_start)

    def min_distance(self, pts) -> float:
        out = np.inf
        for u in pts:
            r = abs(u - self.center)
            # conservative: nearest approach of the full circle
            out = min(out, abs(r - self.radius))
        return out


@dataclass(frozen=True)
class Path:
    pieces: tuple

    def length(self) -> float:
        return sum(p.length() for p in self.pieces)

    def min_distance(self, pts) -> float:
        return min(p.min_distance(pts) for p in self.pieces)

    def reversed(self) -> "Path":
        out = []
        for p in reversed(self.pieces):
            if isinstance(p, Segment):
                out.append(Segment(p.end, p.start))
            else:
                out.append(Arc(p.center, p.radius, p.phi_end, p.phi_start))
        return Path(tuple(out))


_STEP_FLOOR_FACTOR = 1e-14


def transfer_matrix(sys: RationalSystem, path: Path, tol: float = 1e-12) -> np.ndarray:
    """Y(end) Y(start)^{-1} along the path, by adaptive integration."""
    floor = _STEP_FLOOR_FACTOR * max(path.length(), 1.0)
    if path.min_distance(sys.points) <= 10 * floor:
        raise StepFloor("path passes too close to a singular point")
    m = sys.rank
    y = np.eye(m, dtype=complex)
    nfev = 0
    for piece in path.pieces:
        def rhs(s, flat):
            ymat = flat.reshape(m, m)
            return (piece.velocity(s) * (sys.evaluate(piece.at(s)) @ ymat)).ravel()

        sol = solve_ivp(
            rhs, (0.0, 1.0), y.ravel(), method="DOP853",
            rtol=tol, atol=tol, dense_output=False,
        )
        if not sol.success:
            raise StepFloor(f"integration failed on a path piece: {sol.message}")
        nfev += sol.nfev
        y = sol.y[:, -1].reshape(m, m)
    transfer_matrix.last_nfev = nfev  # lightweight integrator statistics
    return y


def _keyhole(base: complex, center: complex, radius: float) -> Path:
    direction = (base - center) / abs(base - center)
    entry = center + radius * direction
    phi = float(np.angle(direction))
    return Path(
        (
            Segment(base, entry),
            Arc(center, radius, phi, phi + 2 * np.pi),
            Segment(entry, base),
        )
    )


def _choose_base(points) -> complex:
    pts = np.asarray(points, dtype=complex)
    center = pts.mean()
    spread = max(1.0, float(np.max(np.abs(pts - center))))
    for k in range(24):
        phi = -np.pi / 2 + 0.61803398875 * k
        base = center + (4.0 * spread) * np.exp(1j * phi)
        angles = np.sort(np.angle(pts - base))
        if len(angles) > 1 and np.min(np.diff(angles)) < 0.05:
            continue
        ok = True
        for i, u in enumerate(pts):
            others = np.delete(pts, i)
            radius = _keyhole_radius(u, others)
            seg = Segment(base, u + radius * (base - u) / abs(base - u))
            for j, v in enumerate(pts):
                if j == i:
                    continue
                if seg.min_distance([v]) < 1.5 * _keyhole_radius(v, np.delete(pts, j)):
                    ok = False
        if ok:
            return complex(base)
    return complex(center + (4.0 * spread) * 1j)


def _keyhole_radius(point: complex, others) -> float:
    if len(others) == 0:
        return 0.1
    return float(min(abs(point - v) for v in others)) / 10.0


@dataclass(frozen=True)
class MonodromyRep:
    base: complex
    ordering: tuple  # finite singular points in loop order, then "inf"
    generators: tuple  # matrices aligned with ordering
    relation_defect: float
    tol: float
    stats: dict = field(default_factory=dict, compare=False)

    def generator(self, key) -> np.ndarray:
        return self.generators[self.ordering.index(key)]

    def to_json(self) -> str:
        payload = {
            "base": [self.base.real, self.base.imag],
            "ordering": ["inf" if o == "inf" else [o.real, o.imag] for o in self.ordering],
            "traces": [
                [complex(np.trace(g)).real, complex(np.trace(g)).imag] for g in self.generators
            ],
            "relation_defect": self.relation_defect,
            "tol": self.tol,
            "stats": self.stats,
        }
        return json.dumps(payload, indent=2, sort_keys=True)


def monodromy_rep(
    sys: RationalSystem,
    base: complex | None = None,
    tol: float = 1e-12,
    rep_tol: float = 1e-8,
) -> MonodromyRep:
    """Generators along keyhole loops plus an integrated generator at infinity.

    Finite points are looped in increasing angular order as seen from the base
    point; the loop at infinity is a large clockwise circle.  The product of
    all generators in loop order must return to the identity within rep_tol,
    which is reported as ``relation_defect``.
    """
    pts = list(sys.points)
    if base is None:
        base = _choose_base(pts)
    order = sorted(range(len(pts)), key=lambda i: np.angle(pts[i] - base))
    gens: list[np.ndarray] = []
    ordering: list = []
    nfev = 0
    for i in order:
        others = [p for j, p in enumerate(pts) if j != i]
        radius = _keyhole_radius(pts[i], others)
        loop = _keyhole(base, pts[i], radius)
        gens.append(transfer_matrix(sys, loop, tol=tol))
        nfev += getattr(transfer_matrix, "last_nfev", 0)
        ordering.append(pts[i])

    arr = np.asarray(pts, dtype=complex)
    big_radius = 2.5 * float(max(np.max(np.abs(arr)), abs(base))) + 1.0
    # connector from base radially outward (away from the origin), then clockwise around
    circle_phi = float(np.angle(base)) if abs(base) > 0 else 0.0
    entry = big_radius * np.exp(1j * circle_phi)
    loop_inf = Path(
        (
            Segment(base, entry),
            Arc(0.0, big_radius, circle_phi, circle_phi - 2 * np.pi),
            Segment(entry, base),
        )
    )
    m_inf = transfer_matrix(sys, loop_inf, tol=tol)
    nfev += getattr(transfer_matrix, "last_nfev", 0)
    gens.append(m_inf)
    ordering.append("inf")

    prod = np.eye(sys.rank, dtype=complex)
    for g in gens:
        prod = g @ prod  # loop order: transfer of the concatenation
    defect = float(np.linalg.norm(prod - np.eye(sys.rank)))
    return MonodromyRep(
        base=complex(base),
        ordering=tuple(ordering),
        generators=tuple(gens),
        relation_defect=defect,
        tol=tol,
        stats={"nfev": nfev},
    )


@dataclass(frozen=True)
class CompareReport:
    compatible: bool
    max_mismatch: float
    worst: str
    details: dict = field(compare=False, default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {
                "compatible": self.compatible,
                "max_mismatch": self.max_mismatch,
                "worst": self.worst,
                "details": self.details,
            },
            indent=2,
            sort_keys=True,
        )


def compare_reps(r1: MonodromyRep, r2: MonodromyRep, rep_tol: float = 1e-6) -> CompareReport:
    """Trace comparison of two representations with the same point ordering.

    Fundamental-solution bases differ by a constant matrix, so only conjugation
    invariants can be compared: traces of generators and of all pairwise
    products.  Verdict is compatible when every trace agrees within rep_tol.
    """
    k1 = ["inf" if o == "inf" else complex(o) for o in r1.ordering]
    k2 = ["inf" if o == "inf" else complex(o) for o in r2.ordering]
    if len(k1) != len(k2) or any(
        (a == "inf") != (b == "inf") or (a != "inf" and abs(a - b) > 1e-9)
        for a, b in zip(k1, k2)
    ):
        raise ValueError("representations must share the singular-point ordering")
    mism: dict[str, float] = {}
    n = len(r1.generators)
    for i in range(n):
        d = abs(np.trace(r1.generators[i]) - np.trace(r2.generators[i]))
        scale = max(1.0, abs(np.trace(r1.generators[i])))
        mism[f"tr(M{i})"] = float(d / scale)
    for i in range(n):
        for j in range(i, n):
            t1 = np.trace(r1.generators[i] @ r1.generators[j])
            t2 = np.trace(r2.generators[i] @ r2.generators[j])
            mism[f"tr(M{i}M{j})"] = float(abs(t1 - t2) / max(1.0, abs(t1)))
    worst = max(mism, key=mism.get)
    return CompareReport(
        compatible=mism[worst] <= rep_tol,
        max_mismatch=mism[worst],
        worst=worst,
        details=mism,
    )
