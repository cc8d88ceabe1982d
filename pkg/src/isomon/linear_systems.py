"""Data model for linear ODE systems dY/dx = A(x)Y with rational coefficients.

Holds the system itself (:class:`RationalSystem`), its minimal factored
realization A(x) = Q(x-T)^{-1}P + S (:class:`FactoredSystem`), local normal
forms at singular points restricted to Poincare rank <= 1 (:class:`HtlForm`),
the resulting exponent tables (:class:`RiemannScheme`) and their multiplicity
patterns (handed to :mod:`isomon.spectral`).

Conventions
-----------
* the residue at infinity is implicit: A_inf^(0) = -sum_nu A_nu^(0);
* at infinity with a constant term C present, the local form in z = 1/x has
  leading matrix -C and residue A_inf^(0);
* complex numbers serialize as [re, im] pairs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import InvalidState, NotDiagonalizable, NotRealizable, Unsupported
from .linear_core import EigenData, as_cmatrix, eigen_sorted
from .spectral import SpectralType

__all__ = [
    "INFINITY",
    "RationalSystem",
    "FactoredSystem",
    "HtlForm",
    "PointScheme",
    "RiemannScheme",
    "realize_factored",
    "riemann_scheme",
    "spectral_type",
    "fuchs_check",
]

#: marker for the point at infinity in scheme displays
INFINITY = "inf"

_MIN_POINT_SEPARATION = 1e-12


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.flags.writeable = False
    return a


def _c2j(z: complex) -> list[float]:
    return [float(np.real(z)), float(np.imag(z))]


def _j2c(v) -> complex:
    return complex(v[0], v[1])


def _mat2j(m: np.ndarray) -> list:
    return [[_c2j(z) for z in row] for row in np.asarray(m, dtype=complex)]


def _j2mat(rows) -> np.ndarray:
    return np.array([[_j2c(v) for v in row] for row in rows], dtype=complex)


@dataclass(frozen=True)
class RationalSystem:
    """dY/dx = ( sum_nu sum_k A_nu^(k)/(x-u_nu)^{k+1} + sum_k A_inf^(k) x^{k-1} ) Y.

    ``finite`` maps positionally to ``points``: finite[i] is the tuple
    (A^(0), ..., A^(r)) at points[i].  ``infinity`` holds (A_inf^(1), ...).
    """

    points: tuple[complex, ...]
    finite: tuple[tuple[np.ndarray, ...], ...]
    infinity: tuple[np.ndarray, ...] = ()

    def __post_init__(self):
        if len(self.points) != len(self.finite):
            raise InvalidState("one coefficient tuple required per finite point")
        if not self.finite and not self.infinity:
            raise InvalidState("system needs at least one singular point")
        pts = tuple(complex(u) for u in self.points)
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                if abs(pts[i] - pts[j]) <= _MIN_POINT_SEPARATION:
                    raise InvalidState(f"singular points {pts[i]} and {pts[j]} coincide")
        m = None
        frozen_fin = []
        for coeffs in self.finite:
            if not coeffs:
                raise InvalidState("a finite point needs at least the residue matrix")
            mats = tuple(_freeze(as_cmatrix(a)) for a in coeffs)
            for a in mats:
                if a.shape[0] != a.shape[1]:
                    raise InvalidState("coefficient matrices must be square")
                if m is None:
                    m = a.shape[0]
                elif a.shape[0] != m:
                    raise InvalidState("all coefficient matrices must share one size")
            frozen_fin.append(mats)
        frozen_inf = tuple(_freeze(as_cmatrix(a)) for a in self.infinity)
        for a in frozen_inf:
            if m is None:
                m = a.shape[0]
            if a.shape != (m, m):
                raise InvalidState("all coefficient matrices must share one size")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "finite", tuple(frozen_fin))
        object.__setattr__(self, "infinity", frozen_inf)

    @property
    def rank(self) -> int:
        if self.finite:
            return self.finite[0][0].shape[0]
        return self.infinity[0].shape[0]

    @property
    def r_infinity(self) -> int:
        return len(self.infinity)

    def r_at(self, i: int) -> int:
        return len(self.finite[i]) - 1

    def residue_at_infinity(self) -> np.ndarray:
        m = self.rank
        acc = np.zeros((m, m), dtype=complex)
        for coeffs in self.finite:
            acc += coeffs[0]
        return -acc

    def evaluate(self, x: complex) -> np.ndarray:
        m = self.rank
        out = np.zeros((m, m), dtype=complex)
        for u, coeffs in zip(self.points, self.finite):
            for k, a in enumerate(coeffs):
                out += a / (x - u) ** (k + 1)
        for k, a in enumerate(self.infinity, start=1):
            out += a * x ** (k - 1)
        return out

    def is_fuchsian(self) -> bool:
        return self.r_infinity == 0 and all(len(c) == 1 for c in self.finite)

    def to_json(self) -> str:
        payload = {
            "rank": self.rank,
            "points": [_c2j(u) for u in self.points],
            "finite": [[_mat2j(a) for a in coeffs] for coeffs in self.finite],
            "infinity": [_mat2j(a) for a in self.infinity],
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RationalSystem":
        d = json.loads(text)
        return cls(
            points=tuple(_j2c(u) for u in d["points"]),
            finite=tuple(tuple(_j2mat(a) for a in coeffs) for coeffs in d["finite"]),
            infinity=tuple(_j2mat(a) for a in d.get("infinity", [])),
        )


def _blocks_from_diag(values, tol: float = 1e-9) -> tuple[tuple[complex, int], ...]:
    """Group equal consecutive diagonal values into (value, size) blocks."""
    blocks: list[tuple[complex, int]] = []
    for v in values:
        v = complex(v)
        if blocks and abs(blocks[-1][0] - v) <= tol:
            blocks[-1] = (blocks[-1][0], blocks[-1][1] + 1)
        else:
            blocks.append((v, 1))
    return tuple(blocks)


@dataclass(frozen=True)
class FactoredSystem:
    """A(x) = Q(x-T)^{-1}P + S with T, S stored as block-scalar diagonals.

    ``t_blocks`` and ``s_blocks`` are tuples of (value, size); distinct blocks
    carry distinct values.  Q is m x n, P is n x m where n = size of T and
    m = size of S = rank of the system.
    """

    t_blocks: tuple[tuple[complex, int], ...]
    q: np.ndarray
    p: np.ndarray
    s_blocks: tuple[tuple[complex, int], ...]

    def __post_init__(self):
        q = _freeze(as_cmatrix(self.q))
        p = _freeze(as_cmatrix(self.p))
        tb = tuple((complex(v), int(s)) for v, s in self.t_blocks)
        sb = tuple((complex(v), int(s)) for v, s in self.s_blocks)
        n = sum(s for _, s in tb)
        m = sum(s for _, s in sb)
        if q.shape != (m, n) or p.shape != (n, m):
            raise InvalidState(f"shape mismatch: Q {q.shape} vs {(m, n)}, P {p.shape} vs {(n, m)}")
        for blocks, label in ((tb, "T"), (sb, "S")):
            for i in range(len(blocks)):
                for j in range(i + 1, len(blocks)):
                    if abs(blocks[i][0] - blocks[j][0]) <= _MIN_POINT_SEPARATION:
                        raise InvalidState(f"{label} blocks must carry distinct values")
        object.__setattr__(self, "t_blocks", tb)
        object.__setattr__(self, "s_blocks", sb)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    @property
    def n(self) -> int:
        return sum(s for _, s in self.t_blocks)

    @property
    def m(self) -> int:
        return sum(s for _, s in self.s_blocks)

    def t_diag(self) -> np.ndarray:
        return np.concatenate([[v] * s for v, s in self.t_blocks]) if self.t_blocks else np.zeros(0, dtype=complex)

    def s_diag(self) -> np.ndarray:
        return np.concatenate([[v] * s for v, s in self.s_blocks]) if self.s_blocks else np.zeros(0, dtype=complex)

    def s_matrix(self) -> np.ndarray:
        return np.diag(self.s_diag())

    def t_matrix(self) -> np.ndarray:
        return np.diag(self.t_diag())

    def evaluate(self, x: complex) -> np.ndarray:
        td = self.t_diag()
        return (self.q / (x - td)[np.newaxis, :]) @ self.p + self.s_matrix()

    def t_block_slices(self) -> list[slice]:
        out, off = [], 0
        for _, s in self.t_blocks:
            out.append(slice(off, off + s))
            off += s
        return out

    def s_block_slices(self) -> list[slice]:
        out, off = [], 0
        for _, s in self.s_blocks:
            out.append(slice(off, off + s))
            off += s
        return out

    def to_rational(self) -> RationalSystem:
        """Expand into simple poles at the T-block values plus the constant S."""
        finite = []
        points = []
        for (v, _), sl in zip(self.t_blocks, self.t_block_slices()):
            points.append(v)
            finite.append((self.q[:, sl] @ self.p[sl, :],))
        s = self.s_matrix()
        infinity = () if np.allclose(s, 0.0, atol=0.0) else (s,)
        return RationalSystem(points=tuple(points), finite=tuple(finite), infinity=infinity)


def realize_factored(sys: RationalSystem, rank_tol: float = 1e-10) -> FactoredSystem:
    """Minimal factored realization of a system with simple finite poles.

    T is block-scalar with one block u_nu I of size rank(A_nu^(0)) per finite
    point, and Q_nu P_nu is a rank factorization of the residue there.  A
    constant term at infinity becomes S (diagonalized if necessary by a global
    constant gauge).  Higher-order poles are not realizable with diagonal T.
    """
    if sys.r_infinity > 1:
        raise NotRealizable("the polynomial part at infinity must be a constant")
    if any(sys.r_at(i) > 0 for i in range(len(sys.points))):
        raise NotRealizable("finite poles must be simple for a diagonal-T realization")
    m = sys.rank
    residues = [np.array(c[0]) for c in sys.finite]
    if sys.r_infinity == 1:
        s_mat = np.array(sys.infinity[0])
        if not np.allclose(s_mat, np.diag(np.diag(s_mat)), atol=1e-13 * max(1.0, np.linalg.norm(s_mat))):
            ed = eigen_sorted(s_mat, require_diagonalizable=True)
            g = np.concatenate([c.vectors for c in ed.clusters], axis=1)
            ginv = np.linalg.inv(g)
            residues = [ginv @ r @ g for r in residues]
            s_diag = np.concatenate([[c.value] * c.multiplicity for c in ed.clusters])
        else:
            s_diag = np.diag(s_mat)
        s_blocks = _blocks_from_diag(s_diag)
        if len(set(np.round(np.asarray([v for v, _ in s_blocks]), 9))) != len(s_blocks):
            raise NotRealizable("constant term at infinity has interleaved equal eigenvalues")
    else:
        s_blocks = ((0.0 + 0.0j, m),)

    t_blocks: list[tuple[complex, int]] = []
    q_cols: list[np.ndarray] = []
    p_rows: list[np.ndarray] = []
    for u, a in zip(sys.points, residues):
        uu, sv, vh = np.linalg.svd(a)
        cutoff = rank_tol * max(sv[0], 1.0) if sv.size else 0.0
        r = int(np.sum(sv > cutoff))
        if r == 0:
            continue
        root = np.sqrt(sv[:r])
        q_cols.append(uu[:, :r] * root[np.newaxis, :])
        p_rows.append(vh[:r, :] * root[:, np.newaxis])
        t_blocks.append((u, r))
    if not t_blocks:
        raise NotRealizable("system has no nonzero residues")
    q = np.concatenate(q_cols, axis=1)
    p = np.concatenate(p_rows, axis=0)
    return FactoredSystem(t_blocks=tuple(t_blocks), q=q, p=p, s_blocks=s_blocks)


@dataclass(frozen=True)
class HtlForm:
    """Local normal form T_0/z^{l_0} + ... + Theta/z with integer levels only.

    Stage matrices and the residue are stored as diagonals (1-d arrays);
    non-integer levels (ramified points) are rejected.
    """

    levels: tuple[int, ...]
    stages: tuple[np.ndarray, ...]
    residue: np.ndarray

    def __post_init__(self):
        levels = tuple(self.levels)
        for l in levels:
            if float(l) != int(l):
                raise Unsupported("ramified (non-integer) levels are not supported")
        levels = tuple(int(l) for l in levels)
        if list(levels) != sorted(levels, reverse=True) or (levels and levels[-1] != 1):
            raise InvalidState("levels must decrease strictly to 1")
        if len(levels) != len(self.stages) + 1:
            raise InvalidState("need one stage matrix per level above 1")

        def _as_diag(a) -> np.ndarray:
            a = np.asarray(a, dtype=complex)
            if a.ndim == 2:
                if not np.array_equal(a, np.diag(np.diag(a))):
                    raise InvalidState("stage matrices must be diagonal")
                a = np.diag(a)
            return _freeze(a)

        stages = tuple(_as_diag(s) for s in self.stages)
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "stages", stages)
        object.__setattr__(self, "residue", _as_diag(self.residue))

    @property
    def poincare_rank(self) -> int:
        return self.levels[0] - 1 if self.levels else 0


@dataclass(frozen=True)
class PointScheme:
    """One column group of a Riemann scheme.

    ``location`` is a complex number or the marker :data:`INFINITY`.  For a
    Fuchsian point ``leading`` is None and ``exponents`` lists the residue
    eigenvalues; for a Poincare-rank-1 point ``leading`` carries the stage
    eigenvalues, aligned row by row with ``exponents``.
    """

    location: object
    exponents: tuple[complex, ...]
    leading: tuple[complex, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "exponents", tuple(complex(t) for t in self.exponents))
        if self.leading is not None:
            lead = tuple(complex(t) for t in self.leading)
            if len(lead) != len(self.exponents):
                raise InvalidState("leading column must align with the exponent column")
            object.__setattr__(self, "leading", lead)

    @property
    def is_irregular(self) -> bool:
        return self.leading is not None


@dataclass(frozen=True)
class RiemannScheme:
    """Table of local exponent data at every singular point."""

    points: tuple[PointScheme, ...]

    def __post_init__(self):
        pts = tuple(self.points)
        if not pts:
            raise InvalidState("empty scheme")
        m = len(pts[0].exponents)
        if any(len(p.exponents) != m for p in pts):
            raise InvalidState("all scheme columns must have the system rank length")
        object.__setattr__(self, "points", pts)

    @property
    def rank(self) -> int:
        return len(self.points[0].exponents)

    def exponent_sum(self) -> complex:
        return sum(sum(p.exponents) for p in self.points)

    def non_resonant(self, tol: float = 1e-9) -> bool:
        """No two exponents within one leading block differ by a nonzero integer."""
        for p in self.points:
            groups: dict[int, list[complex]] = {}
            if p.leading is None:
                groups[0] = list(p.exponents)
            else:
                # group rows by leading value
                reps: list[complex] = []
                for lead, th in zip(p.leading, p.exponents):
                    for k, r in enumerate(reps):
                        if abs(r - lead) <= 1e-9:
                            groups[k].append(th)
                            break
                    else:
                        reps.append(lead)
                        groups[len(reps) - 1] = [th]
            for exps in groups.values():
                for i in range(len(exps)):
                    for j in range(i + 1, len(exps)):
                        d = exps[i] - exps[j]
                        nearest = round(d.real)
                        if nearest != 0 and abs(d - nearest) <= tol:
                            return False
        return True

    def to_json(self) -> str:
        payload = []
        for p in self.points:
            entry = {
                "location": "inf" if p.location == INFINITY else _c2j(p.location),
                "exponents": [_c2j(t) for t in p.exponents],
            }
            if p.leading is not None:
                entry["leading"] = [_c2j(t) for t in p.leading]
            payload.append(entry)
        return json.dumps({"points": payload}, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RiemannScheme":
        d = json.loads(text)
        pts = []
        for entry in d["points"]:
            loc = INFINITY if entry["location"] == "inf" else _j2c(entry["location"])
            pts.append(
                PointScheme(
                    location=loc,
                    exponents=tuple(_j2c(t) for t in entry["exponents"]),
                    leading=tuple(_j2c(t) for t in entry["leading"]) if "leading" in entry else None,
                )
            )
        return cls(points=tuple(pts))


def _sorted_eigendata(ed: EigenData) -> list[complex]:
    out: list[complex] = []
    for c in ed.clusters:
        out.extend([c.value] * c.multiplicity)
    return out


def _rank1_point_columns(leading: np.ndarray, residue: np.ndarray, tol_eig: float):
    """Two-column display of a rank-1 irregular point.

    Diagonalizes the leading matrix, conjugates the residue, then uses the
    block-diagonal stabilizer of the leading matrix to diagonalize each
    diagonal block of the residue.  Off-diagonal residue blocks carry no
    exponent data and are discarded.
    """
    ed = eigen_sorted(leading, tol_eig=tol_eig, require_diagonalizable=True)
    g_cols = [c.vectors for c in ed.clusters]
    g = np.concatenate(g_cols, axis=1)
    res = np.linalg.inv(g) @ residue @ g
    lead_col: list[complex] = []
    theta_col: list[complex] = []
    off = 0
    for c in ed.clusters:
        blk = res[off : off + c.multiplicity, off : off + c.multiplicity]
        bd = eigen_sorted(blk, tol_eig=tol_eig, require_diagonalizable=True)
        for v, mult in bd.pairs:
            lead_col.extend([c.value] * mult)
            theta_col.extend([v] * mult)
        off += c.multiplicity
    return tuple(lead_col), tuple(theta_col)


def riemann_scheme(sys: RationalSystem, tol_eig: float = 1e-9) -> RiemannScheme:
    """Exponent table of a system with at most one Poincare-rank-1 point.

    Fuchsian points contribute their sorted residue eigenvalues.  The rank-1
    point (finite or at infinity) contributes the two-column display obtained
    through the stabilizer reduction of its residue.
    """
    irregular = [i for i in range(len(sys.points)) if sys.r_at(i) >= 1]
    if sys.r_infinity >= 1:
        irregular.append(-1)
    if len(irregular) > 1:
        raise Unsupported("at most one irregular point is supported")
    if any(sys.r_at(i) > 1 for i in range(len(sys.points))) or sys.r_infinity > 1:
        raise Unsupported("only Poincare rank <= 1 is supported")

    cols: list[PointScheme] = []
    for i, (u, coeffs) in enumerate(zip(sys.points, sys.finite)):
        if len(coeffs) == 1:
            ed = eigen_sorted(coeffs[0], tol_eig=tol_eig, require_diagonalizable=True)
            cols.append(PointScheme(location=u, exponents=tuple(_sorted_eigendata(ed))))
        else:
            lead, theta = _rank1_point_columns(coeffs[1], coeffs[0], tol_eig)
            cols.append(PointScheme(location=u, exponents=theta, leading=lead))
    a_inf0 = sys.residue_at_infinity()
    if sys.r_infinity == 1:
        # in z = 1/x the leading matrix is -A_inf^(1) and the residue is A_inf^(0)
        lead, theta = _rank1_point_columns(-sys.infinity[0], a_inf0, tol_eig)
        cols.append(PointScheme(location=INFINITY, exponents=theta, leading=lead))
    elif np.max(np.abs(a_inf0)) > 1e-12 * max(1.0, max(np.max(np.abs(c[0])) for c in sys.finite)):
        ed = eigen_sorted(a_inf0, tol_eig=tol_eig, require_diagonalizable=True)
        cols.append(PointScheme(location=INFINITY, exponents=tuple(_sorted_eigendata(ed))))
    # a vanishing residue means infinity is a regular point: no column
    return RiemannScheme(points=tuple(cols))


def _partition_of(values, tol: float) -> tuple[int, ...]:
    mults: list[int] = []
    used = [False] * len(values)
    for i, v in enumerate(values):
        if used[i]:
            continue
        c = 0
        for j in range(i, len(values)):
            if not used[j] and abs(values[j] - v) <= tol:
                used[j] = True
                c += 1
        mults.append(c)
    return tuple(sorted(mults, reverse=True))


def spectral_type(scheme: RiemannScheme, tol: float = 1e-9) -> SpectralType:
    """Multiplicity pattern of a Riemann scheme, in canonical order."""
    point_types = []
    for p in scheme.points:
        if p.leading is None:
            point_types.append(_partition_of(p.exponents, tol))
        else:
            blocks: list[tuple[complex, list[complex]]] = []
            for lead, th in zip(p.leading, p.exponents):
                for r, bucket in blocks:
                    if abs(r - lead) <= tol:
                        bucket.append(th)
                        break
                else:
                    blocks.append((lead, [th]))
            inners = tuple(_partition_of(bucket, tol) for _, bucket in blocks)
            point_types.append(inners)
    return SpectralType.from_points(point_types)


def fuchs_check(obj) -> float:
    """Residual of the trace identity: |sum of all scheme exponents|.

    Accepts a :class:`RationalSystem` (its scheme, including the implicit
    point at infinity, is computed first) or a :class:`RiemannScheme` as
    constructed, which may deliberately omit points.
    """
    if isinstance(obj, RationalSystem):
        scheme = riemann_scheme(obj)
    elif isinstance(obj, RiemannScheme):
        scheme = obj
    else:
        raise TypeError("fuchs_check expects a RationalSystem or a RiemannScheme")
    return abs(scheme.exponent_sum())
