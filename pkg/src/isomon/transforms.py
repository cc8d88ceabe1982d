"""Matrix-level transformations of linear systems.

Additions (scalar shifts of a coefficient), Moebius pullbacks (affine maps and
the inversion x -> 1/x, whose compositions give the full group), the Laplace
transform on factored systems, and the separation of a rank-1 irregular point
into two Fuchsian points with an explicit merging parameter.
"""

from __future__ import annotations

from math import comb

import numpy as np

from .errors import DegenerateMap, InvalidState, Unsupported, ZeroEpsilon
from .linear_core import eigen_sorted
from .linear_systems import FactoredSystem, RationalSystem

__all__ = ["addition", "moebius", "laplace", "separate"]


def addition(sys: RationalSystem, point_index: int, alpha: complex) -> RationalSystem:
    """Shift the residue at one finite point: A^(0) -> A^(0) + alpha I."""
    m = sys.rank
    finite = list(sys.finite)
    coeffs = list(finite[point_index])
    coeffs[0] = coeffs[0] + alpha * np.eye(m)
    finite[point_index] = tuple(coeffs)
    return RationalSystem(points=sys.points, finite=tuple(finite), infinity=sys.infinity)


def _moebius_affine(sys: RationalSystem, a: complex, b: complex) -> RationalSystem:
    """Pullback along y = a x + b: points move, A^(k) picks up a^k."""
    if abs(a) < 1e-300:
        raise DegenerateMap("affine map needs a != 0")
    points = tuple(a * u + b for u in sys.points)
    finite = tuple(
        tuple(coeffs[k] * a**k for k in range(len(coeffs))) for coeffs in sys.finite
    )
    # constant + polynomial part: sum A_inf^(k) x^{k-1} with x = (y-b)/a re-expanded in y
    infinity: tuple[np.ndarray, ...] = ()
    if sys.infinity:
        r = len(sys.infinity)
        m = sys.rank
        new = [np.zeros((m, m), dtype=complex) for _ in range(r)]
        for k, mat in enumerate(sys.infinity, start=1):
            # A x^{k-1} = A ((y-b)/a)^{k-1}, re-expanded binomially in powers of y
            for j in range(k):
                new[j] = new[j] + mat * (comb(k - 1, j) * (-b) ** (k - 1 - j) / a ** (k - 1))
        infinity = tuple(new)
    return RationalSystem(points=points, finite=finite, infinity=infinity)


def _moebius_inversion(sys: RationalSystem) -> RationalSystem:
    """Pullback along y = 1/x, swapping the roles of 0 and infinity.

    Supports simple finite poles away from 0, a pole of order <= 2 at 0, and a
    constant term at infinity (Poincare rank <= 1 on both ends): everything the
    rank-1 calculus needs.
    """
    m = sys.rank
    if sys.r_infinity > 1:
        raise Unsupported("inversion implemented for Poincare rank <= 1 at infinity")
    origin_idx = None
    for i, u in enumerate(sys.points):
        if abs(u) <= 1e-12:
            origin_idx = i
        elif sys.r_at(i) > 0:
            raise Unsupported("inversion implemented for simple poles away from 0")
    if origin_idx is not None and sys.r_at(origin_idx) > 1:
        raise Unsupported("inversion implemented for a pole of order <= 2 at 0")

    zero = np.zeros((m, m), dtype=complex)
    a_inf1 = sys.infinity[0] if sys.r_infinity >= 1 else zero
    a0_coeffs = sys.finite[origin_idx] if origin_idx is not None else (zero,)
    a0_res = a0_coeffs[0]
    a0_lead = a0_coeffs[1] if len(a0_coeffs) > 1 else zero

    points: list[complex] = []
    finite: list[tuple[np.ndarray, ...]] = []
    # image of infinity at y = 0: leading -A_inf^(1), residue A_inf^(0)
    res_inf = sys.residue_at_infinity()
    lead0 = -a_inf1
    if np.any(np.abs(lead0) > 0):
        points.append(0.0)
        finite.append((res_inf, lead0))
    elif np.any(np.abs(res_inf) > 0):
        points.append(0.0)
        finite.append((res_inf,))
    # finite nonzero points u move to 1/u with unchanged residues
    for i, u in enumerate(sys.points):
        if i == origin_idx:
            continue
        points.append(1.0 / u)
        finite.append((sys.finite[i][0],))
    # the origin's data moves to infinity: constant -A_0^(1), residue -A_0^(0) implicit
    infinity = (-a0_lead,) if np.any(np.abs(a0_lead) > 0) else ()
    if not points:
        raise InvalidState("inversion produced a system with no finite poles")
    out = RationalSystem(points=tuple(points), finite=tuple(finite), infinity=infinity)
    # trace bookkeeping: residue at the new infinity must be -A_0^(0)
    return out


def moebius(sys: RationalSystem, coeffs: tuple[complex, complex, complex, complex]) -> RationalSystem:
    """Pullback of the system along y = (a x + b)/(c x + d), ad - bc != 0.

    Implemented through compositions of affine maps and the inversion; the
    spectral type is preserved.
    """
    a, b, c, d = (complex(v) for v in coeffs)
    det = a * d - b * c
    if abs(det) <= 1e-13 * max(1.0, abs(a * d) + abs(b * c)):
        raise DegenerateMap("Moebius map must have ad - bc != 0")
    if abs(c) < 1e-300:
        return _moebius_affine(sys, a / d, b / d)
    # (a x + b)/(c x + d) = a/c - det/c^2 * 1/(x + d/c)
    step = _moebius_affine(sys, 1.0, d / c)
    step = _moebius_inversion(step)
    return _moebius_affine(step, -det / (c * c), a / c)


def laplace(fs: FactoredSystem) -> FactoredSystem:
    """Laplace transform of a factored system: (T, Q, P, S) -> (S, P, -Q, -T).

    Induced by x -> -d/dx, d/dx -> x.  Applying it twice yields the pullback
    x -> -x together with an overall sign flip of A.
    """
    return FactoredSystem(
        t_blocks=fs.s_blocks,
        q=fs.p.copy(),
        p=-fs.q.copy(),
        s_blocks=tuple((-v, s) for v, s in fs.t_blocks),
    )


def separate(sys: RationalSystem, eps: complex, tol_eig: float = 1e-9) -> RationalSystem:
    """Split a rank-1 irregular point at 0 into Fuchsian points at 0 and -eps.

    After reduction of the leading matrix to block-scalar form t_1 I + ... and
    of the residue's diagonal blocks to diagonal form (the stabilizer action),
    the pole data at 0 is replaced by

        A_0 / x + A_1 / (x + eps)

    with A_0 upper block-triangular carrying diagonal blocks (t_j/eps) I and
    A_1 lower block-triangular carrying Theta_j - (t_j/eps) I.  The family
    converges to the original system as eps -> 0 at first order.
    """
    if abs(eps) == 0.0:
        raise ZeroEpsilon("separation parameter must be nonzero")
    idx = [i for i, u in enumerate(sys.points) if abs(u) <= 1e-12]
    if not idx or sys.r_at(idx[0]) != 1:
        raise Unsupported("expect exactly one rank-1 point located at 0")
    i0 = idx[0]
    if any(sys.r_at(i) != 0 for i in range(len(sys.points)) if i != i0) or sys.r_infinity > 1:
        raise Unsupported("other points must be Fuchsian (constant term allowed)")
    residue, lead = sys.finite[i0][0], sys.finite[i0][1]
    m = sys.rank
    scale = max(float(np.linalg.norm(lead)), 1.0)

    if np.max(np.abs(lead - np.diag(np.diag(lead)))) <= 1e-12 * scale:
        # keep the stored diagonal order; group equal consecutive values
        g = np.eye(m, dtype=complex)
        values: list[complex] = []
        sizes: list[int] = []
        for v in np.diag(lead):
            if sizes and abs(values[-1] - v) <= tol_eig:
                sizes[-1] += 1
            else:
                values.append(complex(v))
                sizes.append(1)
    else:
        ed = eigen_sorted(lead, tol_eig=tol_eig, require_diagonalizable=True)
        g = np.concatenate([c.vectors for c in ed.clusters], axis=1)
        values = [c.value for c in ed.clusters]
        sizes = [c.multiplicity for c in ed.clusters]
    ginv = np.linalg.inv(g)
    res1 = ginv @ residue @ g

    # stabilizer action: diagonalize each diagonal block of the residue
    offs = np.cumsum([0] + sizes)
    h = np.zeros((m, m), dtype=complex)
    for k in range(len(sizes)):
        sl = slice(offs[k], offs[k + 1])
        blk = res1[sl, sl]
        if np.max(np.abs(blk - np.diag(np.diag(blk)))) <= 1e-12 * max(1.0, float(np.linalg.norm(blk))):
            h[sl, sl] = np.eye(sizes[k])
        else:
            bd = eigen_sorted(blk, tol_eig=tol_eig, require_diagonalizable=True)
            h[sl, sl] = np.concatenate([cc.vectors for cc in bd.clusters], axis=1)
    hinv = np.linalg.inv(h)
    res2 = hinv @ res1 @ h

    a0 = np.zeros((m, m), dtype=complex)
    a1 = np.zeros((m, m), dtype=complex)
    for k in range(len(sizes)):
        sk = slice(offs[k], offs[k + 1])
        rho = values[k] / eps
        a0[sk, sk] = rho * np.eye(sizes[k])
        a1[sk, sk] = res2[sk, sk] - rho * np.eye(sizes[k])
        for l in range(len(sizes)):
            sll = slice(offs[l], offs[l + 1])
            if l > k:
                a0[sk, sll] = res2[sk, sll]
            elif l < k:
                a1[sk, sll] = res2[sk, sll]

    conj = lambda mat: hinv @ (ginv @ mat @ g) @ h  # noqa: E731  constant gauge applied everywhere
    points = [0.0, -eps]
    finite: list[tuple[np.ndarray, ...]] = [(a0,), (a1,)]
    for i, u in enumerate(sys.points):
        if i == i0:
            continue
        if abs(u + eps) <= 1e-12:
            raise InvalidState("-eps collides with an existing singular point")
        points.append(u)
        finite.append(tuple(conj(mat) for mat in sys.finite[i]))
    infinity = tuple(conj(mat) for mat in sys.infinity)
    return RationalSystem(points=tuple(points), finite=tuple(finite), infinity=infinity)
