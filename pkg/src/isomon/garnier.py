"""Discrete two-variable Garnier dynamics.

The phase-space point is a :class:`GarnierState`.  From it the module builds

* the rank-2 Fuchsian system with five singular points 0, 1, t1, t2, infinity
  in factored form Q(x-T)^{-1}P (:func:`build_garnier_2x2`),
* its Laplace/Moebius image with one rank-1 irregular point,
* the separated 4x4 Fuchsian pair A_0/x + A_1/(x+eps) with upper/lower
  triangular residues (:func:`build_fuchsian_211`),

and implements the two exponent-shift transformations S1, S2 on that pair:
the triangular re-gauge of the shifted residues (:func:`lu_gauge`), the
weight-vector kernel equation, and the recovery of the new canonical
coordinates from designated matrix entries (:func:`schlesinger_step`).  An
independently constructed rank-one multiplier (:func:`schlesinger_oracle`)
provides the cross-check path.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    DivideByZero,
    InvalidState,
    KernelDimension,
    NoSolution,
    PoleAtCoincidence,
    SpectralCollision,
    ZeroEpsilon,
)
from .linear_core import Normalization, eig_vector, left_eig_vector, lu_decompose
from .linear_systems import FactoredSystem, RationalSystem

__all__ = [
    "GarnierState",
    "TriangularPair",
    "build_garnier_2x2",
    "hatted_product",
    "product_pq",
    "build_fuchsian_211",
    "lu_gauge",
    "StepResult",
    "schlesinger_step",
    "schlesinger_step_detailed",
    "schlesinger_oracle",
    "retriangularize",
    "coordinates_from_product",
    "coordinates_from_factored",
    "pair_stabilizer_nullity",
    "garnier_hamiltonians",
    "random_state",
]

_FUCHS_TOL = 1e-12


@dataclass(frozen=True)
class GarnierState:
    """Canonical coordinates, gauge weights and parameters of the discrete flow.

    theta_inf1 is never stored: it is recomputed from the trace identity
    theta0 + theta1 + theta_t1 + theta_t2 + theta_inf1 + theta_inf2 = 0.
    """

    q1: complex
    p1: complex
    q2: complex
    p2: complex
    w: tuple[complex, complex, complex, complex]
    u: complex
    theta0: complex
    theta1: complex
    theta_t1: complex
    theta_t2: complex
    theta_inf2: complex
    t1: complex
    t2: complex
    eps: complex

    def __post_init__(self):
        for name in ("q1", "p1", "q2", "p2", "u", "theta0", "theta1", "theta_t1",
                     "theta_t2", "theta_inf2", "t1", "t2", "eps"):
            object.__setattr__(self, name, complex(getattr(self, name)))
        object.__setattr__(self, "w", tuple(complex(x) for x in self.w))
        if len(self.w) != 4 or any(abs(x) == 0 for x in self.w):
            raise InvalidState("w must be four nonzero gauge weights")
        if abs(self.u) == 0:
            raise InvalidState("u must be nonzero")
        if abs(self.eps) == 0:
            raise ZeroEpsilon("eps must be nonzero")
        for t in (self.t1, self.t2):
            if min(abs(t), abs(t - 1)) < 1e-12:
                raise InvalidState("t1, t2 must avoid 0 and 1")
        if abs(self.t1 - self.t2) < 1e-12:
            raise InvalidState("t1 and t2 must be distinct")

    # -- derived exponents ---------------------------------------------------

    @property
    def theta_inf1(self) -> complex:
        return -(self.theta0 + self.theta1 + self.theta_t1 + self.theta_t2 + self.theta_inf2)

    @property
    def rho_t1(self) -> complex:
        return self.t1 / self.eps

    @property
    def rho_t2(self) -> complex:
        return self.t2 / self.eps

    @property
    def rho_1(self) -> complex:
        return 1.0 / self.eps

    @property
    def sigma(self) -> tuple[complex, complex, complex, complex]:
        return (
            self.theta_t1 - self.rho_t1,
            self.theta_t2 - self.rho_t2,
            self.theta1 - self.rho_1,
            self.theta0,
        )

    def fuchs_residual(self) -> float:
        return abs(
            self.theta0 + self.theta1 + self.theta_t1 + self.theta_t2
            + self.theta_inf1 + self.theta_inf2
        )

    # -- serialization --------------------------------------------------------

    def to_json(self) -> str:
        c = lambda z: [z.real, z.imag]  # noqa: E731
        payload = {
            "q1": c(self.q1), "p1": c(self.p1), "q2": c(self.q2), "p2": c(self.p2),
            "w": [c(x) for x in self.w],
            "u": c(self.u),
            "theta0": c(self.theta0), "theta1": c(self.theta1),
            "theta_t1": c(self.theta_t1), "theta_t2": c(self.theta_t2),
            "theta_inf2": c(self.theta_inf2),
            "t1": c(self.t1), "t2": c(self.t2),
            "eps": c(self.eps),
            "derived": {  # informational only; ignored on input
                "theta_inf1": c(self.theta_inf1),
                "rho_t1": c(self.rho_t1), "rho_t2": c(self.rho_t2), "rho_1": c(self.rho_1),
                "sigma": [c(s) for s in self.sigma],
            },
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "GarnierState":
        d = json.loads(text)
        z = lambda v: complex(v[0], v[1])  # noqa: E731
        return cls(
            q1=z(d["q1"]), p1=z(d["p1"]), q2=z(d["q2"]), p2=z(d["p2"]),
            w=tuple(z(x) for x in d["w"]), u=z(d["u"]),
            theta0=z(d["theta0"]), theta1=z(d["theta1"]),
            theta_t1=z(d["theta_t1"]), theta_t2=z(d["theta_t2"]),
            theta_inf2=z(d["theta_inf2"]),
            t1=z(d["t1"]), t2=z(d["t2"]), eps=z(d["eps"]),
        )


def random_state(seed: int = 0, eps: complex | None = None, profile: str = "generic") -> GarnierState:
    """A generic admissible state, deterministic in the seed.

    The "tame" profile keeps coordinate amplitudes and imaginary parts small,
    which keeps the monodromy generators well conditioned (residue matrices
    close to normal); use it for analytic-continuation tests.
    """
    rng = np.random.default_rng(seed)
    if profile == "tame":
        if eps is None:
            eps = 1.7 + 0.23j

        def c(lo=0.25, hi=0.5):
            return rng.uniform(lo, hi) * (1 if rng.random() < 0.5 else -1) + 0.06j * rng.standard_normal()

        return GarnierState(
            q1=c(0.25, 0.45), p1=c(0.25, 0.45), q2=c(0.25, 0.45), p2=c(0.25, 0.45),
            w=tuple(1.0 + 0.2 * rng.standard_normal() + 0.05j * rng.standard_normal() for _ in range(4)),
            u=1.0 + 0.2 * rng.standard_normal(),
            theta0=c(), theta1=c(), theta_t1=c(), theta_t2=c(), theta_inf2=c(),
            t1=1.65 + 0.2 * rng.standard_normal() + 0.05j * rng.standard_normal(),
            t2=-1.35 + 0.2 * rng.standard_normal() + 0.05j * rng.standard_normal(),
            eps=eps,
        )
    if profile != "generic":
        raise ValueError(f"unknown profile {profile!r}")
    if eps is None:
        eps = 0.5 + 0.05j

    def c(lo=0.3, hi=1.4):
        return rng.uniform(lo, hi) * (1 if rng.random() < 0.5 else -1) + 0.15j * rng.standard_normal()

    t1 = 1.6 + 0.35 * rng.standard_normal() + 0.1j * rng.standard_normal()
    t2 = -1.3 + 0.35 * rng.standard_normal() + 0.1j * rng.standard_normal()
    return GarnierState(
        q1=c(), p1=c(), q2=c(), p2=c(),
        w=(c(0.5, 1.5), c(0.5, 1.5), c(0.5, 1.5), c(0.5, 1.5)),
        u=c(0.5, 1.5),
        theta0=c(0.2, 0.6), theta1=c(0.2, 0.6),
        theta_t1=c(0.2, 0.6), theta_t2=c(0.2, 0.6), theta_inf2=c(0.2, 0.6),
        t1=t1, t2=t2, eps=eps,
    )


# ---------------------------------------------------------------------------
# parametrized systems
# ---------------------------------------------------------------------------


def _hatted_qp(s: GarnierState) -> tuple[np.ndarray, np.ndarray]:
    qh = np.array(
        [
            [1, 1, 1, 1],
            [s.t1 * s.p1, s.t2 * s.p2, s.p1 * s.q1 + s.p2 * s.q2 - s.theta_inf2, 0],
        ],
        dtype=complex,
    )
    ph = np.array(
        [
            [s.theta_t1 + s.p1 * s.q1, -s.q1 / s.t1],
            [s.theta_t2 + s.p2 * s.q2, -s.q2 / s.t2],
            [s.theta1 + s.theta_inf2 - s.p1 * s.q1 - s.p2 * s.q2, 1],
            [s.theta0, s.q1 / s.t1 + s.q2 / s.t2 - 1],
        ],
        dtype=complex,
    )
    return qh, ph


def build_garnier_2x2(s: GarnierState) -> FactoredSystem:
    """The rank-2 five-point system Q(x-T)^{-1}P with T = diag(t1, t2, 1, 0)."""
    qh, ph = _hatted_qp(s)
    w = np.asarray(s.w, dtype=complex)
    u_inv = np.diag([1.0, 1.0 / s.u]).astype(complex)
    u_mat = np.diag([1.0, s.u]).astype(complex)
    q = u_inv @ qh @ np.diag(w)
    p = np.diag(1.0 / w) @ ph @ u_mat
    return FactoredSystem(
        t_blocks=((s.t1, 1), (s.t2, 1), (1.0 + 0j, 1), (0.0 + 0j, 1)),
        q=q,
        p=p,
        s_blocks=((0.0 + 0j, 2),),
    )


def hatted_product(s: GarnierState) -> np.ndarray:
    """The 4x4 product in the weight gauge; PQ = W^{-1} (this) W."""
    qh, ph = _hatted_qp(s)
    return ph @ qh


def product_pq(s: GarnierState) -> np.ndarray:
    w = np.asarray(s.w, dtype=complex)
    return np.diag(1.0 / w) @ hatted_product(s) @ np.diag(w)


@dataclass(frozen=True)
class TriangularPair:
    """Residue pair (A_0 upper, A_1 lower) of the separated 4x4 system."""

    a0: np.ndarray
    a1: np.ndarray
    eps: complex

    def __post_init__(self):
        a0 = np.asarray(self.a0, dtype=complex)
        a1 = np.asarray(self.a1, dtype=complex)
        if a0.shape != a1.shape or a0.shape[0] != a0.shape[1]:
            raise InvalidState("pair must consist of equal square matrices")
        scale = max(np.linalg.norm(a0), np.linalg.norm(a1), 1.0)
        if np.max(np.abs(np.tril(a0, -1))) > 1e-10 * scale:
            raise InvalidState("A_0 must be upper triangular")
        if np.max(np.abs(np.triu(a1, 1))) > 1e-10 * scale:
            raise InvalidState("A_1 must be lower triangular")
        object.__setattr__(self, "a0", np.triu(a0))
        object.__setattr__(self, "a1", np.tril(a1))
        object.__setattr__(self, "eps", complex(self.eps))

    def system(self) -> RationalSystem:
        return RationalSystem(
            points=(0.0, -self.eps), finite=((self.a0,), (self.a1,)), infinity=()
        )

    def product(self) -> np.ndarray:
        return self.a0 + self.a1


def build_fuchsian_211(s: GarnierState) -> TriangularPair:
    """Separated Fuchsian pair: A_0/x + A_1/(x+eps) merging back to the rank-1 system.

    A_0 is the upper triangle of PQ with diagonal (t1/eps, t2/eps, 1/eps, 0);
    A_1 is the strict lower triangle with diagonal (theta^{t_j} - t_j/eps,
    theta^1 - 1/eps, theta^0).  Their sum is PQ.
    """
    pq = product_pq(s)
    rho = np.array([s.rho_t1, s.rho_t2, s.rho_1, 0.0], dtype=complex)
    sig = np.array(s.sigma, dtype=complex)
    a0 = np.triu(pq, 1) + np.diag(rho)
    a1 = np.tril(pq, -1) + np.diag(sig)
    return TriangularPair(a0=a0, a1=a1, eps=s.eps)


# ---------------------------------------------------------------------------
# triangular re-gauge
# ---------------------------------------------------------------------------


def lu_gauge(
    lam: complex,
    b: np.ndarray,
    bmat: np.ndarray,
    mu: complex,
    c: np.ndarray,
    cmat: np.ndarray,
    normalization: Normalization = Normalization.UNIT_DIAGONAL_U,
    spectral_tol: float = 1e-12,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gauge G that re-triangularizes the bordered pair

        A_0 = [[lam, 0], [b, B]] (B upper),   A_1 = [[mu, c^t], [0, C]] (C lower).

    Returns (G, G A_0 G^{-1}, G A_1 G^{-1}) using the explicit block formulas;
    the conjugates are upper resp. lower triangular with diagonals
    (lam, diag B) and (mu, diag C).
    """
    b = np.asarray(b, dtype=complex).reshape(-1)
    c = np.asarray(c, dtype=complex).reshape(-1)
    bmat = np.asarray(bmat, dtype=complex)
    cmat = np.asarray(cmat, dtype=complex)
    k = b.size
    scale = max(abs(lam), abs(mu), np.linalg.norm(bmat), np.linalg.norm(cmat), 1.0)
    if min(abs(lam - d) for d in np.diag(bmat)) <= spectral_tol * scale:
        raise SpectralCollision("lam lies in the spectrum of B")
    if min(abs(mu - d) for d in np.diag(cmat)) <= spectral_tol * scale:
        raise SpectralCollision("mu lies in the spectrum of C")

    lam_b_inv_b = np.linalg.solve(lam * np.eye(k) - bmat, b)
    c_mu_c_inv = np.linalg.solve((mu * np.eye(k) - cmat).T, c)  # row vector c^t (mu-C)^{-1}
    ident = np.eye(k, dtype=complex)

    x = np.zeros((k + 1, k + 1), dtype=complex)
    x[0, 0] = 1.0 + c_mu_c_inv @ lam_b_inv_b
    x[0, 1:] = c_mu_c_inv
    x[1:, 0] = lam_b_inv_b
    x[1:, 1:] = ident
    fac = lu_decompose(x, normalization)
    l1 = fac.L[0, 0]
    u1 = fac.U[0, 0]
    l22 = fac.L[1:, 1:]
    u22 = fac.U[1:, 1:]

    g = np.zeros((k + 1, k + 1), dtype=complex)
    g[0, 0] = 1.0 / l1
    g[0, 1:] = c_mu_c_inv / l1
    g[1:, 0] = -u22 @ lam_b_inv_b
    g[1:, 1:] = u22

    a0bar = np.zeros_like(g)
    a0bar[0, 0] = lam
    a0bar[0, 1:] = -(1.0 / l1) * np.linalg.solve(u22.T, (c_mu_c_inv @ (lam * ident - bmat)))
    a0bar[1:, 1:] = np.triu(u22 @ bmat @ np.linalg.inv(u22))

    a1bar = np.zeros_like(g)
    a1bar[0, 0] = mu
    a1bar[1:, 0] = -(1.0 / u1) * np.linalg.solve(l22, (mu * ident - cmat) @ lam_b_inv_b)
    a1bar[1:, 1:] = np.tril(np.linalg.solve(l22, cmat @ l22))
    return g, a0bar, a1bar


# ---------------------------------------------------------------------------
# coordinate extraction from a transformed product
# ---------------------------------------------------------------------------


def _solve_weight_kernel(mmat: np.ndarray, theta_inf1: complex, tol: float = 1e-8) -> np.ndarray:
    """Solve (theta_inf1 + M^t) w = 0; the kernel must be one-dimensional.

    Rank is judged by the singular-value gap, not a bare threshold: badly
    scaled weight gauges (small merging parameter) legitimately compress the
    second-smallest singular value without creating a second kernel vector.
    """
    k = theta_inf1 * np.eye(4) + mmat.T
    u, sv, vh = np.linalg.svd(k)
    scale = max(sv[0], 1.0)
    if sv[-1] > tol * scale:
        raise KernelDimension(
            f"weight kernel is trivial (smallest singular value {sv[-1]:.2e})"
        )
    if sv[-2] <= tol * scale and sv[-2] < 1e6 * sv[-1]:
        raise KernelDimension(
            f"weight kernel has dimension >= 2 (singular values {sv})"
        )
    return vh[-1].conj()


def coordinates_from_product(
    mmat: np.ndarray,
    theta0: complex,
    theta_t1: complex,
    theta_t2: complex,
    theta_inf1: complex,
    t1_new: complex,
    t2_new: complex,
    tol: float = 1e-8,
) -> tuple[complex, complex, complex, complex, tuple[complex, ...]]:
    """Read (q1, p1, q2, p2) and the weights off a transformed product matrix.

    ``mmat`` is the target value of the new product PQ.  The weights solve the
    kernel equation; the coordinates come from the (1,4), (2,4), (3,1), (3,2)
    entries.  Division by a vanishing p_j or weight component signals a
    non-generic orbit point.
    """
    wbar = _solve_weight_kernel(mmat, theta_inf1, tol=tol)
    if abs(wbar[3]) < 1e-12 * np.max(np.abs(wbar)):
        raise DivideByZero("weight w_4 vanished; cannot normalize the section")
    wbar = wbar / wbar[3]
    if np.min(np.abs(wbar)) < 1e-12 * np.max(np.abs(wbar)):
        raise DivideByZero("a weight component vanished")
    w1, w2, w3, _ = wbar
    p1q1 = w1 * mmat[0, 3] - theta_t1
    p2q2 = w2 * mmat[1, 3] - theta_t2
    tail = w1 * mmat[0, 3] + w2 * mmat[1, 3] + theta0 + theta_inf1
    p1 = ((w3 / w1) * mmat[2, 0] + tail) / t1_new
    p2 = ((w3 / w2) * mmat[2, 1] + tail) / t2_new
    if min(abs(p1), abs(p2)) < 1e-13 * max(abs(p1q1), abs(p2q2), 1.0):
        raise DivideByZero("p coordinate vanished after the step")
    return p1q1 / p1, p1, p2q2 / p2, p2, tuple(wbar)


# ---------------------------------------------------------------------------
# the discrete steps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StepResult:
    state: GarnierState
    direction: str
    m_matrix: np.ndarray
    a0bar: np.ndarray
    a1bar: np.ndarray
    kernel_residual: float
    consistency_residual: float
    triangularity_residual: float


def _step_s1(s: GarnierState, normalization: Normalization) -> StepResult:
    pqh = hatted_product(s)
    sig = s.sigma
    bhat = pqh[1:, 0].copy()
    chat = pqh[0, 1:].copy()
    bmat = np.triu(pqh[1:, 1:], 1) + np.diag([s.rho_t2, s.rho_1, 0.0])
    cmat = np.tril(pqh[1:, 1:], -1) + np.diag([sig[1], sig[2], sig[3]])
    lam = s.rho_t1 + 1.0
    mu = sig[0] - 1.0
    ghat, a0bar, a1bar = lu_gauge(lam, bhat, bmat, mu, chat, cmat, normalization)
    mmat = ghat @ pqh @ np.linalg.inv(ghat)
    new_t1 = s.t1 + s.eps
    q1, p1, q2, p2, wbar = coordinates_from_product(
        mmat, s.theta0, s.theta_t1, s.theta_t2, s.theta_inf1, new_t1, s.t2
    )
    new = replace(s, q1=q1, p1=p1, q2=q2, p2=p2, w=wbar, t1=new_t1)
    return _finish_step(new, "s1", mmat, a0bar, a1bar)


def _two_pole_residues(f, eps: complex, sample_scale: float, check_tol: float = 1e-8):
    """Residues (at 0 and -eps) of a matrix function known to be R_0/x + R_1/(x+eps).

    Three samples: two to solve, one to verify the assumed pole structure.
    """
    xs = np.array([1.31 + 0.57j, -0.83 + 1.12j, 0.44 - 1.27j]) * sample_scale
    vals = [f(x) for x in xs]
    a = np.array([[1.0 / xs[0], 1.0 / (xs[0] + eps)], [1.0 / xs[1], 1.0 / (xs[1] + eps)]])
    coef = np.linalg.solve(a, np.stack([vals[0].ravel(), vals[1].ravel()]))
    r0 = coef[0].reshape(vals[0].shape)
    r1 = coef[1].reshape(vals[0].shape)
    recon = r0 / xs[2] + r1 / (xs[2] + eps)
    scale = max(np.linalg.norm(vals[2]), 1.0)
    if np.linalg.norm(recon - vals[2]) > check_tol * scale:
        raise NoSolution("transformed system is not of the expected two-pole form")
    return r0, r1


def _step_s2(s: GarnierState, normalization: Normalization) -> StepResult:
    pq = product_pq(s)
    sig = s.sigma
    rho = (s.rho_t1, s.rho_t2, s.rho_1, 0.0)
    a0 = np.triu(pq, 1) + np.diag(rho)
    a1 = np.tril(pq, -1) + np.diag(sig)

    k2 = np.array([[rho[0] - rho[1], pq[0, 1]], [-pq[1, 0], sig[0] - sig[1]]], dtype=complex)
    if abs(np.linalg.det(k2)) < 1e-12 * max(1.0, np.linalg.norm(k2) ** 2):
        raise SpectralCollision("pre-multiplier block is singular at this state")
    kfull = np.eye(4, dtype=complex)
    kfull[:2, :2] = k2
    kinv = np.linalg.inv(kfull)
    eps = s.eps

    def r20(x):
        d = np.ones(4, dtype=complex)
        d[1] = x / (x + eps)
        return d[:, None] * kfull

    def r20_prime(x):
        d = np.zeros(4, dtype=complex)
        d[1] = eps / (x + eps) ** 2
        return d[:, None] * kfull

    def transformed(x):
        ax = a0 / x + a1 / (x + eps)
        r = r20(x)
        rinv = np.linalg.inv(r)
        return r @ ax @ rinv + r20_prime(x) @ rinv

    scale = max(abs(eps), abs(s.t1), abs(s.t2), 1.0)
    atil0, atil1 = _two_pole_residues(transformed, eps, 2.0 * scale)

    w = np.asarray(s.w, dtype=complex)
    g0 = np.diag(w) @ atil0 @ np.diag(1.0 / w)
    g1 = np.diag(w) @ atil1 @ np.diag(1.0 / w)
    # structural sanity of the pre-transformed pair
    struct = max(
        abs(g0[1, 0]), np.max(np.abs(g0[1, 2:])), np.max(np.abs(g0[2:, 0])),
        np.max(np.abs(g1[0, 1:])), np.max(np.abs(g1[2:, 1])),
        abs(g0[1, 1] - (rho[1] + 1.0)), abs(g1[1, 1] - (sig[1] - 1.0)),
    )
    nrm = max(np.linalg.norm(g0), np.linalg.norm(g1), 1.0)
    if struct > 1e-8 * nrm:
        raise NoSolution(f"pre-multiplier did not reach the bordered shape (defect {struct:.2e})")

    bhat = g0[2:, 1].copy()
    bmat = np.triu(g0[2:, 2:])
    chat = g1[1, 2:].copy()
    cmat = np.tril(g1[2:, 2:])
    lam = rho[1] + 1.0
    mu = sig[1] - 1.0
    ghat2, sub0, sub1 = lu_gauge(lam, bhat, bmat, mu, chat, cmat, normalization)
    gfull = np.eye(4, dtype=complex)
    gfull[1:, 1:] = ghat2
    gfull_inv = np.linalg.inv(gfull)
    a0bar = gfull @ g0 @ gfull_inv
    a1bar = gfull @ g1 @ gfull_inv
    mmat = a0bar + a1bar
    new_t2 = s.t2 + s.eps
    q1, p1, q2, p2, wbar = coordinates_from_product(
        mmat, s.theta0, s.theta_t1, s.theta_t2, s.theta_inf1, s.t1, new_t2
    )
    new = replace(s, q1=q1, p1=p1, q2=q2, p2=p2, w=wbar, t2=new_t2)
    return _finish_step(new, "s2", mmat, a0bar, a1bar)


def _finish_step(new: GarnierState, direction: str, mmat, a0bar, a1bar) -> StepResult:
    nrm = max(np.linalg.norm(mmat), 1.0)
    kernel_res = float(
        np.linalg.norm((new.theta_inf1 * np.eye(4) + mmat.T) @ np.asarray(new.w)) / nrm
    )
    rebuilt = product_pq(new)
    consistency = float(np.linalg.norm(rebuilt - mmat) / nrm)
    tri = float(
        max(np.max(np.abs(np.tril(a0bar, -1))), np.max(np.abs(np.triu(a1bar, 1)))) / nrm
    )
    return StepResult(
        state=new,
        direction=direction,
        m_matrix=mmat,
        a0bar=a0bar,
        a1bar=a1bar,
        kernel_residual=kernel_res,
        consistency_residual=consistency,
        triangularity_residual=tri,
    )


def schlesinger_step_detailed(
    s: GarnierState,
    direction: str,
    normalization: Normalization = Normalization.UNIT_DIAGONAL_U,
) -> StepResult:
    """One discrete step with diagnostics; direction is "s1" or "s2".

    S1 shifts (t1/eps, sigma_1) by (+1, -1) and moves t1 -> t1 + eps; S2 acts
    symmetrically on the second slot.  The returned residuals certify the
    kernel equation, the re-built product PQ against the transformed one, and
    the triangularity of the transformed pair.
    """
    d = direction.lower()
    if d == "s1":
        return _step_s1(s, normalization)
    if d == "s2":
        return _step_s2(s, normalization)
    raise ValueError(f"unknown direction {direction!r}")


def schlesinger_step(
    s: GarnierState,
    direction: str,
    normalization: Normalization = Normalization.UNIT_DIAGONAL_U,
) -> GarnierState:
    return schlesinger_step_detailed(s, direction, normalization).state


# ---------------------------------------------------------------------------
# independent multiplier construction
# ---------------------------------------------------------------------------


def schlesinger_oracle(
    sys: RationalSystem,
    shift_up: complex | None,
    shift_down: complex | None,
    tol: float = 1e-8,
) -> RationalSystem:
    """Generic rank-one multiplier moving one exponent at 0 up and one at -eps down.

    ``shift_up`` selects the eigenvalue of the residue at 0 to increment;
    ``shift_down`` the eigenvalue of the residue at the second point to
    decrement (both must be simple).  With both None the identity multiplier
    is returned.  The multiplier is

        R(x) = I - eps N/(x + eps),    N = v s^t / (s^t v),

    built from the corresponding right eigenvector v at 0 and left eigenvector
    s at -eps; its determinant vanishes only at 0, so the transform is again
    Fuchsian with the same singular points and the designated exponents
    shifted by +1 and -1.
    """
    if len(sys.points) != 2 or abs(sys.points[0]) > 1e-12:
        raise InvalidState("oracle expects a system with points 0 and -eps")
    if not sys.is_fuchsian():
        raise InvalidState("oracle expects a Fuchsian system")
    eps = -sys.points[1]
    a0 = np.array(sys.finite[0][0])
    a1 = np.array(sys.finite[1][0])
    if shift_up is None and shift_down is None:
        return sys
    if shift_up is None or shift_down is None:
        raise NoSolution("only paired (+1, -1) shifts preserve the trace identity")
    v = eig_vector(a0, shift_up, tol=tol)
    srow = left_eig_vector(a1, shift_down, tol=tol)
    denom = srow @ v
    if abs(denom) < 1e-10:
        raise NoSolution("eigenvector pairing degenerate: s^t v ~ 0")
    nmat = np.outer(v, srow) / denom

    def transformed(x):
        r = np.eye(4, dtype=complex) - eps * nmat / (x + eps)
        rinv = np.linalg.inv(r)
        rprime = eps * nmat / (x + eps) ** 2
        ax = a0 / x + a1 / (x + eps)
        return r @ ax @ rinv + rprime @ rinv

    scale = max(abs(eps), float(np.linalg.norm(a0)) / 4.0, 1.0)
    r0, r1 = _two_pole_residues(transformed, eps, 2.0 * scale)
    return RationalSystem(points=(0.0, -eps), finite=((r0,), (r1,)), infinity=())


def retriangularize(a0, a1, diag0, diag1, tol: float = 1e-8) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Constant gauge C making C a0 C^{-1} upper and C a1 C^{-1} lower.

    ``diag0`` and ``diag1`` prescribe the diagonal orders.  Returns
    (C, C a0 C^{-1}, C a1 C^{-1}); C is unique up to the diagonal torus.
    """
    a0 = np.asarray(a0, dtype=complex)
    a1 = np.asarray(a1, dtype=complex)
    n = a0.shape[0]
    v0 = np.stack([eig_vector(a0, d, tol=tol) for d in diag0], axis=1)
    v1 = np.stack([eig_vector(a1, d, tol=tol) for d in diag1], axis=1)
    m0 = np.linalg.solve(v0, v1)
    # upper U with U m0 lower triangular: row i uses columns i..n-1 of U
    umat = np.zeros((n, n), dtype=complex)
    for i in range(n):
        block = m0[i:, i + 1 :]  # conditions: (U m0)[i, j] = 0 for j > i
        if block.shape[1] == 0:
            umat[i, i:] = 1.0
            continue
        _, _, vh = np.linalg.svd(block.T)
        umat[i, i:] = vh[-1].conj()
    cmat = umat @ np.linalg.inv(v0)
    b0 = cmat @ a0 @ np.linalg.inv(cmat)
    b1 = cmat @ a1 @ np.linalg.inv(cmat)
    scale = max(np.linalg.norm(b0), np.linalg.norm(b1), 1.0)
    defect = max(np.max(np.abs(np.tril(b0, -1))), np.max(np.abs(np.triu(b1, 1))))
    if defect > 1e-8 * scale:
        raise NoSolution(f"triangular re-gauge failed (defect {defect:.2e})")
    return cmat, np.triu(b0), np.tril(b1)


def pair_stabilizer_nullity(a0, a1, rtol: float = 1e-7) -> int:
    """Dimension of the space of infinitesimal gauges preserving the pair shape.

    Builds the linear system: strictly-lower([d, A0]) = 0 and
    strictly-upper([d, A1]) = 0 on a 4x4 unknown d.  Rigidity means the
    nullity equals the matrix size (the diagonal torus).
    """
    a0 = np.asarray(a0, dtype=complex)
    a1 = np.asarray(a1, dtype=complex)
    n = a0.shape[0]
    rows = []
    for i in range(n):
        for j in range(n):
            e = np.zeros((n, n), dtype=complex)
            e[i, j] = 1.0
            comm0 = e @ a0 - a0 @ e
            comm1 = e @ a1 - a1 @ e
            rows.append(
                np.concatenate(
                    [comm0[np.tril_indices(n, -1)], comm1[np.triu_indices(n, 1)]]
                )
            )
    mat = np.stack(rows, axis=1)  # constraints x unknowns
    sv = np.linalg.svd(mat, compute_uv=False)
    rank = int(np.sum(sv > rtol * max(sv[0], 1.0)))
    return n * n - rank


# ---------------------------------------------------------------------------
# slice inversion: coordinates from a factored five-point system
# ---------------------------------------------------------------------------


def coordinates_from_factored(
    fs: FactoredSystem,
    theta_inf1: complex,
    eps: complex = 1.0,
    tol: float = 1e-8,
) -> GarnierState:
    """Invert the parametrization: read a state off a factored 2x2 system.

    The input must have T-blocks (t1, 1), (t2, 1), (1, 1), (0, 1) in that
    order and S = 0.  The gauge is moved onto the parametrization slice
    (product QP lower triangular with diagonal (-theta_inf1, -theta_inf2),
    vanishing (2,4) entry of the normalized Q), after which weights,
    coordinates and the 2x2 gauge parameter are read off entries.  The
    coordinates (q, p) do not depend on the input gauge.
    """
    tb = fs.t_blocks
    if fs.m != 2 or len(tb) != 4 or any(s != 1 for _, s in tb):
        raise InvalidState("expected a rank-2 system with four simple T-blocks")
    if abs(tb[2][0] - 1.0) > 1e-9 or abs(tb[3][0]) > 1e-9:
        raise InvalidState("T-blocks must be ordered (t1, t2, 1, 0)")
    t1v, t2v = tb[0][0], tb[1][0]
    q, p = np.array(fs.q), np.array(fs.p)
    qp = q @ p
    theta_inf2 = -np.trace(qp) - theta_inf1
    v = np.stack(
        [eig_vector(qp, -theta_inf1, tol=tol), eig_vector(qp, -theta_inf2, tol=tol)],
        axis=1,
    )
    g0 = np.linalg.inv(v)
    a_top = (g0 @ q)[0, 3]
    b_bot = (g0 @ q)[1, 3]
    if abs(a_top) < 1e-12 * max(1.0, np.linalg.norm(g0 @ q)):
        raise DivideByZero("gauge normalization degenerate: (1,4) entry vanished")
    h = np.array([[1.0, 0.0], [-b_bot, a_top]], dtype=complex)
    g = h @ g0
    ginv = np.linalg.inv(g)
    qn, pn = g @ q, p @ ginv
    w = qn[0, :].copy()
    if np.min(np.abs(w)) < 1e-12 * np.max(np.abs(w)):
        raise DivideByZero("a weight vanished during slice inversion")
    u = w[2] * pn[2, 1]
    p1 = u * qn[1, 0] / (w[0] * t1v)
    p2 = u * qn[1, 1] / (w[1] * t2v)
    q1 = -t1v * w[0] * pn[0, 1] / u
    q2 = -t2v * w[1] * pn[1, 1] / u
    theta_t1 = pn[0, :] @ qn[:, 0]
    theta_t2 = pn[1, :] @ qn[:, 1]
    theta_1 = pn[2, :] @ qn[:, 2]
    theta_0 = pn[3, :] @ qn[:, 3]
    state = GarnierState(
        q1=q1, p1=p1, q2=q2, p2=p2, w=tuple(w), u=u,
        theta0=theta_0, theta1=theta_1, theta_t1=theta_t1, theta_t2=theta_t2,
        theta_inf2=theta_inf2, t1=t1v, t2=t2v, eps=eps,
    )
    rebuilt = build_garnier_2x2(state)
    res = max(
        float(np.max(np.abs(rebuilt.q - qn))), float(np.max(np.abs(rebuilt.p - pn)))
    )
    if res > tol * max(1.0, float(np.max(np.abs(qn)))):
        raise NoSolution(f"slice inversion inconsistent (residual {res:.2e})")
    return state


# ---------------------------------------------------------------------------
# Hamiltonians
# ---------------------------------------------------------------------------


def _h_vi(a: complex, b: complex, c: complex, d: complex, t: complex, q: complex, p: complex) -> complex:
    """Polynomial Hamiltonian of the sixth Painleve equation.

    Externally sourced parameter layout (a, b; c, d); the coefficients were
    cross-validated against the numerically integrated isomonodromic flow of
    the five-point rank-2 system (see the Hamiltonian consistency tests), so
    the layout is pinned by computation, not by convention alone.  Defined up
    to an additive function of t, which is set to zero.
    """
    quad = q * (q - 1) * (q - t) * p * p
    lin = (d * q * (q - 1) - (2 * a + b + c + d) * q * (q - t) + c * (q - 1) * (q - t)) * p
    const = a * (a + b) * q
    return (quad + lin + const) / (t * (t - 1))


def garnier_hamiltonians(s: GarnierState) -> tuple[complex, complex]:
    """The two coupled Hamiltonians of the continuous two-variable flow.

    Index 2 arises from index 1 by swapping (q1, p1, t1, theta_t1) with
    (q2, p2, t2, theta_t2); each has a simple pole at t1 = t2.
    """
    if abs(s.t1 - s.t2) < 1e-12:
        raise PoleAtCoincidence("Hamiltonians have a pole at t1 = t2")

    def one(q1, p1, q2, p2, t1, t2, th_t1, th_t2):
        base = _h_vi(
            s.theta_inf2, s.theta1, th_t1, s.theta0 + th_t2 + 1.0, t1, q1, p1
        )
        extra = (2 * q1 * p1 + q2 * p2 - s.theta1 - 2 * s.theta_inf2) * q1 * q2 * p2
        mixed = (
            t1 * (t1 - 1) * (p1 * q1 + th_t1) * p1 * q2
            - t1 * (t2 - 1) * (2 * p1 * q1 + th_t1) * p2 * q2
            + t2 * (t1 - 1) * (p2 * p2 * q2 + th_t2 * (p2 - p1)) * q1
        )
        return base + (extra - mixed / (t1 - t2)) / (t1 * (t1 - 1))

    h1 = one(s.q1, s.p1, s.q2, s.p2, s.t1, s.t2, s.theta_t1, s.theta_t2)
    h2 = one(s.q2, s.p2, s.q1, s.p1, s.t2, s.t1, s.theta_t2, s.theta_t1)
    return h1, h2
