import numpy as np
import pytest
from dataclasses import replace

from helpers_flow import flow_derivatives
from isomon.errors import (
    InvalidState,
    KernelDimension,
    NoSolution,
    PoleAtCoincidence,
    SpectralCollision,
    ZeroEpsilon,
)
from isomon.garnier import (
    GarnierState,
    build_fuchsian_211,
    build_garnier_2x2,
    coordinates_from_factored,
    coordinates_from_product,
    garnier_hamiltonians,
    hatted_product,
    lu_gauge,
    pair_stabilizer_nullity,
    product_pq,
    random_state,
    retriangularize,
    schlesinger_oracle,
    schlesinger_step,
    schlesinger_step_detailed,
)
from isomon.linear_core import Normalization
from isomon.linear_systems import FactoredSystem


def _sorted(vals):
    return np.array(sorted(np.asarray(vals, dtype=complex), key=lambda z: (z.real, z.imag)))


def test_state_invariants():
    with pytest.raises(ZeroEpsilon):
        replace(random_state(0), eps=0.0)
    with pytest.raises(InvalidState):
        replace(random_state(0), t1=1.0)
    with pytest.raises(InvalidState):
        replace(random_state(0), w=(1.0, 0.0, 1.0, 1.0))
    s = random_state(0)
    assert s.fuchs_residual() < 1e-12


def test_state_json_roundtrip():
    s = random_state(5)
    back = GarnierState.from_json(s.to_json())
    assert back == s


def test_parametrization_diagonal_identities():
    # diagonal of PQ carries the four finite exponents
    s = random_state(1)
    pq = product_pq(s)
    want = [s.theta_t1, s.theta_t2, s.theta1, s.theta0]
    assert np.max(np.abs(np.diag(pq) - np.array(want))) < 1e-12


def test_product_independent_of_u():
    s = random_state(2)
    s2 = replace(s, u=s.u * (2.3 - 0.4j))
    assert np.allclose(product_pq(s), product_pq(s2))


def test_infinity_exponents_from_product():
    s = random_state(3)
    fs = build_garnier_2x2(s)
    got = _sorted(np.linalg.eigvals(-fs.q @ fs.p))
    want = _sorted([s.theta_inf1, s.theta_inf2])
    assert np.max(np.abs(got - want)) < 1e-10


def test_weight_row_sum_identity():
    # the all-ones row is a left eigenvector of the hatted product
    s = random_state(4)
    row = np.ones(4) @ hatted_product(s)
    assert np.max(np.abs(row + s.theta_inf1 * np.ones(4))) < 1e-12


def test_triangular_pair_structure():
    s = random_state(5)
    pair = build_fuchsian_211(s)
    assert np.allclose(pair.product(), product_pq(s))
    assert np.allclose(np.diag(pair.a0), [s.rho_t1, s.rho_t2, s.rho_1, 0.0])
    assert np.allclose(np.diag(pair.a1), s.sigma)
    sysm = pair.system()
    assert sysm.points == (0.0, -s.eps)


# ---------------------------------------------------------------------------
# triangular re-gauge
# ---------------------------------------------------------------------------


def test_lu_gauge_scalar_case_frozen():
    # hand-computed 2x2 instance: lam=2, B=(0), mu=0, C=(1), b=c=1
    g, a0bar, a1bar = lu_gauge(2.0, [1.0], [[0.0]], 0.0, [1.0], [[1.0]])
    assert np.allclose(g, [[2.0, -2.0], [-0.5, 1.0]])
    assert np.allclose(a0bar, [[2.0, 4.0], [0.0, 0.0]])
    assert np.allclose(a1bar, [[0.0, 0.0], [0.25, 1.0]])


def test_lu_gauge_no_coupling_gives_diagonal():
    rng = np.random.default_rng(0)
    bmat = np.triu(rng.standard_normal((3, 3))) + np.diag([1.0, 2.0, 3.0])
    cmat = np.tril(rng.standard_normal((3, 3))) + np.diag([-1.0, -2.0, -3.0])
    g, a0bar, a1bar = lu_gauge(5.0, np.zeros(3), bmat, -5.0, np.zeros(3), cmat)
    off = g - np.diag(np.diag(g))
    assert np.max(np.abs(off)) < 1e-12
    assert np.allclose(np.diag(a0bar), [5.0, *np.diag(bmat)])
    assert np.allclose(np.diag(a1bar), [-5.0, *np.diag(cmat)])


def _random_bordered(rng, k=3):
    b = rng.standard_normal(k) + 1j * rng.standard_normal(k)
    c = rng.standard_normal(k) + 1j * rng.standard_normal(k)
    bmat = np.triu(rng.standard_normal((k, k)) + 0.3j * rng.standard_normal((k, k)))
    cmat = np.tril(rng.standard_normal((k, k)) + 0.3j * rng.standard_normal((k, k)))
    lam = 2.5 + 0.3j
    mu = -2.5 - 0.1j
    return lam, b, bmat, mu, c, cmat


def test_lu_gauge_matches_direct_conjugation():
    # cross-check of the block formulas against explicit conjugation
    rng = np.random.default_rng(7)
    for _ in range(20):
        lam, b, bmat, mu, c, cmat = _random_bordered(rng)
        k = b.size
        a0 = np.zeros((k + 1, k + 1), dtype=complex)
        a0[0, 0] = lam
        a0[1:, 0] = b
        a0[1:, 1:] = bmat
        a1 = np.zeros((k + 1, k + 1), dtype=complex)
        a1[0, 0] = mu
        a1[0, 1:] = c
        a1[1:, 1:] = cmat
        for norm in Normalization:
            g, a0bar, a1bar = lu_gauge(lam, b, bmat, mu, c, cmat, norm)
            ginv = np.linalg.inv(g)
            direct0 = g @ a0 @ ginv
            direct1 = g @ a1 @ ginv
            scale = max(np.linalg.norm(direct0), np.linalg.norm(direct1))
            assert np.linalg.norm(a0bar - direct0) < 1e-10 * scale
            assert np.linalg.norm(a1bar - direct1) < 1e-10 * scale
            assert np.max(np.abs(np.tril(direct0, -1))) < 1e-10 * scale
            assert np.max(np.abs(np.triu(direct1, 1))) < 1e-10 * scale


def test_lu_gauge_spectral_collision():
    with pytest.raises(SpectralCollision):
        lu_gauge(1.0, [1.0], [[1.0]], 0.0, [1.0], [[2.0]])


# ---------------------------------------------------------------------------
# discrete steps
# ---------------------------------------------------------------------------


def test_step_s1_shifts_exponents_and_is_consistent():
    s = random_state(11)
    res = schlesinger_step_detailed(s, "s1")
    assert res.consistency_residual < 1e-10
    assert res.kernel_residual < 1e-10
    assert res.triangularity_residual < 1e-10
    got0 = _sorted(np.diag(res.a0bar))
    want0 = _sorted([s.rho_t1 + 1, s.rho_t2, s.rho_1, 0.0])
    assert np.max(np.abs(got0 - want0)) < 1e-12
    assert res.state.t1 == pytest.approx(s.t1 + s.eps)
    assert res.state.w[3] == 1.0
    # trace conservation: the +1 and -1 cancel
    assert np.trace(res.a0bar + res.a1bar) == pytest.approx(np.trace(product_pq(s)))


def test_step_s2_shifts_exponents_and_is_consistent():
    s = random_state(12)
    res = schlesinger_step_detailed(s, "s2")
    assert res.consistency_residual < 1e-9
    got0 = _sorted(np.diag(res.a0bar))
    want0 = _sorted([s.rho_t1, s.rho_t2 + 1, s.rho_1, 0.0])
    assert np.max(np.abs(got0 - want0)) < 1e-9
    got1 = _sorted(np.diag(res.a1bar))
    sig = s.sigma
    want1 = _sorted([sig[0], sig[1] - 1, sig[2], sig[3]])
    assert np.max(np.abs(got1 - want1)) < 1e-9
    assert res.state.t2 == pytest.approx(s.t2 + s.eps)


def test_step_normalization_independence():
    for seed in range(5):
        s = random_state(40 + seed)
        for d in ("s1", "s2"):
            a = schlesinger_step(s, d, Normalization.UNIT_DIAGONAL_U)
            b = schlesinger_step(s, d, Normalization.UNIT_DIAGONAL_L)
            dev = max(abs(a.q1 - b.q1), abs(a.p1 - b.p1), abs(a.q2 - b.q2), abs(a.p2 - b.p2))
            assert dev < 1e-9


def test_step_invalid_direction():
    with pytest.raises(ValueError):
        schlesinger_step(random_state(0), "s3")


def test_steps_commute_on_coordinates():
    s = random_state(13)
    ab = schlesinger_step(schlesinger_step(s, "s1"), "s2")
    ba = schlesinger_step(schlesinger_step(s, "s2"), "s1")
    scale = max(abs(ab.q1), abs(ab.p1), abs(ab.q2), abs(ab.p2), 1.0)
    dev = max(abs(ab.q1 - ba.q1), abs(ab.p1 - ba.p1), abs(ab.q2 - ba.q2), abs(ab.p2 - ba.p2))
    assert dev / scale < 1e-8
    assert ab.t1 == pytest.approx(ba.t1)
    assert ab.t2 == pytest.approx(ba.t2)


def test_kernel_dimension_guard():
    m = np.diag([1.0, 2.0, 3.0, 4.0]).astype(complex)
    with pytest.raises(KernelDimension):
        coordinates_from_product(m, 0.1, 0.2, 0.3, 100.0, 1.5, -1.5)


# ---------------------------------------------------------------------------
# independent multiplier
# ---------------------------------------------------------------------------


def test_oracle_zero_shift_identity():
    s = random_state(14)
    sysm = build_fuchsian_211(s).system()
    out = schlesinger_oracle(sysm, None, None)
    assert np.allclose(out.finite[0][0], sysm.finite[0][0])


def test_oracle_shifts_spectra():
    s = random_state(15)
    sysm = build_fuchsian_211(s).system()
    out = schlesinger_oracle(sysm, shift_up=s.rho_t1, shift_down=s.sigma[0])
    got0 = _sorted(np.linalg.eigvals(out.finite[0][0]))
    want0 = _sorted([s.rho_t1 + 1, s.rho_t2, s.rho_1, 0.0])
    assert np.max(np.abs(got0 - want0)) < 1e-9
    got1 = _sorted(np.linalg.eigvals(out.finite[1][0]))
    sig = s.sigma
    want1 = _sorted([sig[0] - 1, sig[1], sig[2], sig[3]])
    assert np.max(np.abs(got1 - want1)) < 1e-9


def test_oracle_agrees_with_step():
    for seed in (16, 17, 18):
        s = random_state(seed)
        sysm = build_fuchsian_211(s).system()
        sig = s.sigma
        out = schlesinger_oracle(sysm, shift_up=s.rho_t1, shift_down=sig[0])
        _, b0, b1 = retriangularize(
            out.finite[0][0], out.finite[1][0],
            (s.rho_t1 + 1, s.rho_t2, s.rho_1, 0.0),
            (sig[0] - 1, sig[1], sig[2], sig[3]),
        )
        q1, p1, q2, p2, _ = coordinates_from_product(
            b0 + b1, s.theta0, s.theta_t1, s.theta_t2, s.theta_inf1, s.t1 + s.eps, s.t2
        )
        step = schlesinger_step(s, "s1")
        dev = max(abs(q1 - step.q1), abs(p1 - step.p1), abs(q2 - step.q2), abs(p2 - step.p2))
        assert dev < 1e-8


def test_oracle_requires_paired_shift():
    s = random_state(19)
    sysm = build_fuchsian_211(s).system()
    with pytest.raises(NoSolution):
        schlesinger_oracle(sysm, shift_up=s.rho_t1, shift_down=None)


# ---------------------------------------------------------------------------
# rigidity
# ---------------------------------------------------------------------------


def test_pair_stabilizer_nullity_is_torus():
    for seed in range(5):
        s = random_state(50 + seed)
        res = schlesinger_step_detailed(s, "s1")
        assert pair_stabilizer_nullity(res.a0bar, res.a1bar) == 4


def test_pair_stabilizer_detects_extra_freedom():
    # scalar pairs commute with everything: the constraint system is empty
    assert pair_stabilizer_nullity(np.eye(4), 2 * np.eye(4)) == 16
    # diagonal pairs with distinct entries are still rigid
    a0 = np.diag([1.0, 2.0, 3.0, 4.0])
    a1 = np.diag([5.0, 6.0, 7.0, 8.0])
    assert pair_stabilizer_nullity(a0, a1) == 4


# ---------------------------------------------------------------------------
# slice inversion and Hamiltonians
# ---------------------------------------------------------------------------


def test_coordinates_from_factored_roundtrip():
    s = random_state(20)
    fs = build_garnier_2x2(s)
    rng = np.random.default_rng(1)
    g = rng.standard_normal((2, 2)) + 0.2j * rng.standard_normal((2, 2))
    d = np.diag(rng.uniform(0.5, 1.5, 4).astype(complex))
    scrambled = FactoredSystem(
        t_blocks=fs.t_blocks,
        q=g @ fs.q @ d,
        p=np.linalg.inv(d) @ fs.p @ np.linalg.inv(g),
        s_blocks=fs.s_blocks,
    )
    rec = coordinates_from_factored(scrambled, s.theta_inf1, eps=s.eps)
    assert abs(rec.q1 - s.q1) < 1e-12
    assert abs(rec.p1 - s.p1) < 1e-12
    assert abs(rec.q2 - s.q2) < 1e-12
    assert abs(rec.p2 - s.p2) < 1e-12


def test_hamiltonian_swap_symmetry():
    s = random_state(21)
    h1, h2 = garnier_hamiltonians(s)
    sw = replace(
        s, q1=s.q2, p1=s.p2, q2=s.q1, p2=s.p1, t1=s.t2, t2=s.t1,
        theta_t1=s.theta_t2, theta_t2=s.theta_t1,
    )
    g1, g2 = garnier_hamiltonians(sw)
    assert h1 == pytest.approx(g2)
    assert h2 == pytest.approx(g1)


def test_hamiltonian_pole_at_coincidence():
    s = random_state(22)
    with pytest.raises(InvalidState):
        replace(s, t2=s.t1)  # the state itself refuses coincident times
    # approaching along a ray, (t1 - t2) H_1 stays bounded
    vals = []
    for d in (1e-2, 1e-3, 1e-4):
        sd = replace(s, t2=s.t1 + d)
        h1, _ = garnier_hamiltonians(sd)
        vals.append(abs((sd.t1 - sd.t2) * h1))
    assert max(vals) < 10 * max(1.0, min(vals))


def _num_dh(s, field, index, h=1e-6):
    sp = replace(s, **{field: getattr(s, field) + h})
    sm = replace(s, **{field: getattr(s, field) - h})
    return (garnier_hamiltonians(sp)[index] - garnier_hamiltonians(sm)[index]) / (2 * h)


def test_hamiltonians_generate_the_continuous_flow():
    # independent oracle: the classical residue deformation equations
    for seed in (23, 24):
        s = random_state(seed)
        dq1, dp1, dq2, dp2 = flow_derivatives(s, 0)
        assert abs(dq1 - _num_dh(s, "p1", 0)) < 1e-6
        assert abs(dp1 + _num_dh(s, "q1", 0)) < 1e-6
        assert abs(dq2 - _num_dh(s, "p2", 0)) < 1e-6
        assert abs(dp2 + _num_dh(s, "q2", 0)) < 1e-6
        dq1, dp1, dq2, dp2 = flow_derivatives(s, 1)
        assert abs(dq1 - _num_dh(s, "p1", 1)) < 1e-6
        assert abs(dp2 + _num_dh(s, "q2", 1)) < 1e-6


def test_step_approximates_hamiltonian_flow():
    for eps in (1e-2, 1e-3):
        s = random_state(42, eps=eps)
        new = schlesinger_step(s, "s1")
        lhs = (new.q1 - s.q1) / eps
        rhs = _num_dh(s, "p1", 0)
        assert abs(lhs - rhs) / abs(rhs) <= 10 * eps
