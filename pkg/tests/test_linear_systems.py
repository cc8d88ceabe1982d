import numpy as np
import pytest

from isomon.errors import InvalidState, NotRealizable, Unsupported
from isomon.garnier import build_garnier_2x2, product_pq, random_state
from isomon.linear_systems import (
    INFINITY,
    FactoredSystem,
    HtlForm,
    PointScheme,
    RationalSystem,
    RiemannScheme,
    fuchs_check,
    realize_factored,
    riemann_scheme,
    spectral_type,
)
from isomon.transforms import laplace, moebius


def _conj(rng, diag):
    n = len(diag)
    g = rng.standard_normal((n, n)) + 0.1j * rng.standard_normal((n, n)) + np.eye(n)
    return g @ np.diag(diag).astype(complex) @ np.linalg.inv(g)


def test_rational_system_validation():
    with pytest.raises(InvalidState):
        RationalSystem(points=(0.0, 1e-14), finite=(([[1.0]],), ([[1.0]],)))
    with pytest.raises(ValueError):
        RationalSystem(points=(0.0,), finite=(([[np.inf]],),))


def test_residue_at_infinity_implicit():
    sys = RationalSystem(points=(0.0, 1.0), finite=(([[1, 0], [0, 2]],), ([[0, 1], [1, 0]],)))
    assert np.allclose(sys.residue_at_infinity(), [[-1, -1], [-1, -2]])


def test_evaluate_matches_partial_fractions():
    a = np.array([[1.0, 2.0], [0.0, 1.0]])
    b = np.array([[0.0, 1.0], [1.0, 0.0]])
    sys = RationalSystem(points=(0.0, 2.0), finite=((a,), (b,)), infinity=())
    x = 1.0 + 1.0j
    assert np.allclose(sys.evaluate(x), a / x + b / (x - 2.0))


def test_factored_roundtrip_pointwise():
    # evaluation oracle: the expanded rational system agrees at random points
    s = random_state(3)
    fs = build_garnier_2x2(s)
    sys = fs.to_rational()
    rng = np.random.default_rng(1)
    for _ in range(20):
        x = rng.standard_normal() * 2 + 1j * (rng.standard_normal() + 2.5)
        assert np.linalg.norm(fs.evaluate(x) - sys.evaluate(x)) < 1e-10 * max(
            1.0, np.linalg.norm(fs.evaluate(x))
        )


def test_realize_factored_rank_one_residue():
    sys = RationalSystem(points=(0.0,), finite=((np.array([[1.0, 1.0], [1.0, 1.0]]),),))
    fs = realize_factored(sys)
    assert fs.n == 1
    assert fs.t_blocks == ((0.0 + 0.0j, 1),)
    # rank factorization is unique up to scale: compare the product
    assert np.allclose(fs.q @ fs.p, [[1, 1], [1, 1]])


def test_realize_factored_garnier_t_blocks():
    s = random_state(4)
    sys = build_garnier_2x2(s).to_rational()
    fs = realize_factored(sys)
    assert [v for v, _ in fs.t_blocks] == pytest.approx([s.t1, s.t2, 1.0, 0.0])
    assert all(sz == 1 for _, sz in fs.t_blocks)
    rng = np.random.default_rng(2)
    for _ in range(20):
        x = rng.standard_normal() + 1j * (rng.standard_normal() + 3.0)
        lhs = fs.evaluate(x)
        rhs = sys.evaluate(x)
        assert np.linalg.norm(lhs - rhs) < 1e-10 * max(1.0, np.linalg.norm(rhs))


def test_realize_factored_rejects_higher_order():
    sys = RationalSystem(points=(0.0,), finite=((np.eye(2), np.eye(2)),))
    with pytest.raises(NotRealizable):
        realize_factored(sys)


def test_htl_form_rejects_ramified_levels():
    with pytest.raises(Unsupported):
        HtlForm(levels=(1.5, 1), stages=([1.0],), residue=[0.0])
    h = HtlForm(levels=(2, 1), stages=([1.0, 2.0],), residue=[0.3, 0.4])
    assert h.poincare_rank == 1


def test_riemann_scheme_multiplicity_example():
    # 4x4 Fuchsian with residue multiplicities (31), (22), (22): infinity generic
    rng = np.random.default_rng(9)
    a1 = _conj(rng, [0.31, 0.31, 0.31, -0.11])
    a2 = _conj(rng, [0.21, 0.21, -0.37, -0.37])
    a3 = _conj(rng, [0.17, 0.17, -0.29, -0.29])
    sys = RationalSystem(points=(0.0, 1.0, 3.0), finite=((a1,), (a2,), (a3,)))
    st = spectral_type(riemann_scheme(sys))
    assert str(st) == "31,22,22,1111"


def test_riemann_scheme_diagonal_verbatim():
    d1 = np.diag([0.25, -0.75]).astype(complex)
    d2 = np.diag([0.5, 0.1]).astype(complex)
    sys = RationalSystem(points=(0.0, 1.0), finite=((d1,), (d2,)))
    sch = riemann_scheme(sys)
    assert sch.points[0].exponents == (-0.75, 0.25)  # sorted
    assert sch.points[1].exponents == (0.1, 0.5)


def test_riemann_scheme_rank1_pairing():
    # the irregular point of the transformed five-point system pairs
    # each leading value t with its own exponent theta^t
    s = random_state(21)
    fs = build_garnier_2x2(s)
    img = moebius(laplace(fs).to_rational(), (0, 1, 1, 0))
    sch = riemann_scheme(img)
    pt = sch.points[0]
    assert pt.is_irregular
    pairs = {  # leading value -> exponent
        complex(np.round(l, 9)): th for l, th in zip(pt.leading, pt.exponents)
    }
    want = {s.t1: s.theta_t1, s.t2: s.theta_t2, 1.0 + 0j: s.theta1, 0.0 + 0j: s.theta0}
    for lead, th in want.items():
        key = min(pairs, key=lambda z: abs(z - lead))
        assert abs(key - lead) < 1e-9
        assert abs(pairs[key] - th) < 1e-9
    assert str(spectral_type(sch)) == "(1)(1)(1)(1),211"


def test_spectral_type_all_distinct():
    # three finite points plus infinity: four points in total
    rng = np.random.default_rng(12)
    mats = [_conj(rng, [0.3, -0.2]), _conj(rng, [0.1, 0.45]), _conj(rng, [-0.6, 0.2])]
    sys = RationalSystem(points=(0.0, 1.0, 2.0), finite=tuple((m,) for m in mats))
    assert str(spectral_type(riemann_scheme(sys))) == "11,11,11,11"


def test_spectral_type_similarity_invariance():
    rng = np.random.default_rng(17)
    a1 = _conj(rng, [0.31, 0.31, 0.31, -0.11])
    a2 = _conj(rng, [0.21, 0.21, -0.37, -0.37])
    a3 = _conj(rng, [0.17, 0.17, -0.29, -0.29])
    base = None
    for _ in range(50):
        g = rng.standard_normal((4, 4)) + 0.4 * np.eye(4)
        while abs(np.linalg.det(g)) < 0.2:
            g = rng.standard_normal((4, 4)) + 0.4 * np.eye(4)
        gi = np.linalg.inv(g)
        sys = RationalSystem(
            points=(0.0, 1.0, 3.0),
            finite=((g @ a1 @ gi,), (g @ a2 @ gi,), (g @ a3 @ gi,)),
        )
        st = str(spectral_type(riemann_scheme(sys)))
        base = base or st
        assert st == base == "31,22,22,1111"


def test_scheme_exponent_sum_vanishes():
    for seed in range(4):
        s = random_state(seed)
        sys = build_garnier_2x2(s).to_rational()
        assert fuchs_check(sys) < 1e-10


def test_fuchs_check_inconsistent_scheme():
    sch = RiemannScheme(points=(PointScheme(location=0.0, exponents=(1.0,)),))
    assert fuchs_check(sch) == pytest.approx(1.0)


def test_fuchs_relation_from_trace():
    # trace of -QP equals the sum of the two exponents at infinity
    s = random_state(6)
    fs = build_garnier_2x2(s)
    assert abs(-np.trace(fs.q @ fs.p) - (s.theta_inf1 + s.theta_inf2)) < 1e-12
    assert s.fuchs_residual() < 1e-12


def test_non_resonance_flag():
    sch = RiemannScheme(
        points=(
            PointScheme(location=0.0, exponents=(0.25, 1.25)),
            PointScheme(location=INFINITY, exponents=(-0.75, -0.75)),
        )
    )
    assert not sch.non_resonant()
    sch2 = RiemannScheme(
        points=(
            PointScheme(location=0.0, exponents=(0.25, 0.85)),
            PointScheme(location=INFINITY, exponents=(-0.55, -0.55)),
        )
    )
    assert sch2.non_resonant()


def test_json_roundtrips():
    s = random_state(2)
    sys = build_garnier_2x2(s).to_rational()
    back = RationalSystem.from_json(sys.to_json())
    assert back.points == sys.points
    for a, b in zip(back.finite, sys.finite):
        assert np.allclose(a[0], b[0])
    sch = riemann_scheme(sys)
    sch2 = RiemannScheme.from_json(sch.to_json())
    assert sch2.points[0].exponents == pytest.approx(sch.points[0].exponents)


def test_two_irregular_points_unsupported():
    sys = RationalSystem(
        points=(0.0, 1.0),
        finite=((np.eye(2), np.diag([1.0, 2.0])), (np.eye(2), np.diag([3.0, 4.0]))),
    )
    with pytest.raises(Unsupported):
        riemann_scheme(sys)
