import numpy as np
import pytest

from isomon.errors import StepFloor
from isomon.garnier import build_fuchsian_211, random_state, schlesinger_step
from isomon.linear_systems import RationalSystem
from isomon.monodromy import (
    Arc,
    Path,
    Segment,
    compare_reps,
    monodromy_rep,
    transfer_matrix,
)


def _scalar_system(theta):
    return RationalSystem(points=(0.0,), finite=(([[theta]],),))


def test_scalar_loop_exponential():
    sys = _scalar_system(0.3)
    circle = Path((Arc(0.0, 1.0, 0.0, 2 * np.pi),))
    t = transfer_matrix(sys, circle)
    assert abs(t[0, 0] - np.exp(2j * np.pi * 0.3)) < 1e-9


def test_transfer_concatenation():
    sys = _scalar_system(0.3 + 0.1j)
    p1 = Path((Segment(1.0, 2.0 + 1.0j),))
    p2 = Path((Segment(2.0 + 1.0j, 0.5 - 0.7j),))
    t1 = transfer_matrix(sys, p1)
    t2 = transfer_matrix(sys, p2)
    both = transfer_matrix(sys, Path(p1.pieces + p2.pieces))
    assert np.max(np.abs(both - t2 @ t1)) < 1e-9


def test_transfer_reversal_inverts():
    sys = _scalar_system(0.4)
    p = Path((Segment(1.0, 0.5 + 0.8j), Arc(0.0, abs(0.5 + 0.8j), np.angle(0.5 + 0.8j), 2.2)))
    t = transfer_matrix(sys, p)
    tr = transfer_matrix(sys, p.reversed())
    assert np.max(np.abs(tr @ t - np.eye(1))) < 1e-9


def test_path_too_close_raises():
    sys = _scalar_system(0.5)
    with pytest.raises(StepFloor):
        transfer_matrix(sys, Path((Segment(-1.0, 1.0),)))  # passes through the pole


def _random_2x2_system(seed, npts=3):
    rng = np.random.default_rng(seed)
    pts = (0.0, 1.0, 0.6 + 0.8j)[:npts]
    mats = [
        rng.standard_normal((2, 2)) * 0.3 + 0.1j * rng.standard_normal((2, 2))
        for _ in range(npts)
    ]
    return RationalSystem(points=pts, finite=tuple((m,) for m in mats))


def test_monodromy_cyclic_relation():
    rep = monodromy_rep(_random_2x2_system(3))
    assert rep.relation_defect < 1e-8
    assert rep.ordering[-1] == "inf"


def test_monodromy_local_exponents():
    sys = _random_2x2_system(4)
    rep = monodromy_rep(sys)
    for u, mats in zip(sys.points, sys.finite):
        got = sorted(np.linalg.eigvals(rep.generator(complex(u))), key=lambda z: (z.real, z.imag))
        want = sorted(np.exp(2j * np.pi * np.linalg.eigvals(mats[0])), key=lambda z: (z.real, z.imag))
        assert np.max(np.abs(np.array(got) - np.array(want))) < 1e-6


def test_monodromy_determinant_bookkeeping():
    sys = _random_2x2_system(5)
    rep = monodromy_rep(sys)
    for u, mats in zip(sys.points, sys.finite):
        det = np.linalg.det(rep.generator(complex(u)))
        assert abs(det - np.exp(2j * np.pi * np.trace(mats[0]))) < 1e-7


def test_monodromy_convergence_with_tolerance():
    sys = _random_2x2_system(6)
    loose = monodromy_rep(sys, tol=1e-6).relation_defect
    tight = monodromy_rep(sys, tol=1e-12).relation_defect
    assert tight < loose


def test_compare_identical_and_conjugate():
    sys = _random_2x2_system(7)
    rep = monodromy_rep(sys)
    same = compare_reps(rep, rep)
    assert same.compatible and same.max_mismatch == 0.0
    g = np.array([[1.2, 0.3], [0.1, 0.8]])
    gi = np.linalg.inv(g)
    conj = RationalSystem(
        points=sys.points, finite=tuple((g @ m[0] @ gi,) for m in sys.finite)
    )
    rep2 = monodromy_rep(conj, base=rep.base)
    rpt = compare_reps(rep, rep2, rep_tol=1e-9)
    assert rpt.compatible


def test_compare_requires_same_ordering():
    r1 = monodromy_rep(_random_2x2_system(8))
    r2 = monodromy_rep(_random_2x2_system(8, npts=2))
    with pytest.raises(ValueError):
        compare_reps(r1, r2)


def test_pair_system_local_monodromy_multiset():
    # generator at 0 of the separated pair has eigenvalues exp(2 pi i rho), with 1 for the zero slot
    s = random_state(5, profile="tame")
    sysm = build_fuchsian_211(s).system()
    rep = monodromy_rep(sysm, tol=1e-12)
    got = sorted(np.linalg.eigvals(rep.generator(0.0 + 0.0j)), key=lambda z: (z.real, z.imag))
    want = sorted(
        np.exp(2j * np.pi * np.array([s.rho_t1, s.rho_t2, s.rho_1, 0.0])),
        key=lambda z: (z.real, z.imag),
    )
    assert np.max(np.abs(np.array(got) - np.array(want))) < 1e-6


def test_schlesinger_step_preserves_monodromy():
    s = random_state(6, profile="tame")
    before = monodromy_rep(build_fuchsian_211(s).system(), tol=1e-12)
    after_state = schlesinger_step(s, "s1")
    after = monodromy_rep(build_fuchsian_211(after_state).system(), base=before.base, tol=1e-12)
    assert before.relation_defect < 1e-8
    assert after.relation_defect < 1e-8
    rpt = compare_reps(before, after, rep_tol=1e-6)
    assert rpt.compatible, rpt.worst


def test_rep_json_report():
    rep = monodromy_rep(_random_2x2_system(9, npts=2))
    payload = rep.to_json()
    assert "traces" in payload and "relation_defect" in payload
