import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from deflab.curve import TestingCurve, f_value
from deflab.deficiency import two_deficiency_index
from deflab.errors import PreconditionError
from deflab.experiment import BinaryExperiment
from deflab.linalg import commutator_norm
from deflab.curve import np_projection
from deflab.witness import crossing_points, default_s_points, separation_demo, tangent_witness

from conftest import dims, make_experiment, seeds


def test_equal_states_collapse():
    r = np.diag([0.3, 0.7])
    w = tangent_witness(BinaryExperiment(r, r), 0.5, 2.0)
    np.testing.assert_allclose(w.p, [0, 1, 0], atol=1e-15)
    np.testing.assert_allclose(w.q, [0, 1, 0], atol=1e-15)
    assert crossing_points(w) == pytest.approx((0.0, 0.0, 1.0, 1.0))


def test_linear_piece_example(E0):
    w = tangent_witness(E0, 1.0, 1.25)
    np.testing.assert_allclose(w.a, [1, 0.75, 0.75, 0], atol=1e-15)
    np.testing.assert_allclose(w.b, [1, 0.5, 0.5, 0], atol=1e-15)
    np.testing.assert_allclose(w.p, [0.25, 0, 0.75], atol=1e-15)
    np.testing.assert_allclose(w.q, [0.5, 0, 0.5], atol=1e-15)
    assert crossing_points(w) == pytest.approx((0.0, 0.5, 0.5, 1.5))


def test_E1_postconditions(E1):
    w = tangent_witness(E1, 1.0, 4.0)
    for s in (1.0, 4.0):
        assert abs(w.f_witness(s) - f_value(E1, s)) <= 1e-9
    ts = np.linspace(0, 12, 1024)
    assert max(w.f_witness(t) - f_value(E1, t) for t in ts) <= 1e-9
    assert two_deficiency_index(E1, w.witness).epsilon <= 1e-9
    tp = crossing_points(w)
    assert tp[0] == 0 <= tp[1] < 1.0 < tp[2] < 4.0 < tp[3]


def test_infinite_last_crossing():
    # supp rho1 not inside supp rho2: the curve levels off at 0.5 > 0
    E = BinaryExperiment(np.diag([0.5, 0.5, 0]), np.diag([0, 0.5, 0.5]))
    w = tangent_witness(E, 0.5, 3.0)
    assert math.isinf(crossing_points(w)[3])
    assert w.f_witness(100.0) == pytest.approx(0.5)


@pytest.mark.parametrize("s1,s2", [(0.5, 1.0), (1.0, 1.5), (1.0, 1.0), (2.0, 1.0), (0.0, 1.0), (0.5 + 1e-7, 1.0)])
def test_preconditions(E0, s1, s2):
    with pytest.raises(PreconditionError):
        tangent_witness(E0, s1, s2)


@st.composite
def witness_inputs(draw):
    seed, n = draw(seeds), draw(dims)
    E = make_experiment(seed, n, draw(st.integers(1, n)))
    bps = TestingCurve(E).breakpoints
    hi = 2 * (max(bps) if bps else 0.0) + 2
    s1 = draw(st.floats(1e-3, hi))
    s2 = draw(st.floats(1e-3, hi))
    assume(abs(s1 - s2) > 1e-4)
    s1, s2 = sorted((s1, s2))
    assume(all(abs(s - b) > 1e-4 for s in (s1, s2) for b in TestingCurve(E).breakpoints))
    return E, s1, s2


@given(witness_inputs())
def test_witness_invariants(args):
    E, s1, s2 = args
    w = tangent_witness(E, s1, s2)
    assert np.all(np.diff(w.a) <= 0) and np.all(np.diff(w.b) <= 0)
    assert w.a[0] == w.b[0] == 1 and w.a[3] == w.b[3] == 0
    for v in (w.p, w.q):
        assert np.all(v >= 0) and abs(v.sum() - 1) <= 1e-12
    c = TestingCurve(E)
    hi = 2 * (max(c.breakpoints) if c.breakpoints else 0) + 2
    ts = np.linspace(0, hi, 1024)
    assert max(w.f_witness(t) - c(t) for t in ts) <= 1e-9
    for s in (s1, s2):
        assert abs(w.f_witness(s) - c(s)) <= 1e-9
    assert two_deficiency_index(E, w.witness).epsilon <= 1e-9
    # piecewise-linear with at most three kinks
    kinks = {round(float(pi / qi), 9) for pi, qi in zip(w.p, w.q) if qi > 0 and pi > 0}
    assert len(kinks) <= 3


@given(witness_inputs())
def test_crossing_point_chain(args):
    E, s1, s2 = args
    w = tangent_witness(E, s1, s2)
    tp = crossing_points(w)
    assert tp[0] == 0 and all(x <= y for x, y in zip(tp, tp[1:]))
    same = [np.isclose(w.a[i], w.a[i + 1], atol=1e-12) and np.isclose(w.b[i], w.b[i + 1], atol=1e-12) for i in range(3)]
    for i, s in ((1, s1), (2, s2)):
        # each tangent line is the active piece at its own tangency point
        assert w.lines(s)[i] == pytest.approx(w.lines(s).max(), abs=1e-12)
        if not same[i - 1] and not same[i]:
            assert tp[i] - 1e-9 <= s <= tp[i + 1] + 1e-9
    for t in np.linspace(0, 3 * s2, 200):
        assert abs(w.f_piecewise(t) - w.f_witness(t)) <= 1e-10


def test_default_points_non_abelian(E1):
    s1, s2 = default_s_points(E1)
    assert 0 < s1 < s2 < TestingCurve(E1).tmax
    assert commutator_norm(np_projection(E1, s1)[0], np_projection(E1, s2)[0]) > 0.1


def test_default_points_fall_back_when_commuting(E0):
    assert default_s_points(E0) == pytest.approx((math.sqrt(0.75), 2.25))
    r = np.diag([0.3, 0.7])
    assert default_s_points(BinaryExperiment(r, r)) == pytest.approx((0.5, 2.0))


def test_separation_abelian(E0):
    rep = separation_demo(E0)
    assert rep.verdict == "FEASIBLE" and rep.abelian
    assert rep.deficiency == 0 and rep.match.value <= 1e-7


def test_separation_non_abelian(E1):
    rep = separation_demo(E1)
    assert rep.verdict == "INFEASIBLE" and not rep.abelian
    assert rep.deficiency == 0 and rep.margin > 1e-4
    d = rep.to_dict()
    assert d["verdict"] == "INFEASIBLE" and d["construction"]["witness"]["p"] == rep.construction.p.tolist()


def test_separation_explicit_points(E1):
    assert separation_demo(E1, 1.0, 4.0).verdict == "INFEASIBLE"


def test_separation_equal_states():
    r = np.diag([0.3, 0.7])
    assert separation_demo(BinaryExperiment(r, r)).verdict == "FEASIBLE"
