import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from deflab.channels import depolarizing_channel, random_channel
from deflab.deficiency import (
    bayes_risk,
    check_deficiency_vs_measurements,
    check_two_deficiency,
    two_deficiency_index,
)
from deflab.errors import ValidationError
from deflab.experiment import (
    BinaryExperiment,
    ClassicalBinaryExperiment,
    Experiment,
    LossFunction,
    Povm,
    apply_povm,
    randomize,
)
from deflab.witness import tangent_witness

from conftest import dims, make_experiment, random_unitary, seeds
from oracles import bayes_two_decisions, classical_index, f_eig, grid_index


def test_index_examples(E0, F0, E1):
    assert two_deficiency_index(E1, E1).epsilon == 0.0
    assert two_deficiency_index(E0, F0).epsilon == 0.0
    rep = two_deficiency_index(F0, E0)
    assert rep.epsilon == pytest.approx(0.125, abs=1e-9)
    assert rep.witness_t == pytest.approx(1.0, abs=1e-6)


def test_check_examples(E0, F0):
    assert check_two_deficiency(E0, F0, 0.0) == (True, None)
    ok, t = check_two_deficiency(F0, E0, 0.1)
    assert not ok and t == pytest.approx(1.0, abs=1e-6)
    assert check_two_deficiency(F0, E0, 0.125)[0]


@given(seeds, st.integers(2, 5), st.integers(2, 5))
def test_index_matches_classical_oracle(seed, k, kk):
    rng = np.random.default_rng(seed)
    p, q = rng.dirichlet(np.ones(k), size=2)
    pp, qq = rng.dirichlet(np.ones(kk), size=2)
    got = two_deficiency_index(ClassicalBinaryExperiment(p, q), ClassicalBinaryExperiment(pp, qq)).epsilon
    ref = classical_index(p, q, pp, qq)
    assert got == pytest.approx(ref if ref > 1e-9 else 0.0, abs=1e-7)


@given(seeds, dims, dims)
def test_index_matches_dense_grid_oracle(seed, n, m):
    rng = np.random.default_rng(seed)
    E, F = make_experiment(int(rng.integers(2**31)), n), make_experiment(int(rng.integers(2**31)), m)
    rep = two_deficiency_index(E, F)
    ref = grid_index(E, F, rep.method["t_star"])
    assert rep.epsilon == pytest.approx(ref if ref > 1e-9 else 0.0, abs=1e-8)
    if rep.epsilon > 0:
        t = rep.witness_t
        assert (f_eig(*F.states, t) - f_eig(*E.states, t)) / (1 + t) == pytest.approx(rep.epsilon, abs=1e-9)


@given(seeds, dims, st.integers(1, 3))
def test_randomization_is_dominated(seed, n, m):
    rng = np.random.default_rng(seed)
    E = make_experiment(seed, n)
    F = randomize(E, random_channel(n, m, rng))
    assert two_deficiency_index(E, F).epsilon <= 1e-8


@given(seeds, dims)
def test_post_processing_monotone(seed, n):
    rng = np.random.default_rng(seed)
    E, F = make_experiment(seed, n), make_experiment(seed + 1, n)
    V = random_unitary(n, rng)[:, : int(rng.integers(2, n + 1))]
    rest = np.eye(n) - V @ V.conj().T
    N = Povm(tuple([np.outer(v, v.conj()) for v in V.T] + ([rest] if np.trace(rest).real > 1e-9 else [])))
    FN = ClassicalBinaryExperiment(*(np.clip(apply_povm(N, s), 0, None) for s in F.states))
    assert two_deficiency_index(E, FN).epsilon <= two_deficiency_index(E, F).epsilon + 1e-8


@given(seeds, dims)
def test_symmetric_zero_means_equal_curves(seed, n):
    E = make_experiment(seed, n)
    U = random_unitary(n, np.random.default_rng(seed))
    F = BinaryExperiment(*(U @ r @ U.conj().T for r in E.states))
    assert two_deficiency_index(E, F).epsilon == 0 and two_deficiency_index(F, E).epsilon == 0
    for t in np.linspace(0, 5, 50):
        assert abs(f_eig(*E.states, t) - f_eig(*F.states, t)) <= 1e-8


def test_bayes_examples(E0):
    assert bayes_risk(E0, LossFunction(np.zeros((2, 2)))) == 0.0
    assert bayes_risk(E0, LossFunction.zero_one(2)) == pytest.approx(0.75)
    single = Experiment((np.diag([0.3, 0.7]),))
    assert bayes_risk(single, LossFunction([[0.4, 0.9]])) == pytest.approx(0.4)
    assert bayes_risk(single, LossFunction([[0.4, 0.9, 0.2]])) == pytest.approx(0.2, abs=1e-7)


def test_bayes_rejects_bad_loss(E0):
    with pytest.raises(ValidationError):
        bayes_risk(E0, LossFunction([[1.0]]))
    with pytest.raises(ValidationError):
        bayes_risk(E0, LossFunction(np.ones((3, 2))))


@given(seeds, dims)
def test_bayes_two_decisions_matches_oracle(seed, n):
    rng = np.random.default_rng(seed)
    E = make_experiment(seed, n)
    W = rng.uniform(0, 1, size=(2, 2))
    r = bayes_risk(E, LossFunction(W))
    assert r == pytest.approx(bayes_two_decisions(E.states, W), abs=1e-12)
    assert -1e-12 <= r <= LossFunction(W).norm + 1e-12


@given(seeds, dims, st.integers(3, 4))
def test_bayes_many_decisions_between_bounds(seed, n, k):
    rng = np.random.default_rng(seed)
    E = make_experiment(seed, n)
    W = LossFunction(rng.uniform(0, 1, size=(2, k)))
    r = bayes_risk(E, W)
    # any single-decision rule is an upper bound; the two best decisions give another
    assert r <= W.table.sum(axis=0).min() + 1e-7
    pairs = min(bayes_two_decisions(E.states, W.table[:, [i, j]]) for i in range(k) for j in range(i + 1, k))
    assert r <= pairs + 1e-7
    assert r >= -1e-9


@given(seeds, dims)
def test_bayes_risk_inequality_from_index(seed, n):
    rng = np.random.default_rng(seed)
    E, F = make_experiment(seed, n), make_experiment(seed + 7, n)
    eps = two_deficiency_index(E, F).epsilon
    assert check_two_deficiency(E, F, eps)[0]
    for _ in range(5):
        W = LossFunction(rng.uniform(0, 1, size=(2, 2)))
        assert bayes_risk(E, W) <= bayes_risk(F, W) + eps * W.norm + 1e-8


def test_measurement_check_examples(E0, E1):
    rng = np.random.default_rng(0)
    F = randomize(E1, random_channel(2, 2, rng))
    ok, res = check_deficiency_vs_measurements(E1, F, 0.0, [Povm.computational(2)])
    assert ok and res[0].value <= 1e-7
    ok, _ = check_deficiency_vs_measurements(E0, E0, 0.0, [Povm.computational(2)])
    assert ok
    w = tangent_witness(E1, 1.0, 4.0)
    ok, res = check_deficiency_vs_measurements(E1, w.witness.to_quantum(), 0.0, [Povm.computational(3)])
    assert not ok and res[0].lower_bound > 1e-4
    ok, _ = check_deficiency_vs_measurements(E1, w.witness.to_quantum(), 0.02, [Povm.computational(3)])
    assert ok


def test_report_serialises(F0, E0):
    d = two_deficiency_index(F0, E0, grid=64).to_dict(include_samples=True)
    assert d["method"]["grid"] == 64
    assert len(d["samples"]) >= 64


@pytest.mark.parametrize("a, D", [(0.5, 0.01), (0.9, 0.001), (0.99, 0.001)])
def test_supremum_past_last_breakpoint(a, D):
    # rho2 has a kernel that rho1 does not preserve, so f_E keeps decaying like 1/t
    psi = np.array([np.sqrt(a), np.sqrt(1 - a)])
    E = BinaryExperiment(np.outer(psi, psi), np.diag([1.0, 0.0]))
    F = ClassicalBinaryExperiment(np.array([1 - a + D, a - D]), np.array([0.0, 1.0]))
    rep = two_deficiency_index(E, F)
    ts = np.geomspace(1e-3, 1e7, 100_001)
    g = np.array([(max(1 - a + D, 0) + max(a - D - t, 0) - f_eig(E.rho1, E.rho2, t)) / (1 + t) for t in ts])
    assert rep.witness_t > rep.method["t_star"]
    assert rep.epsilon == pytest.approx(g.max(), abs=1e-11)
    assert rep.epsilon >= g.max() - 1e-12
