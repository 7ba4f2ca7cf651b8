import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from deflab.channels import (
    Channel,
    ChoiMatrix,
    choi_from_kraus,
    choi_from_map,
    depolarizing_channel,
    identity_channel,
    is_completely_positive,
    is_trace_preserving,
    random_channel,
    trace_defect,
    transpose_map,
)
from deflab.errors import ValidationError

from conftest import seeds


def test_identity_choi_is_unnormalised_maximally_entangled():
    J = identity_channel(2).choi.matrix
    omega = np.array([1, 0, 0, 1.0])
    np.testing.assert_allclose(J, np.outer(omega, omega))
    assert is_completely_positive(identity_channel(2).choi)


def test_transpose_map_is_not_cp():
    T = transpose_map(2)
    assert T.min_eigenvalue() == pytest.approx(-1.0)
    assert not is_completely_positive(T)
    assert trace_defect(T) < 1e-15


def test_choi_apply_matches_callable():
    rng = np.random.default_rng(1)
    K = rng.normal(size=(3, 2)) + 1j * rng.normal(size=(3, 2))
    T = choi_from_kraus([K])
    a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    np.testing.assert_allclose(T(a), K @ a @ K.conj().T, atol=1e-12)


def test_zero_map_trace_defect_is_one():
    Z = choi_from_map(lambda a: np.zeros((2, 2)), 2, 2)
    assert trace_defect(Z) == pytest.approx(1.0)


def test_depolarizing_output_is_fixed():
    D = depolarizing_channel(2)
    np.testing.assert_allclose(D(np.diag([0.75, 0.25])), np.eye(2) / 2)


@given(seeds, st.integers(1, 3), st.integers(1, 3))
def test_random_channels_are_cptp(seed, din, dout):
    T = random_channel(din, dout, np.random.default_rng(seed))
    assert T.choi.min_eigenvalue() >= -1e-12
    assert trace_defect(T.choi) <= 1e-9
    assert is_trace_preserving(T.choi)


def test_channel_rejects_non_cp_and_non_tp():
    with pytest.raises(ValidationError):
        Channel(transpose_map(2))
    with pytest.raises(ValidationError):
        Channel(choi_from_map(lambda a: 2 * a, 2, 2))


def test_choi_size_is_validated():
    with pytest.raises(ValidationError):
        ChoiMatrix(np.eye(4), 2, 3)


def test_composition_order():
    rng = np.random.default_rng(5)
    A, B = random_channel(2, 3, rng), random_channel(3, 2, rng)
    C = A.choi.compose_before(B.choi)
    a = np.diag([0.3, 0.7]).astype(complex)
    np.testing.assert_allclose(C(a), B(A(a)), atol=1e-12)


def test_random_channel_needs_enough_kraus_operators():
    with pytest.raises(ValidationError):
        random_channel(5, 2, np.random.default_rng(0), n_kraus=2)
    assert is_trace_preserving(random_channel(5, 2, np.random.default_rng(0), n_kraus=3).choi)
