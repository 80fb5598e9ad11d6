"""Density-matrix algebra tests."""

import numpy as np
import pytest
from hypothesis import given, settings as hyp_settings, strategies as st
from pydantic import ValidationError

from app.core import qstate
from app.core.exceptions import DimensionError, DomainError
from app.core.qstate import PAULI_X, PAULI_Z, PermutationSymmetry
from app.models.quantum import DensityMatrix, KrausChannel, Observable


def test_partial_trace_of_ghz(ghz3):
    reduced = qstate.partial_trace(ghz3, [0, 1])
    expected = np.zeros((4, 4))
    expected[0, 0] = expected[3, 3] = 0.5
    assert reduced.local_dims == (2, 2)
    assert np.allclose(reduced.data, expected)


def test_partial_trace_recovers_factor():
    a = qstate.random_state(2, seed=1)
    b = qstate.random_state(3, seed=2)
    joint = qstate.tensor_product(a, b)
    assert joint.local_dims == (2, 3)
    assert np.allclose(qstate.partial_trace(joint, [1]).data, b.data)
    assert np.allclose(qstate.partial_trace(joint, [0]).data, a.data)


def test_partial_trace_rejects_bad_parties(ghz3):
    with pytest.raises(DimensionError):
        qstate.partial_trace(ghz3, [3])
    with pytest.raises(DomainError):
        qstate.partial_trace(ghz3, [])


def test_noisy_ghz_mixes_with_identity():
    rho = qstate.noisy_ghz(2, 3, 0.5)
    assert np.isclose(np.trace(rho.data).real, 1.0)
    assert np.isclose(rho.data[0, 0].real, 0.5 * 0.5 + 0.5 / 8)
    assert np.isclose(rho.data[0, 7].real, 0.25)


def test_ghz_and_noise_domain():
    with pytest.raises(DomainError):
        qstate.ghz_state(1, 3)
    with pytest.raises(DomainError):
        qstate.noisy_ghz(2, 3, 1.5)


def test_total_dimension_limit():
    with pytest.raises(DimensionError):
        qstate.maximally_mixed([2] * 9)


def test_fidelity(ghz3):
    assert qstate.fidelity(ghz3, ghz3) == pytest.approx(1.0, abs=1e-10)
    assert qstate.fidelity(ghz3, qstate.basis_state((2, 2, 2), (0, 0, 1))) == pytest.approx(
        0.0, abs=1e-10
    )
    assert qstate.fidelity(ghz3, qstate.basis_state((2, 2, 2), (0, 0, 0))) == pytest.approx(0.5)


def test_trace_norm():
    assert qstate.trace_norm(PAULI_Z) == pytest.approx(2.0)
    with pytest.raises(DomainError):
        qstate.trace_norm(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_expectation(ghz3):
    zz = Observable(local_dims=(2, 2, 2), data=np.kron(np.kron(PAULI_Z, PAULI_Z), np.eye(2)))
    assert qstate.expectation(ghz3, zz) == pytest.approx(1.0)
    with pytest.raises(DimensionError):
        qstate.expectation(ghz3, Observable(local_dims=(2,), data=PAULI_Z))


def test_apply_channel_flips_one_party():
    rho = qstate.basis_state((2, 2, 2), (0, 0, 0))
    out = qstate.apply_channel(rho, KrausChannel.unitary(PAULI_X), 0)
    assert np.isclose(out.data[4, 4].real, 1.0)


def test_apply_channel_changes_output_dim():
    discard = KrausChannel(
        input_dim=2, output_dim=1, kraus_ops=[[[1.0, 0.0]], [[0.0, 1.0]]]
    )
    out = qstate.apply_channel(qstate.ghz_state(2, 3), discard, 2)
    assert out.local_dims == (2, 2, 1)
    assert np.isclose(out.data[0, 0].real, 0.5)
    with pytest.raises(DimensionError):
        qstate.apply_channel(out, discard, 2)


def test_apply_multiparty_channel_as_cnot():
    cnot = np.eye(4)[[0, 1, 3, 2]]
    rho = qstate.basis_state((2, 2, 2), (0, 1, 0))
    out = qstate.apply_multiparty_channel(rho, KrausChannel.unitary(cnot), [1, 0])
    # party 1 controls party 0: |010> -> |110>
    assert np.isclose(out.data[6, 6].real, 1.0)


def test_compose_channels():
    twice = qstate.compose_channels(KrausChannel.unitary(PAULI_X), KrausChannel.unitary(PAULI_X))
    assert np.allclose(twice.kraus_ops[0], np.eye(2))
    with pytest.raises(DimensionError):
        qstate.compose_channels(
            KrausChannel.identity(2), KrausChannel.identity(3)
        )


def test_permute_subsystems_swaps_parties():
    rho = qstate.basis_state((2, 3), (1, 0))
    data = qstate.permute_subsystems(rho.data, (2, 3), [1, 0])
    swapped = qstate.basis_state((3, 2), (0, 1))
    assert np.allclose(data, swapped.data)


def test_bell_state_is_npt():
    bell = qstate.pure_state([1, 0, 0, 1], (2, 2))
    npt, min_eig = qstate.is_npt(bell)
    assert npt
    assert min_eig == pytest.approx(-0.5)
    product = qstate.basis_state((2, 2), (0, 1))
    assert not qstate.is_npt(product)[0]


def test_permutation_symmetry(ghz3):
    assert qstate.classify_permutation_symmetry(ghz3) == PermutationSymmetry.SYMMETRIC
    assert qstate.classify_permutation_symmetry(qstate.w_state(3)) == PermutationSymmetry.SYMMETRIC
    anti = qstate.antisymmetric_state(3)
    assert qstate.classify_permutation_symmetry(anti) == PermutationSymmetry.ANTISYMMETRIC
    mixed = qstate.maximally_mixed((2, 2))
    assert qstate.symmetry_overlaps(mixed) == pytest.approx((0.75, 0.25))
    assert qstate.classify_permutation_symmetry(mixed) == PermutationSymmetry.NEITHER


def test_purity(ghz3):
    assert qstate.purity(ghz3) == pytest.approx(1.0)
    assert qstate.purity(qstate.maximally_mixed((2, 2))) == pytest.approx(0.25)


def test_random_state_is_reproducible():
    a = qstate.random_state(4, seed=7, local_dims=(2, 2))
    b = qstate.random_state(4, seed=7, local_dims=(2, 2))
    assert np.array_equal(a.data, b.data)
    with pytest.raises(DimensionError):
        qstate.random_state(4, seed=7, local_dims=(2, 3))


@hyp_settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), dim=st.integers(1, 16))
def test_random_states_are_valid(seed, dim):
    rho = qstate.random_state(dim, seed=seed)
    assert np.trace(rho.data).real == pytest.approx(1.0)
    assert np.linalg.eigvalsh(rho.data)[0] >= -1e-10


@hyp_settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), dim=st.integers(1, 8))
def test_random_unitaries_are_unitary(seed, dim):
    u = qstate.random_unitary(dim, seed)
    assert np.allclose(u.conj().T @ u, np.eye(dim), atol=1e-10)


@pytest.mark.parametrize("d", [2, 3, 4, 5])
def test_parity_and_flip_are_dichotomic(d):
    for obs in (qstate.parity_observable(d), qstate.flip_observable(d)):
        assert np.allclose(obs.data @ obs.data, np.eye(d))


def test_density_matrix_validation():
    with pytest.raises(ValidationError):
        DensityMatrix(local_dims=(2,), data=np.eye(2))
    with pytest.raises(ValidationError):
        DensityMatrix(local_dims=(2,), data=np.eye(3) / 3)
    with pytest.raises(ValidationError):
        DensityMatrix(local_dims=(2,), data=np.diag([1.5, -0.5]))


def test_incomplete_kraus_rejected():
    with pytest.raises(ValidationError):
        KrausChannel(input_dim=2, output_dim=2, kraus_ops=[np.diag([1.0, 0.0])])


def test_payload_round_trip(ghz3):
    restored = DensityMatrix.from_json(ghz3.to_payload().model_dump_json())
    assert restored.local_dims == ghz3.local_dims
    assert np.allclose(restored.data, ghz3.data)


def test_depolarizing_one_half_of_bell_pair():
    paulis = [np.eye(2), PAULI_X, qstate.PAULI_Y, PAULI_Z]
    depolarize = KrausChannel(input_dim=2, output_dim=2, kraus_ops=[p / 2 for p in paulis])
    out = qstate.apply_channel(qstate.ghz_state(2, 2), depolarize, 0)
    np.testing.assert_allclose(out.data, np.eye(4) / 4, atol=1e-12)


@hyp_settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), dim=st.integers(2, 8))
def test_fidelity_symmetry_and_trace_distance_bound(seed, dim):
    rng = np.random.default_rng(seed)
    rho = qstate.random_state(dim, rng)
    sigma = qstate.random_state(dim, rng)
    f = qstate.fidelity(rho, sigma)
    assert f == pytest.approx(qstate.fidelity(sigma, rho), abs=1e-9)
    assert qstate.trace_norm(rho.data - sigma.data) / 2 <= np.sqrt(1 - f) + 1e-9


@hyp_settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), dim=st.integers(1, 16))
def test_hermitian_eigh_residual(seed, dim):
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    m = g + g.conj().T
    vals, vecs = qstate.hermitian_eigh(m)
    residual = np.linalg.norm(m @ vecs - vecs * vals, axis=0)
    assert residual.max() <= 1e-8 * max(np.linalg.norm(m, 2), 1.0)
    assert np.all(np.diff(vals) >= -1e-12)


def test_mean_purity_of_random_qubits():
    # Hilbert-Schmidt measure on a qubit: uniform Bloch ball, E[tr rho^2] = 2d/(d^2+1) = 0.8
    rng = np.random.default_rng(11)
    purities = [qstate.purity(qstate.random_state(2, rng)) for _ in range(1000)]
    assert np.mean(purities) == pytest.approx(0.8, abs=0.02)
