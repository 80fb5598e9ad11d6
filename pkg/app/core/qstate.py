"""Dense linear algebra for multipartite density matrices, observables and channels.

Index convention: party 0 is the most significant tensor factor, so the basis
index of |i_0 ... i_{n-1}> is sum_k i_k * prod_{j>k} d_j.
"""

import itertools
import math
import string
from collections.abc import Iterable, Sequence
from enum import StrEnum

import numpy as np
import structlog
from scipy.stats import unitary_group

from app.config import settings
from app.core.exceptions import DimensionError, DomainError, SolverError
from app.models.quantum import (
    DensityMatrix,
    DichotomicObservable,
    KrausChannel,
    Observable,
)

logger = structlog.get_logger()

Seed = int | np.random.Generator | None

IDENTITY_2 = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


class PermutationSymmetry(StrEnum):
    SYMMETRIC = "symmetric"
    ANTISYMMETRIC = "antisymmetric"
    NEITHER = "neither"


def as_generator(seed: Seed) -> np.random.Generator:
    """Caller-owned generator from an int seed (or pass-through)."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def check_total_dim(dims: Sequence[int]) -> int:
    total = math.prod(dims)
    if total > settings.max_total_dim:
        raise DimensionError(
            f"Total dimension {total} exceeds the supported maximum {settings.max_total_dim}"
        )
    return total


# --- raw tensor helpers ------------------------------------------------------

def as_tensor(data: np.ndarray, dims: Sequence[int]) -> np.ndarray:
    return data.reshape(tuple(dims) * 2)


def apply_row_op(t: np.ndarray, op: np.ndarray, party: int) -> np.ndarray:
    """Left-multiply the ket index of ``party`` of a 2n-index tensor by ``op``."""
    return np.moveaxis(np.tensordot(op, t, axes=([1], [party])), 0, party)


def apply_col_op(t: np.ndarray, op: np.ndarray, party: int, n: int) -> np.ndarray:
    """Right-multiply the bra index of ``party`` by ``op``^dagger."""
    return np.moveaxis(np.tensordot(t, op.conj(), axes=([n + party], [1])), -1, n + party)


def trace_except(t: np.ndarray, n: int, keep: Sequence[int]) -> np.ndarray:
    """Contract every party not in ``keep`` of a 2n-index tensor; returns a matrix."""
    letters = string.ascii_letters
    if 2 * n > len(letters):
        raise DimensionError(f"Too many subsystems ({n}) for index contraction")
    rows = list(letters[:n])
    cols = list(letters[n:2 * n])
    for p in range(n):
        if p not in keep:
            cols[p] = rows[p]
    out = "".join(rows[p] for p in keep) + "".join(cols[p] for p in keep)
    reduced = np.einsum("".join(rows) + "".join(cols) + "->" + out, t)
    side = math.prod(t.shape[p] for p in keep) if keep else 1
    return reduced.reshape(side, side)


def partial_trace_data(data: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    return trace_except(as_tensor(data, dims), len(dims), sorted(keep))


def apply_kraus_data(
    data: np.ndarray, dims: Sequence[int], party: int, kraus_ops: Iterable[np.ndarray]
) -> np.ndarray:
    """Apply a local Kraus map on ``party``; returns the matrix over the new dims."""
    n = len(dims)
    t = as_tensor(data, dims)
    out = None
    for k in kraus_ops:
        term = apply_col_op(apply_row_op(t, k, party), k, party, n)
        out = term if out is None else out + term
    assert out is not None
    side = int(math.isqrt(out.size))
    return out.reshape(side, side)


def permute_subsystems(data: np.ndarray, dims: Sequence[int], order: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors so that new party j is old party ``order[j]``."""
    n = len(dims)
    t = as_tensor(data, dims)
    axes = list(order) + [n + p for p in order]
    side = data.shape[0]
    return t.transpose(axes).reshape(side, side)


def embed_operator(op: np.ndarray, party: int, dims: Sequence[int]) -> np.ndarray:
    """I ⊗ ... ⊗ op ⊗ ... ⊗ I with ``op`` on ``party``."""
    left = math.prod(dims[:party])
    right = math.prod(dims[party + 1:])
    return np.kron(np.kron(np.eye(left), op), np.eye(right))


def psd_sqrt(m: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(m)
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.conj().T


def hermitian_eigh(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix with a residual check."""
    vals, vecs = np.linalg.eigh(m)
    scale = max(float(np.linalg.norm(m, 2)), 1.0)
    residual = np.linalg.norm(m @ vecs - vecs * vals, axis=0)
    if residual.size and float(residual.max()) > settings.eigen_residual_tol * scale:
        raise SolverError(f"Eigen residual {residual.max():.2e} above tolerance")
    return vals, vecs


def _check_keep(keep: Iterable[int], n: int) -> list[int]:
    kept = sorted(set(keep))
    if not kept:
        raise DomainError("partial_trace needs at least one party to keep")
    if kept[0] < 0 or kept[-1] >= n:
        raise DimensionError(f"Party index out of range for {n} parties: {kept}")
    return kept


# --- operations --------------------------------------------------------------

def tensor_product[T: (DensityMatrix, Observable, np.ndarray)](a: T, b: T) -> T:
    """Kronecker product with ``a``'s indices most significant."""
    if isinstance(a, np.ndarray) and isinstance(b, np.ndarray):
        return np.kron(a, b)
    if isinstance(a, DensityMatrix) and isinstance(b, DensityMatrix):
        return DensityMatrix(
            local_dims=a.local_dims + b.local_dims, data=np.kron(a.data, b.data)
        )
    if isinstance(a, Observable) and isinstance(b, Observable):
        return Observable(local_dims=a.local_dims + b.local_dims, data=np.kron(a.data, b.data))
    raise TypeError("tensor_product operands must have the same kind")


def partial_trace(rho: DensityMatrix, keep: Iterable[int]) -> DensityMatrix:
    """Trace out every party not in ``keep``; kept parties stay in ascending order."""
    kept = _check_keep(keep, rho.num_parties)
    data = partial_trace_data(rho.data, rho.local_dims, kept)
    return DensityMatrix(local_dims=tuple(rho.local_dims[p] for p in kept), data=data)


def pure_state(vector: Sequence[complex] | np.ndarray, local_dims: Sequence[int]) -> DensityMatrix:
    psi = np.asarray(vector, dtype=complex).reshape(-1)
    norm = np.linalg.norm(psi)
    if norm == 0:
        raise DomainError("Zero vector is not a state")
    psi = psi / norm
    return DensityMatrix(local_dims=tuple(local_dims), data=np.outer(psi, psi.conj()))


def basis_state(local_dims: Sequence[int], indices: Sequence[int]) -> DensityMatrix:
    """Projector onto the computational basis state |i_0 ... i_{n-1}>."""
    index = int(np.ravel_multi_index(tuple(indices), tuple(local_dims)))
    psi = np.zeros(math.prod(local_dims), dtype=complex)
    psi[index] = 1.0
    return pure_state(psi, local_dims)


def maximally_mixed(local_dims: Sequence[int]) -> DensityMatrix:
    dim = check_total_dim(local_dims)
    return DensityMatrix(local_dims=tuple(local_dims), data=np.eye(dim) / dim)


def ghz_vector(d: int, n: int) -> np.ndarray:
    psi = np.zeros(d**n, dtype=complex)
    stride = sum(d**k for k in range(n))
    psi[[i * stride for i in range(d)]] = 1.0 / math.sqrt(d)
    return psi


def ghz_state(d: int, n: int) -> DensityMatrix:
    """Projector onto sum_i |i...i>/sqrt(d) for n parties of local dimension d."""
    if d < 2 or n < 2:
        raise DomainError(f"GHZ state needs d >= 2 and n >= 2 (got d={d}, n={n})")
    check_total_dim([d] * n)
    return pure_state(ghz_vector(d, n), [d] * n)


def noisy_ghz(d: int, n: int, p: float) -> DensityMatrix:
    """p * GHZ + (1 - p) * identity / d^n."""
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"Visibility p must lie in [0, 1] (got {p})")
    ghz = ghz_state(d, n)
    dim = d**n
    return DensityMatrix(
        local_dims=ghz.local_dims, data=p * ghz.data + (1.0 - p) * np.eye(dim) / dim
    )


def w_state(n: int) -> DensityMatrix:
    """(|10...0> + |01...0> + ... + |0...01>)/sqrt(n) on n qubits."""
    psi = np.zeros(2**n, dtype=complex)
    for k in range(n):
        psi[2 ** (n - 1 - k)] = 1.0
    return pure_state(psi, [2] * n)


def antisymmetric_state(d: int) -> DensityMatrix:
    """Totally antisymmetric state of d qudits of dimension d."""
    psi = np.zeros(d**d, dtype=complex)
    for perm in itertools.permutations(range(d)):
        psi[int(np.ravel_multi_index(perm, (d,) * d))] = _permutation_sign(perm)
    return pure_state(psi, [d] * d)


def purity(rho: DensityMatrix) -> float:
    return float(np.real(np.trace(rho.data @ rho.data)))


def fidelity(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Uhlmann fidelity |sqrt(rho) sqrt(sigma)|_1^2."""
    if rho.local_dims != sigma.local_dims:
        raise DimensionError(f"Dimension mismatch: {rho.local_dims} vs {sigma.local_dims}")
    singular = np.linalg.svd(psd_sqrt(rho.data) @ psd_sqrt(sigma.data), compute_uv=False)
    return float(np.clip(np.sum(singular) ** 2, 0.0, 1.0))


def trace_norm(m: np.ndarray | Observable | DensityMatrix) -> float:
    """Sum of absolute eigenvalues of a Hermitian matrix."""
    data = m.data if isinstance(m, Observable | DensityMatrix) else np.asarray(m, dtype=complex)
    if data.ndim != 2 or data.shape[0] != data.shape[1]:
        raise DimensionError("trace_norm needs a square matrix")
    if np.max(np.abs(data - data.conj().T)) > settings.hermitian_tol:
        raise DomainError("trace_norm expects a Hermitian matrix")
    return float(np.sum(np.abs(np.linalg.eigvalsh(data))))


def expectation(rho: DensityMatrix, obs: Observable) -> float:
    """tr(rho * obs)."""
    if rho.local_dims != obs.local_dims:
        raise DimensionError(f"Dimension mismatch: {rho.local_dims} vs {obs.local_dims}")
    return float(np.real(np.sum(rho.data * obs.data.T)))


def apply_channel(rho: DensityMatrix, channel: KrausChannel, party: int) -> DensityMatrix:
    """Apply a local channel on ``party``; that party's dimension becomes output_dim."""
    if not 0 <= party < rho.num_parties:
        raise DimensionError(f"Party {party} out of range")
    if channel.input_dim != rho.local_dims[party]:
        raise DimensionError(
            f"Channel input dim {channel.input_dim} != local dim {rho.local_dims[party]}"
        )
    data = apply_kraus_data(rho.data, rho.local_dims, party, channel.kraus_ops)
    dims = list(rho.local_dims)
    dims[party] = channel.output_dim
    return DensityMatrix(local_dims=tuple(dims), data=data)


def apply_multiparty_channel(
    rho: DensityMatrix, channel: KrausChannel, parties: Sequence[int]
) -> DensityMatrix:
    """Apply a dimension-preserving channel jointly on ``parties`` (e.g. an LOCC round)."""
    parties = list(parties)
    n = rho.num_parties
    if len(set(parties)) != len(parties) or any(not 0 <= p < n for p in parties):
        raise DimensionError(f"Invalid party list {parties}")
    joint = math.prod(rho.local_dims[p] for p in parties)
    if channel.input_dim != joint or channel.output_dim != joint:
        raise DimensionError(f"Channel dims must equal the joint dimension {joint}")
    rest = [p for p in range(n) if p not in parties]
    order = parties + rest
    dims = [rho.local_dims[p] for p in order]
    grouped = permute_subsystems(rho.data, rho.local_dims, order)
    merged = [joint, math.prod(dims[len(parties):])]
    out = apply_kraus_data(grouped, merged, 0, channel.kraus_ops)
    inverse = [order.index(p) for p in range(n)]
    return DensityMatrix(
        local_dims=rho.local_dims, data=permute_subsystems(out, dims, inverse)
    )


def compose_channels(first: KrausChannel, second: KrausChannel) -> KrausChannel:
    """The channel ``second`` after ``first``."""
    if first.output_dim != second.input_dim:
        raise DimensionError("Channels cannot be composed: dimension mismatch")
    ops = [b @ a for a in first.kraus_ops for b in second.kraus_ops]
    return KrausChannel(input_dim=first.input_dim, output_dim=second.output_dim, kraus_ops=ops)


def partial_transpose(rho: DensityMatrix, party: int) -> np.ndarray:
    n = rho.num_parties
    t = as_tensor(rho.data, rho.local_dims)
    axes = list(range(2 * n))
    axes[party], axes[n + party] = axes[n + party], axes[party]
    return t.transpose(axes).reshape(rho.dim, rho.dim)


def is_npt(rho: DensityMatrix, party: int = 0) -> tuple[bool, float]:
    """Negative partial transpose test; returns (NPT, minimum eigenvalue)."""
    min_eig = float(np.linalg.eigvalsh(partial_transpose(rho, party))[0])
    return min_eig < -settings.npt_tol, min_eig


def _permutation_sign(perm: Sequence[int]) -> int:
    inversions = sum(
        1 for i in range(len(perm)) for j in range(i + 1, len(perm)) if perm[i] > perm[j]
    )
    return -1 if inversions % 2 else 1


def symmetry_overlaps(rho: DensityMatrix) -> tuple[float, float]:
    """(tr(P_sym rho), tr(P_anti rho)) via the permutation group average."""
    dims = set(rho.local_dims)
    if len(dims) != 1:
        raise DimensionError(f"Permutation symmetry needs equal local dims, got {rho.local_dims}")
    (d,) = dims
    n = rho.num_parties
    index = np.arange(rho.dim).reshape((d,) * n)
    columns = np.arange(rho.dim)
    sym = anti = 0.0
    for perm in itertools.permutations(range(n)):
        rows = index.transpose(perm).reshape(-1)
        value = float(np.real(np.sum(rho.data[rows, columns])))
        sym += value
        anti += _permutation_sign(perm) * value
    count = math.factorial(n)
    return sym / count, anti / count


def classify_permutation_symmetry(rho: DensityMatrix) -> PermutationSymmetry:
    sym, anti = symmetry_overlaps(rho)
    if sym >= 1.0 - settings.symmetry_tol:
        return PermutationSymmetry.SYMMETRIC
    if anti >= 1.0 - settings.symmetry_tol:
        return PermutationSymmetry.ANTISYMMETRIC
    return PermutationSymmetry.NEITHER


def random_state(
    dim: int, seed: Seed = None, local_dims: Sequence[int] | None = None
) -> DensityMatrix:
    """G G^dagger / tr(G G^dagger) for a standard complex Gaussian (Ginibre) G."""
    if dim < 1:
        raise DomainError("Dimension must be positive")
    dims = tuple(local_dims) if local_dims is not None else (dim,)
    if math.prod(dims) != dim:
        raise DimensionError(f"local_dims {dims} do not multiply to {dim}")
    rng = as_generator(seed)
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    m = g @ g.conj().T
    m = (m + m.conj().T) / 2
    return DensityMatrix(local_dims=dims, data=m / np.real(np.trace(m)))


def random_unitary(dim: int, seed: Seed = None) -> np.ndarray:
    """Haar-random unitary."""
    if dim < 1:
        raise DomainError("Dimension must be positive")
    if dim == 1:
        return np.ones((1, 1), dtype=complex)
    return np.asarray(unitary_group.rvs(dim, random_state=as_generator(seed)), dtype=complex)


def parity_observable(d: int) -> DichotomicObservable:
    """diag(+1, -1, +1, ...): the Pauli Z for d = 2."""
    return DichotomicObservable(
        local_dims=(d,), data=np.diag([(-1.0) ** j for j in range(d)])
    )


def flip_observable(d: int) -> DichotomicObservable:
    """Swaps levels 2j <-> 2j+1 (the Pauli X for d = 2); a trailing odd level is fixed."""
    m = np.zeros((d, d))
    for j in range(0, d - 1, 2):
        m[j, j + 1] = m[j + 1, j] = 1.0
    if d % 2:
        m[d - 1, d - 1] = 1.0
    return DichotomicObservable(local_dims=(d,), data=m)
