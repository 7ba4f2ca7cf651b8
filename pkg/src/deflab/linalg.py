"""Dense Hermitian linear algebra used throughout the package.

Everything here works on small (dim <= 16) complex matrices held as numpy
arrays. Functions are pure and never modify their inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import ValidationError

TOL_HERM = 1e-10
TOL_EIG = 1e-10
TOL_NUM = 1e-9
CLUSTER_RTOL = 1e-8


def _scale(H: NDArray) -> float:
    # Frobenius norm bounds the spectral norm and avoids an SVD
    return max(1.0, float(np.linalg.norm(H))) if H.size else 1.0


def as_hermitian(H: ArrayLike, tol: float = TOL_HERM) -> NDArray[np.complex128]:
    """Return ``H`` as a square complex array, symmetrised.

    Raises ValidationError if ``H`` is not square or deviates from its
    adjoint by more than ``tol`` times its operator norm (floored at 1).
    """
    A = np.array(H, dtype=np.complex128)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValidationError("matrix has non-finite entries")
    dev = float(np.max(np.abs(A - A.conj().T))) if A.size else 0.0
    if dev > tol * _scale(A):
        raise ValidationError(f"matrix is not Hermitian (max |H - H^dag| = {dev:.3e})")
    return (A + A.conj().T) / 2


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """Eigen-decomposition of a Hermitian matrix.

    ``values`` are sorted in descending order, ``vectors[:, i]`` belongs to
    ``values[i]`` and ``clusters`` groups indices of numerically equal
    eigenvalues (threshold ``CLUSTER_RTOL * ||H||``).
    """

    values: NDArray[np.float64]
    vectors: NDArray[np.complex128]
    clusters: tuple[tuple[int, ...], ...]

    @property
    def dim(self) -> int:
        return len(self.values)

    def cluster_values(self) -> NDArray[np.float64]:
        return np.array([self.values[list(c)].mean() for c in self.clusters])

    def cluster_projection(self, k: int) -> NDArray[np.complex128]:
        V = self.vectors[:, list(self.clusters[k])]
        return V @ V.conj().T

    def reconstruct(self) -> NDArray[np.complex128]:
        return (self.vectors * self.values) @ self.vectors.conj().T


def _normalize_phase(V: NDArray) -> NDArray:
    V = V.copy()
    for j in range(V.shape[1]):
        col = V[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-12)
        if nz.size:
            z = col[nz[0]]
            V[:, j] = col * (abs(z) / z)
    return V


def group_clusters(values: NDArray, scale: float, rtol: float = CLUSTER_RTOL) -> tuple[tuple[int, ...], ...]:
    """Group consecutive entries of a descending sequence that lie within ``rtol * scale``."""
    groups: list[list[int]] = []
    for i, v in enumerate(values):
        if groups and abs(values[groups[-1][-1]] - v) <= rtol * scale:
            groups[-1].append(i)
        else:
            groups.append([i])
    return tuple(tuple(g) for g in groups)


def eig_hermitian(H: ArrayLike) -> EigenSystem:
    """Eigen-decomposition with deterministic ordering and phases.

    Eigenvalues come out descending. Within one numerically degenerate
    cluster the eigenvectors are ordered lexicographically after phase
    normalisation (first non-negligible component made real positive).
    """
    A = as_hermitian(H)
    if A.shape[0] == 0:
        return EigenSystem(np.zeros(0), np.zeros((0, 0), complex), ())
    w, V = np.linalg.eigh(A)
    w, V = w[::-1], _normalize_phase(V[:, ::-1])
    clusters = group_clusters(w, _scale(A))
    order: list[int] = []
    for c in clusters:
        keys = [tuple(np.round(np.concatenate([V[:, i].real, V[:, i].imag]), 12)) for i in c]
        order.extend(i for _, i in sorted(zip(keys, c), key=lambda kv: kv[0], reverse=True))
    w, V = w[order], V[:, order]
    return EigenSystem(values=w, vectors=V, clusters=group_clusters(w, _scale(A)))


def eigvalsh_desc(H: ArrayLike) -> NDArray[np.float64]:
    return np.linalg.eigvalsh(as_hermitian(H))[::-1]


def trace_norm(H: ArrayLike) -> float:
    """Sum of absolute eigenvalues."""
    return float(np.sum(np.abs(np.linalg.eigvalsh(as_hermitian(H)))))


def positive_part_trace(H: ArrayLike) -> float:
    """Trace of the positive part, i.e. the sum of the positive eigenvalues."""
    w = np.linalg.eigvalsh(as_hermitian(H))
    return float(np.sum(w[w > 0]))


def _zero_tol(A: NDArray, tol: float | None) -> float:
    return TOL_EIG * _scale(A) if tol is None else tol


def support_projection(H: ArrayLike, part: str = "full", tol: float | None = None) -> NDArray[np.complex128]:
    """Spectral projection of ``H`` onto its positive, negative or nonzero eigenspaces.

    ``part`` is one of ``"positive"``, ``"negative"`` or ``"full"``.
    Eigenvalues with modulus below ``tol`` count as zero.
    """
    A = as_hermitian(H)
    w, V = np.linalg.eigh(A)
    eps = _zero_tol(A, tol)
    if part == "positive":
        mask = w > eps
    elif part == "negative":
        mask = w < -eps
    elif part == "full":
        mask = np.abs(w) > eps
    else:
        raise ValueError(f"unknown part {part!r}")
    Vs = V[:, mask]
    return Vs @ Vs.conj().T


def kernel_projection(H: ArrayLike, tol: float | None = None) -> NDArray[np.complex128]:
    A = as_hermitian(H)
    return np.eye(A.shape[0]) - support_projection(A, "full", tol)


def support_basis(H: ArrayLike, tol: float | None = None) -> NDArray[np.complex128]:
    """Orthonormal columns spanning the support (range) of a Hermitian ``H``."""
    A = as_hermitian(H)
    w, V = np.linalg.eigh(A)
    return V[:, np.abs(w) > _zero_tol(A, tol)]


def psd_check(H: ArrayLike, tol: float = TOL_NUM) -> bool:
    A = as_hermitian(H, tol=max(TOL_HERM, tol))
    if A.shape[0] == 0:
        return True
    return bool(np.linalg.eigvalsh(A)[0] >= -tol)


def psd_sqrt(H: ArrayLike) -> NDArray[np.complex128]:
    w, V = np.linalg.eigh(as_hermitian(H))
    return (V * np.sqrt(np.clip(w, 0, None))) @ V.conj().T


def project_psd(H: NDArray) -> NDArray[np.complex128]:
    """Frobenius-nearest PSD matrix (negative eigenvalues clipped)."""
    A = (H + H.conj().T) / 2
    w, V = np.linalg.eigh(A)
    return (V * np.clip(w, 0, None)) @ V.conj().T


def commutator_norm(A: NDArray, B: NDArray) -> float:
    return float(np.linalg.norm(A @ B - B @ A))


def hermitian_basis(n: int) -> list[NDArray[np.complex128]]:
    """Frobenius-orthonormal basis of the real space of n x n Hermitian matrices."""
    basis = []
    for i in range(n):
        E = np.zeros((n, n), complex)
        E[i, i] = 1
        basis.append(E)
    s = 1 / np.sqrt(2)
    for i in range(n):
        for j in range(i + 1, n):
            E = np.zeros((n, n), complex)
            E[i, j] = E[j, i] = s
            basis.append(E)
            F = np.zeros((n, n), complex)
            F[i, j], F[j, i] = 1j * s, -1j * s
            basis.append(F)
    return basis


def hvec(H: NDArray) -> NDArray[np.float64]:
    """Isometric real coordinates of a Hermitian matrix in ``hermitian_basis``.

    ``hvec(A) @ hvec(B) == Tr(A B)`` for Hermitian A, B.
    """
    n = H.shape[0]
    iu = np.triu_indices(n, 1)
    off = H[iu] * np.sqrt(2)
    out = np.empty(n * n)
    out[:n] = np.real(np.diag(H))
    out[n::2] = off.real
    out[n + 1 :: 2] = off.imag
    return out


def hmat(x: NDArray, n: int) -> NDArray[np.complex128]:
    """Inverse of :func:`hvec`."""
    H = np.zeros((n, n), complex)
    H[np.diag_indices(n)] = x[:n]
    iu = np.triu_indices(n, 1)
    off = (x[n::2] + 1j * x[n + 1 :: 2]) / np.sqrt(2)
    H[iu] = off
    H[(iu[1], iu[0])] = off.conj()
    return H
