"""Linear maps between matrix algebras in Choi form.

Convention: for a map T from dim_in x dim_in to dim_out x dim_out matrices
the Choi matrix is ``J = sum_ij |i><j| (x) T(|i><j|)`` (input factor first).
Then ``T(a) = Tr_in[(a^T (x) I) J]``, T is completely positive iff J is PSD
and trace preserving iff ``Tr_out J = I``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import ValidationError
from .linalg import TOL_NUM, as_hermitian, hermitian_basis


@dataclass(frozen=True, eq=False)
class ChoiMatrix:
    matrix: NDArray[np.complex128]
    dim_in: int
    dim_out: int

    def __post_init__(self):
        J = as_hermitian(self.matrix, tol=1e-8)
        if J.shape[0] != self.dim_in * self.dim_out:
            raise ValidationError(
                f"Choi matrix has size {J.shape[0]}, expected {self.dim_in}*{self.dim_out}"
            )
        object.__setattr__(self, "matrix", J)

    def _blocks(self) -> NDArray:
        # blocks[i, j] = T(|i><j|)
        d, e = self.dim_in, self.dim_out
        return self.matrix.reshape(d, e, d, e).transpose(0, 2, 1, 3)

    def apply(self, a: ArrayLike) -> NDArray[np.complex128]:
        a = np.asarray(a, dtype=complex)
        if a.shape != (self.dim_in, self.dim_in):
            raise ValidationError(f"input has shape {a.shape}, map expects dim {self.dim_in}")
        return np.einsum("ij,ijkl->kl", a, self._blocks())

    __call__ = apply

    def partial_trace_out(self) -> NDArray[np.complex128]:
        d, e = self.dim_in, self.dim_out
        return np.trace(self.matrix.reshape(d, e, d, e), axis1=1, axis2=3)

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.matrix)[0])

    def compose_before(self, other: "ChoiMatrix") -> "ChoiMatrix":
        """Choi matrix of ``other o self`` (apply self first)."""
        if other.dim_in != self.dim_out:
            raise ValidationError("dimension mismatch in composition")
        return choi_from_map(lambda a: other.apply(self.apply(a)), self.dim_in, other.dim_out)


def choi_from_map(func: Callable[[NDArray], ArrayLike], dim_in: int, dim_out: int) -> ChoiMatrix:
    """Build the Choi matrix of a linear map given as a Python callable."""
    J = np.zeros((dim_in * dim_out, dim_in * dim_out), complex)
    for i in range(dim_in):
        for j in range(dim_in):
            E = np.zeros((dim_in, dim_in), complex)
            E[i, j] = 1
            out = np.asarray(func(E), dtype=complex)
            if out.shape != (dim_out, dim_out):
                raise ValidationError(f"map returned shape {out.shape}, expected ({dim_out}, {dim_out})")
            J[i * dim_out : (i + 1) * dim_out, j * dim_out : (j + 1) * dim_out] = out
    return ChoiMatrix(J, dim_in, dim_out)


def choi_from_kraus(kraus: list[ArrayLike]) -> ChoiMatrix:
    Ks = [np.asarray(K, dtype=complex) for K in kraus]
    dout, din = Ks[0].shape
    return choi_from_map(lambda a: sum(K @ a @ K.conj().T for K in Ks), din, dout)


def is_completely_positive(T: ChoiMatrix, tol: float = TOL_NUM) -> bool:
    return T.min_eigenvalue() >= -tol


def trace_defect(T: ChoiMatrix) -> float:
    """Largest |Tr T(a) - Tr a| over a Frobenius-orthonormal Hermitian basis."""
    return float(max(abs(np.trace(T.apply(a)) - np.trace(a)) for a in hermitian_basis(T.dim_in)))


def is_trace_preserving(T: ChoiMatrix, tol: float = 1e-8) -> bool:
    return float(np.max(np.abs(T.partial_trace_out() - np.eye(T.dim_in)))) <= tol


@dataclass(frozen=True, eq=False)
class Channel:
    """A completely positive trace preserving map, validated on construction."""

    choi: ChoiMatrix
    tol: float = 1e-8

    def __post_init__(self):
        if not is_completely_positive(self.choi, self.tol):
            raise ValidationError(
                f"map is not completely positive (min Choi eigenvalue {self.choi.min_eigenvalue():.3e})"
            )
        if not is_trace_preserving(self.choi, self.tol):
            raise ValidationError("map is not trace preserving")

    @property
    def dim_in(self) -> int:
        return self.choi.dim_in

    @property
    def dim_out(self) -> int:
        return self.choi.dim_out

    def __call__(self, a: ArrayLike) -> NDArray[np.complex128]:
        return self.choi.apply(a)

    @classmethod
    def from_kraus(cls, kraus: list[ArrayLike]) -> "Channel":
        return cls(choi_from_kraus(kraus))


def identity_channel(n: int) -> Channel:
    return Channel(choi_from_map(lambda a: a, n, n))


def depolarizing_channel(n: int, p: float = 1.0) -> Channel:
    """``a -> (1-p) a + p Tr(a) I/n``; ``p = 1`` is the completely depolarising map."""
    return Channel(choi_from_map(lambda a: (1 - p) * a + p * np.trace(a) * np.eye(n) / n, n, n))


def measure_prepare_channel(povm_elements: list[ArrayLike], states: list[ArrayLike]) -> Channel:
    """``a -> sum_d Tr(M_d a) tau_d``."""
    Ms = [np.asarray(M, dtype=complex) for M in povm_elements]
    taus = [np.asarray(t, dtype=complex) for t in states]
    return Channel(
        choi_from_map(lambda a: sum(np.trace(M @ a) * t for M, t in zip(Ms, taus)), Ms[0].shape[0], taus[0].shape[0])
    )


def transpose_map(n: int) -> ChoiMatrix:
    return choi_from_map(lambda a: a.T, n, n)


def random_channel(dim_in: int, dim_out: int, rng: np.random.Generator, n_kraus: int | None = None) -> Channel:
    """Haar-ish random channel from a random isometry (Stinespring dilation)."""
    r = n_kraus or dim_in * dim_out
    if r * dim_out < dim_in:
        raise ValidationError(f"{r} Kraus operators into dim {dim_out} cannot preserve trace on dim {dim_in}")
    G = rng.normal(size=(dim_out * r, dim_in)) + 1j * rng.normal(size=(dim_out * r, dim_in))
    Q, _ = np.linalg.qr(G)
    return Channel.from_kraus([Q[k * dim_out : (k + 1) * dim_out] for k in range(r)])
