"""Quantum statistical experiments, measurements and the classical bridge.

An experiment is a finite family of density matrices on one Hilbert space.
A POVM ``M = {M_d}`` acts on a state as ``M(rho)(d) = Tr M_d rho``; its
"embedding" ``M_hat`` maps a function ``f`` on outcomes back to the matrix
``sum_d f(d) M_d / Tr M_d``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .channels import Channel
from .errors import PreconditionError, ValidationError
from .linalg import TOL_NUM, as_hermitian, commutator_norm, support_basis

STATE_TOL = 1e-9


def density_matrix(rho: ArrayLike, tol: float = STATE_TOL) -> NDArray[np.complex128]:
    """Validate a density matrix (Hermitian, PSD, unit trace) and return it as an array."""
    R = as_hermitian(rho, tol=max(tol, 1e-10))
    if R.shape[0] == 0:
        raise ValidationError("empty density matrix")
    tr = np.trace(R).real
    if abs(tr - 1) > tol:
        raise ValidationError(f"density matrix has trace {tr!r}, expected 1")
    lmin = np.linalg.eigvalsh(R)[0]
    if lmin < -tol:
        raise ValidationError(f"density matrix is not positive (min eigenvalue {lmin:.3e})")
    return R


@dataclass(frozen=True, eq=False)
class Experiment:
    """A family of density matrices ``rho_theta`` on a common space."""

    states: tuple[NDArray[np.complex128], ...]

    def __post_init__(self):
        states = tuple(density_matrix(r) for r in self.states)
        if not states:
            raise ValidationError("an experiment needs at least one state")
        dims = {r.shape[0] for r in states}
        if len(dims) != 1:
            raise ValidationError(f"states have different dimensions {sorted(dims)}")
        object.__setattr__(self, "states", states)

    @property
    def dim(self) -> int:
        return self.states[0].shape[0]

    @property
    def n_params(self) -> int:
        return len(self.states)

    def __len__(self) -> int:
        return len(self.states)

    def __iter__(self):
        return iter(self.states)


class BinaryExperiment(Experiment):
    """An ordered pair of states ``(rho1, rho2)``."""

    def __init__(self, rho1: ArrayLike, rho2: ArrayLike):
        super().__init__((rho1, rho2))

    def __post_init__(self):
        super().__post_init__()
        if len(self.states) != 2:
            raise ValidationError("a binary experiment has exactly two states")

    @classmethod
    def from_experiment(cls, E: Experiment) -> "BinaryExperiment":
        if isinstance(E, BinaryExperiment):
            return E
        if len(E.states) != 2:
            raise ValidationError(f"expected two states, got {len(E.states)}")
        return cls(*E.states)

    @property
    def rho1(self) -> NDArray[np.complex128]:
        return self.states[0]

    @property
    def rho2(self) -> NDArray[np.complex128]:
        return self.states[1]

    def swapped(self) -> "BinaryExperiment":
        return BinaryExperiment(self.rho2, self.rho1)

    def __repr__(self) -> str:
        return f"BinaryExperiment(dim={self.dim})"


@dataclass(frozen=True, eq=False)
class ClassicalBinaryExperiment:
    """A pair of probability vectors on a finite outcome set."""

    p: NDArray[np.float64]
    q: NDArray[np.float64]

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        q = np.asarray(self.q, dtype=float)
        if p.ndim != 1 or p.shape != q.shape or p.size == 0:
            raise ValidationError("p and q must be non-empty vectors of equal length")
        for name, v in (("p", p), ("q", q)):
            if np.any(v < 0):
                raise ValidationError(f"{name} has negative entries")
            if abs(v.sum() - 1) > 1e-12:
                raise ValidationError(f"{name} sums to {v.sum()!r}, expected 1")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    @property
    def n_outcomes(self) -> int:
        return self.p.size

    def to_quantum(self) -> BinaryExperiment:
        return BinaryExperiment(np.diag(self.p), np.diag(self.q))


def as_binary(E) -> BinaryExperiment:
    if isinstance(E, ClassicalBinaryExperiment):
        return E.to_quantum()
    return BinaryExperiment.from_experiment(E)


@dataclass(frozen=True, eq=False)
class Povm:
    """Positive operator valued measure ``{M_d}``: PSD elements summing to identity."""

    elements: tuple[NDArray[np.complex128], ...]
    tol: float = TOL_NUM

    def __post_init__(self):
        els = tuple(as_hermitian(M, tol=max(self.tol, 1e-10)) for M in self.elements)
        if not els:
            raise ValidationError("a POVM needs at least one element")
        n = els[0].shape[0]
        if any(M.shape != (n, n) for M in els):
            raise ValidationError("POVM elements have different shapes")
        for d, M in enumerate(els):
            lmin = np.linalg.eigvalsh(M)[0]
            if lmin < -self.tol:
                raise ValidationError(f"POVM element {d} is not positive (min eigenvalue {lmin:.3e})")
        dev = float(np.max(np.abs(sum(els) - np.eye(n))))
        if dev > self.tol:
            raise ValidationError(f"POVM elements do not sum to identity (deviation {dev:.3e})")
        object.__setattr__(self, "elements", els)

    @property
    def dim(self) -> int:
        return self.elements[0].shape[0]

    @property
    def n_outcomes(self) -> int:
        return len(self.elements)

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    @classmethod
    def computational(cls, n: int) -> "Povm":
        return cls(tuple(np.diag(np.eye(n)[i]).astype(complex) for i in range(n)))

    @classmethod
    def from_basis(cls, V: ArrayLike) -> "Povm":
        """Rank-one PVM from the orthonormal columns of ``V``."""
        V = np.asarray(V, dtype=complex)
        return cls(tuple(np.outer(V[:, i], V[:, i].conj()) for i in range(V.shape[1])))


@dataclass(frozen=True, eq=False)
class LossFunction:
    """Nonnegative loss table ``W[theta, d]``."""

    table: NDArray[np.float64]

    def __post_init__(self):
        W = np.asarray(self.table, dtype=float)
        if W.ndim != 2 or W.shape[1] < 1:
            raise ValidationError("loss table must be a 2-D array indexed [theta, d]")
        if np.any(W < 0):
            raise ValidationError("loss function must be nonnegative")
        object.__setattr__(self, "table", W)

    @property
    def n_params(self) -> int:
        return self.table.shape[0]

    @property
    def n_decisions(self) -> int:
        return self.table.shape[1]

    @property
    def row_norms(self) -> NDArray[np.float64]:
        return self.table.max(axis=1)

    @property
    def norm(self) -> float:
        return float(self.row_norms.sum())

    @property
    def coefficients(self) -> NDArray[np.float64]:
        """``A_theta = W_theta(0) - W_theta(1)`` for two-decision problems."""
        if self.n_decisions != 2:
            raise ValidationError("coefficients are defined for two decisions only")
        return self.table[:, 0] - self.table[:, 1]

    @classmethod
    def zero_one(cls, n: int) -> "LossFunction":
        """``W_theta(d) = [theta != d]``."""
        return cls(1.0 - np.eye(n))


def normalize_support(E: BinaryExperiment) -> BinaryExperiment:
    """Compress both states to the support of ``rho1 + rho2``."""
    V = support_basis(E.rho1 + E.rho2, tol=1e-10)
    if V.shape[1] == E.dim:
        return E
    r1 = V.conj().T @ E.rho1 @ V
    r2 = V.conj().T @ E.rho2 @ V
    # compression keeps the trace up to rounding; renormalise the residue away
    return BinaryExperiment(r1 / np.trace(r1).real, r2 / np.trace(r2).real)


def is_abelian(E: Experiment, tol: float = 1e-9) -> bool:
    S = E.states
    return all(commutator_norm(S[i], S[j]) <= tol for i in range(len(S)) for j in range(i + 1, len(S)))


def _joint_eigenbasis(states: Sequence[NDArray], rng: np.random.Generator, tol: float) -> NDArray | None:
    for _ in range(3):
        c = rng.uniform(0.05, 0.95, size=len(states))
        _, V = np.linalg.eigh(sum(ci * r for ci, r in zip(c, states)))
        if all(np.max(np.abs(V.conj().T @ r @ V - np.diag(np.diag(V.conj().T @ r @ V)))) <= tol for r in states):
            return V
    return None


def classical_reduction(E: Experiment, tol: float = 1e-9, seed: int = 0) -> tuple[NDArray[np.float64], Povm]:
    """Reduce an abelian experiment to a classical one.

    Returns ``(table, P)`` where ``P`` is the minimal PVM generating the
    algebra of the states and ``table[theta] = P(rho_theta)``. Outcomes are
    ordered by decreasing joint eigenvalue tuple.
    """
    if not is_abelian(E, tol=max(tol, 1e-9)):
        raise PreconditionError("classical reduction needs commuting states")
    V = _joint_eigenbasis(E.states, np.random.default_rng(seed), tol=1e-8)
    if V is None:
        raise PreconditionError("failed to find a joint eigenbasis")
    diag = np.array([np.real(np.diag(V.conj().T @ r @ V)) for r in E.states])  # [theta, i]
    blocks: list[tuple[NDArray, list[int]]] = []
    for i in range(V.shape[1]):
        for key, members in blocks:
            if np.max(np.abs(key - diag[:, i])) <= 1e-9:
                members.append(i)
                break
        else:
            blocks.append((diag[:, i], [i]))
    blocks.sort(key=lambda b: tuple(b[0]), reverse=True)
    projs = tuple(V[:, m] @ V[:, m].conj().T for _, m in blocks)
    P = Povm(projs)
    return np.array([apply_povm(P, r) for r in E.states]), P


def apply_povm(M: Povm, rho: ArrayLike) -> NDArray[np.float64]:
    """Outcome distribution ``d -> Tr M_d rho``."""
    R = np.asarray(rho, dtype=complex)
    if R.shape != (M.dim, M.dim):
        raise ValidationError(f"state has shape {R.shape}, POVM acts on dim {M.dim}")
    return np.array([np.real(np.sum(Md.T * R)) for Md in M.elements])


def povm_embed(M: Povm, f: ArrayLike) -> NDArray[np.complex128]:
    """``sum_d f(d) M_d / Tr M_d``."""
    f = np.asarray(f, dtype=float)
    if f.shape != (M.n_outcomes,):
        raise ValidationError(f"f has shape {f.shape}, expected ({M.n_outcomes},)")
    out = np.zeros((M.dim, M.dim), complex)
    for fd, Md in zip(f, M.elements):
        tr = np.trace(Md).real
        if tr <= 1e-12:
            raise ValidationError("embedding undefined: POVM element with zero trace")
        out += fd / tr * Md
    return out


def randomize(E: Experiment, T: Channel) -> Experiment:
    """Image of ``E`` under a channel; returns the same experiment class."""
    if T.dim_in != E.dim:
        raise ValidationError(f"channel input dim {T.dim_in} does not match experiment dim {E.dim}")
    images = [T(r) for r in E.states]
    if isinstance(E, BinaryExperiment):
        return BinaryExperiment(*images)
    return Experiment(tuple(images))


def risk(E: Experiment, W: LossFunction | ArrayLike, M: Povm) -> NDArray[np.float64]:
    """Per-parameter risk ``sum_d W_theta(d) Tr rho_theta M_d``."""
    table = W.table if isinstance(W, LossFunction) else LossFunction(W).table
    if table.shape != (E.n_params, M.n_outcomes):
        raise ValidationError(f"loss table shape {table.shape} does not match ({E.n_params}, {M.n_outcomes})")
    probs = np.array([apply_povm(M, r) for r in E.states])
    return np.sum(table * probs, axis=1)


def random_density(n: int, rng: np.random.Generator, rank: int | None = None) -> NDArray[np.complex128]:
    """Random density matrix (Ginibre ensemble, optional rank)."""
    k = rank or n
    G = rng.normal(size=(n, k)) + 1j * rng.normal(size=(n, k))
    R = G @ G.conj().T
    return R / np.trace(R).real


def random_binary(n: int, rng: np.random.Generator, rank: int | None = None) -> BinaryExperiment:
    return BinaryExperiment(random_density(n, rng, rank), random_density(n, rng, rank))
