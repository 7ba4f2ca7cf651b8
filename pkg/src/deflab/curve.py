"""The testing curve ``f(t) = Tr(rho1 - t rho2)_+`` of a binary experiment.

``f`` is the best achievable value of ``Tr(rho1 - t rho2) M`` over tests
``0 <= M <= I``. It is convex, nonincreasing, bounded below by
``max(1 - t, 0)`` and piecewise analytic; its kinks (breakpoints) are the
``t >= 0`` where ``rho1 - t rho2`` is singular.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import linear_sum_assignment

from .errors import PreconditionError
from .experiment import BinaryExperiment, as_binary, normalize_support
from .linalg import eig_hermitian, kernel_projection, trace_norm

BREAKPOINT_TOL = 1e-8
RANK_TOL = 1e-10


def _pencil(E: BinaryExperiment, t: float) -> NDArray[np.complex128]:
    return E.rho1 - t * E.rho2


def f_value(E, t: float) -> float:
    """``Tr(rho1 - t rho2)_+``."""
    E = as_binary(E)
    # the pencil is Hermitian by construction, skip revalidation
    w = np.linalg.eigvalsh(_pencil(E, t))
    return float(np.sum(w[w > 0]))


def f_value_via_norm(E, t: float) -> float:
    """Same quantity through ``(||rho1 - t rho2||_1 + 1 - t) / 2``."""
    E = as_binary(E)
    return 0.5 * (trace_norm(_pencil(E, t)) + 1 - t)


def _zero_tol(E: BinaryExperiment, t: float) -> float:
    return 1e-10 * max(1.0, abs(t))


def np_projection(E, t: float, tol: float | None = None) -> tuple[NDArray, NDArray]:
    """Neyman-Pearson projections at threshold ``t``.

    Returns ``(P_plus, P_zero)``: the support of the positive part of
    ``rho1 - t rho2`` and its kernel. A test ``M`` is optimal at ``t``
    exactly when ``P_plus <= M <= P_plus + P_zero``.
    """
    E = as_binary(E)
    A = _pencil(E, t)
    eps = _zero_tol(E, t) if tol is None else tol
    w, V = np.linalg.eigh(A)
    Vp, V0 = V[:, w > eps], V[:, np.abs(w) <= eps]
    return Vp @ Vp.conj().T, V0 @ V0.conj().T


def is_optimal_test(E, t: float, M: NDArray, tol: float = 1e-8) -> bool:
    """Check ``M = P_plus + X`` with ``0 <= X <= P_zero``."""
    P, P0 = np_projection(E, t)
    X = np.asarray(M) - P
    w = np.linalg.eigvalsh((X + X.conj().T) / 2)
    w0 = np.linalg.eigvalsh(P0 - (X + X.conj().T) / 2)
    return bool(w[0] >= -tol and w0[0] >= -tol)


def _pencil_roots(E: BinaryExperiment) -> NDArray[np.float64]:
    """All ``t`` with ``det(rho1 - t rho2) = 0`` (with multiplicity), for full-support E.

    On ``Q = supp rho2`` with ``Q' = ker rho2`` the block ``rho1|Q'`` is
    invertible, so the determinant factors through the Schur complement
    ``S = A - C D^-1 C^*`` and the roots are the eigenvalues of
    ``B^-1/2 S B^-1/2`` with ``B = rho2|Q``.
    """
    n = E.dim
    w, V = np.linalg.eigh(E.rho2)
    r = int(np.sum(w > RANK_TOL))
    Q, Qp = V[:, n - r :], V[:, : n - r]
    A = Q.conj().T @ E.rho1 @ Q
    B = Q.conj().T @ E.rho2 @ Q
    if Qp.shape[1]:
        C = Q.conj().T @ E.rho1 @ Qp
        D = Qp.conj().T @ E.rho1 @ Qp
        S = A - C @ np.linalg.solve(D, C.conj().T)
    else:
        S = A
    wb, Vb = np.linalg.eigh(B)
    Bm = (Vb / np.sqrt(wb)) @ Vb.conj().T
    K = Bm @ S @ Bm
    roots = np.sort(np.clip(np.linalg.eigvalsh((K + K.conj().T) / 2), 0, None))
    # a singular rho1 shows up as rounding noise around 0
    roots[roots <= 1e-12 * max(1.0, roots[-1])] = 0.0
    return roots


def breakpoints(E, tol: float = BREAKPOINT_TOL) -> list[float]:
    """Sorted list of ``t >= 0`` where ``rho1 - t rho2`` has a kernel.

    The experiment is compressed to ``supp(rho1 + rho2)`` first.
    """
    E = normalize_support(as_binary(E))
    roots = _pencil_roots(E)
    out: list[float] = []
    for r in roots:
        if out and abs(r - out[-1]) <= 1e-9 * max(1.0, r):
            continue
        if np.min(np.abs(np.linalg.eigvalsh(_pencil(E, r)))) <= tol * max(1.0, r):
            out.append(float(r))
    return out


def extremal_ts(E) -> tuple[float, float]:
    """``(t1, tmax)``: the extremal values with ``t1 rho2 <= rho1 <= tmax rho2``.

    ``t1 = 0`` when ``supp rho2`` is not inside ``supp rho1``; ``tmax = inf``
    when ``supp rho1`` is not inside ``supp rho2``.
    """
    E = normalize_support(as_binary(E))
    roots = _pencil_roots(E)
    rho1_full = np.linalg.eigvalsh(E.rho1)[0] > RANK_TOL
    rho2_full = np.linalg.eigvalsh(E.rho2)[0] > RANK_TOL
    t1 = float(roots[0]) if rho1_full else 0.0
    tmax = float(roots[-1]) if rho2_full else math.inf
    return t1, tmax


@dataclass(frozen=True)
class _Clusters:
    values: NDArray[np.float64]
    projections: list[NDArray[np.complex128]]
    multiplicities: list[int]


def _clusters_at(E: BinaryExperiment, s: float) -> _Clusters:
    es = eig_hermitian(_pencil(E, s))
    vals = es.cluster_values()
    return _Clusters(vals, [es.cluster_projection(k) for k in range(len(es.clusters))], [len(c) for c in es.clusters])


def _is_exceptional(E: BinaryExperiment, s: float, h: float = 1e-4) -> bool:
    n_here = len(_clusters_at(E, s).values)
    return any(len(_clusters_at(E, s + d).values) > n_here for d in (-h, h))


def eigencurve_derivative(E, s: float, i: int) -> float:
    """Slope of the ``i``-th distinct eigenvalue branch (descending) at ``s``.

    Uses ``lambda_i'(s) = -Tr(rho2 P_i(s)) / m_i``. Raises PreconditionError
    at exceptional points where distinct branches collide.
    """
    E = as_binary(E)
    cl = _clusters_at(E, s)
    if not 0 <= i < len(cl.values):
        raise IndexError(f"branch index {i} out of range (0..{len(cl.values) - 1})")
    if _is_exceptional(E, s):
        raise PreconditionError(f"exceptional point: eigenvalue branches collide at s={s}")
    return float(-np.real(np.trace(E.rho2 @ cl.projections[i])) / cl.multiplicities[i])


def f_derivative(E, s: float) -> float:
    """Derivative of the testing curve at a non-breakpoint ``s``: ``-Tr(rho2 P_{s,+})``."""
    E = as_binary(E)
    w = np.linalg.eigvalsh(_pencil(E, s))
    if np.min(np.abs(w)) <= BREAKPOINT_TOL * max(1.0, abs(s)):
        raise PreconditionError(f"testing curve is not differentiable at breakpoint s={s}")
    P, _ = np_projection(E, s)
    return float(-np.real(np.trace(E.rho2 @ P)))


@dataclass
class EigenBranch:
    """One analytic eigenvalue branch of ``rho1 - t rho2`` sampled on a grid."""

    index: int
    multiplicity: int
    ts: NDArray[np.float64]
    values: NDArray[np.float64]
    projections: list[NDArray[np.complex128]] = field(repr=False)


def eigen_branches(E, ts: NDArray[np.float64] | None = None) -> list[EigenBranch]:
    """Track eigen-branches across a grid by maximal projection overlap.

    Branch multiplicities are read off at the middle grid point and kept
    fixed; walking outwards from there, each eigenvector is assigned to the
    branch whose previous projection it overlaps most (capacity =
    multiplicity). Labels through a collision follow overlap, not analytic
    continuation.
    """
    E = normalize_support(as_binary(E))
    if ts is None:
        bps = breakpoints(E)
        cap = 10 * ((max(bps) if bps else 0.0) + 1)
        _, tmax = extremal_ts(E)
        ts = np.arange(0.0, min(tmax, cap) + 1e-12, 1e-2)
    ts = np.asarray(ts, dtype=float)
    n = E.dim
    k0 = len(ts) // 2
    ref = _clusters_at(E, float(ts[k0]))
    mult = ref.multiplicities
    slots = np.repeat(np.arange(len(mult)), mult)
    vals = np.zeros((len(mult), len(ts)))
    projs: list[list] = [[None] * len(ts) for _ in mult]
    for order in (range(k0, len(ts)), range(k0 - 1, -1, -1)):
        prev = list(ref.projections)
        for k in order:
            w, V = np.linalg.eigh(_pencil(E, ts[k]))
            overlap = np.real(np.einsum("ja,bjk,ka->ab", V.conj(), np.array(prev)[slots], V))
            rows, cols = linear_sum_assignment(-overlap)
            assign = np.empty(n, int)
            assign[rows] = slots[cols]
            for b in range(len(mult)):
                Vb = V[:, assign == b]
                prev[b] = Vb @ Vb.conj().T
                vals[b, k] = w[assign == b].mean()
                projs[b][k] = prev[b]
    return [EigenBranch(b, mult[b], ts, vals[b], projs[b]) for b in range(len(mult))]


class TestingCurve:
    """Cached analytics of the testing curve of one binary experiment."""

    __test__ = False  # not a pytest class

    def __init__(self, E):
        self.experiment = normalize_support(as_binary(E))

    def __call__(self, t):
        if np.ndim(t):
            return np.array([f_value(self.experiment, float(x)) for x in np.ravel(t)]).reshape(np.shape(t))
        return f_value(self.experiment, float(t))

    @cached_property
    def breakpoints(self) -> list[float]:
        return breakpoints(self.experiment)

    @cached_property
    def _extremal(self) -> tuple[float, float]:
        return extremal_ts(self.experiment)

    @property
    def t1(self) -> float:
        return self._extremal[0]

    @property
    def tmax(self) -> float:
        return self._extremal[1]

    @cached_property
    def branches(self) -> list[EigenBranch]:
        return eigen_branches(self.experiment)

    def derivative(self, s: float) -> float:
        return f_derivative(self.experiment, s)

    def tail_value(self) -> float:
        """``lim f(t)`` as ``t -> inf``, which is ``Tr(rho1 P)`` with ``P`` the kernel projection of ``rho2``.

        The curve reaches this value at the last breakpoint only when that
        kernel is invariant under ``rho1``; otherwise it approaches it like ``1/t``.
        """
        E = self.experiment
        return float(np.real(np.trace(E.rho1 @ kernel_projection(E.rho2))))

    def sample(self, ts) -> NDArray[np.float64]:
        return np.asarray(self(np.asarray(ts, dtype=float)))

