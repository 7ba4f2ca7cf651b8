"""Small convex programs over POVMs.

Two problems are solved here:

* Bayes-risk minimisation ``min_M sum_d Tr(B_d M_d)`` over POVMs ``M``.
* POVM matching ``min_M max_theta 1/2 ||M(rho_theta) - q_theta||_1``: how well
  can a measurement on ``E`` reproduce given outcome distributions.

Both are cast as linear programs over a product of PSD cones and an
orthant and handed to an ADMM iteration on the dual (alternating
projections onto the cone and onto the affine constraint set). The
returned values are always evaluated at an exactly valid POVM (upper
bound) and paired with a dual bound repaired to be exactly dual feasible
(lower bound), so the reported gap is trustworthy without trusting the
iteration itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import cho_factor, cho_solve

from .errors import ValidationError
from .experiment import Experiment, Povm, apply_povm
from .linalg import as_hermitian, hmat, hvec, project_psd

TAU_SOLVE = 1e-7
MAX_ITER = 100_000


@dataclass
class PovmSolveResult:
    """Outcome of a POVM optimisation.

    ``value`` is the objective at ``povm`` (an upper bound on the optimum),
    ``lower_bound`` a certified lower bound from a feasible dual point.
    """

    povm: Povm
    value: float
    lower_bound: float
    residuals: dict[str, float]
    iterations: int
    converged: bool
    restart_values: list[float] = field(default_factory=list)

    @property
    def gap(self) -> float:
        return self.value - self.lower_bound

    @property
    def status(self) -> str:
        return "converged" if self.converged else "max_iter"


@dataclass
class _ConicSolution:
    x: NDArray
    y: NDArray
    iterations: int
    converged: bool
    pres: float
    dres: float


class _ConeLP:
    """``min c.x  s.t.  A x = b,  x in PSD(n)^k x R_+^m``  in hvec coordinates."""

    def __init__(self, A: NDArray, b: NDArray, c: NDArray, n: int, k: int):
        self.A, self.b, self.c, self.n, self.k = A, b, c, n, k
        self.nn = n * n
        self.chol = cho_factor(A @ A.T)

    def project_cone(self, v: NDArray) -> NDArray:
        out = v.copy()
        n, nn = self.n, self.nn
        for d in range(self.k):
            sl = slice(d * nn, (d + 1) * nn)
            out[sl] = hvec(project_psd(hmat(v[sl], n)))
        tail = slice(self.k * nn, None)
        out[tail] = np.maximum(v[tail], 0)
        return out

    def solve(self, x0: NDArray, tol: float, max_iter: int, mu: float = 1.0) -> _ConicSolution:
        """ADMM on the dual ``max b.y  s.t.  c - A^T y in K``."""
        A, b, c = self.A, self.b, self.c
        x = x0.copy()
        z = np.zeros_like(c)
        nb, nc = 1 + np.linalg.norm(b), 1 + np.linalg.norm(c)
        pres = dres = np.inf
        for it in range(1, max_iter + 1):
            y = cho_solve(self.chol, mu * (b - A @ x) + A @ (c - z))
            Aty = A.T @ y
            V = c - Aty - mu * x
            z = self.project_cone(V)
            x = (z - V) / mu
            if it % 10 == 0 or it == max_iter:
                pres = np.linalg.norm(A @ x - b) / nb
                dres = np.linalg.norm(Aty + z - c) / nc
                gap = abs(c @ x - b @ y) / (1 + abs(c @ x) + abs(b @ y))
                if max(pres, dres, gap) < tol:
                    return _ConicSolution(x, y, it, True, pres, dres)
                # keep primal and dual residuals balanced
                if it % 50 == 0:
                    if pres > 5 * dres:
                        mu = min(mu * 2, 1e4)
                    elif dres > 5 * pres:
                        mu = max(mu / 2, 1e-4)
        return _ConicSolution(x, y, max_iter, False, pres, dres)


def _round_to_povm(Ms: Sequence[NDArray]) -> list[NDArray]:
    """Clip to PSD and renormalise by ``S^-1/2 . S^-1/2``; exact POVM whenever S > 0."""
    Ps = [project_psd(M) for M in Ms]
    n = Ps[0].shape[0]
    S = sum(Ps)
    w, V = np.linalg.eigh(S)
    if w[0] < 1e-12:
        Ps = [P + 1e-12 * np.eye(n) / len(Ps) for P in Ps]
        w, V = np.linalg.eigh(sum(Ps))
    R = (V / np.sqrt(w)) @ V.conj().T
    out = [R @ P @ R for P in Ps]
    return [(M + M.conj().T) / 2 for M in out]


def _check_family(Bs: Sequence[ArrayLike]) -> list[NDArray]:
    mats = [as_hermitian(B) for B in Bs]
    if len(mats) < 1:
        raise ValidationError("need at least one matrix")
    n = mats[0].shape[0]
    if any(M.shape != (n, n) for M in mats):
        raise ValidationError("matrices have different dimensions")
    return mats


def _start_point(n: int, k: int, extra: int, rng: np.random.Generator | None) -> NDArray:
    x0 = np.zeros(n * n * k + extra)
    for d in range(k):
        M = np.eye(n) / k
        if rng is not None:
            G = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
            M = M + 0.1 * (G @ G.conj().T) / n
        x0[d * n * n : (d + 1) * n * n] = hvec(M)
    return x0


def minimize_bayes(
    Bs: Sequence[ArrayLike], tol: float = 1e-10, max_iter: int = MAX_ITER, seed: int | None = None
) -> PovmSolveResult:
    """Minimise ``sum_d Tr(B_d M_d)`` over POVMs ``{M_d}``.

    The lower bound is ``Tr Y`` for a ``Y`` with ``Y <= B_d`` for every d,
    obtained from the dual iterate shifted down by its worst violation.
    """
    mats = _check_family(Bs)
    n, k = mats[0].shape[0], len(mats)
    nn = n * n
    if k == 1:
        P = Povm((np.eye(n, dtype=complex),))
        v = float(np.trace(mats[0]).real)
        return PovmSolveResult(P, v, v, {"sum": 0.0}, 0, True)
    A = np.hstack([np.eye(nn)] * k)
    b = hvec(np.eye(n, dtype=complex))
    c = np.concatenate([hvec(B) for B in mats])
    lp = _ConeLP(A, b, c, n, k)
    rng = None if seed is None else np.random.default_rng(seed)
    sol = lp.solve(_start_point(n, k, 0, rng), tol=tol, max_iter=max_iter)
    Ms = _round_to_povm([hmat(sol.x[d * nn : (d + 1) * nn], n) for d in range(k)])
    value = float(sum(np.real(np.trace(B @ M)) for B, M in zip(mats, Ms)))
    Y = hmat(sol.y, n)
    shift = max(0.0, max(np.linalg.eigvalsh(Y - B)[-1] for B in mats))
    lower = float(np.trace(Y).real - n * shift)
    povm = Povm(tuple(Ms), tol=TAU_SOLVE)
    return PovmSolveResult(
        povm, value, lower, {"primal": sol.pres, "dual": sol.dres}, sol.iterations, sol.converged
    )


def _match_lp(states: Sequence[NDArray], targets: NDArray) -> _ConeLP:
    n = states[0].shape[0]
    T, k = targets.shape
    nn = n * n
    n_u = 2 * T * k
    nv = k * nn + n_u + T + 1  # M blocks, u+/u-, w, eta
    rows = nn + T * k + T
    A = np.zeros((rows, nv))
    b = np.zeros(rows)
    for d in range(k):
        A[:nn, d * nn : (d + 1) * nn] = np.eye(nn)
    b[:nn] = hvec(np.eye(n, dtype=complex))
    u0 = k * nn
    w0 = u0 + n_u
    eta = nv - 1
    for th, rho in enumerate(states):
        r = hvec(rho)
        for d in range(k):
            row = nn + th * k + d
            A[row, d * nn : (d + 1) * nn] = r
            A[row, u0 + 2 * (th * k + d)] = -1
            A[row, u0 + 2 * (th * k + d) + 1] = 1
            b[row] = targets[th, d]
        row = nn + T * k + th
        A[row, u0 + 2 * th * k : u0 + 2 * (th + 1) * k] = 0.5
        A[row, w0 + th] = 1
        A[row, eta] = -1
    c = np.zeros(nv)
    c[eta] = 1
    return _ConeLP(A, b, c, n, k)


def match_objective(M: Povm, states: Sequence[NDArray], targets: NDArray) -> float:
    return float(max(0.5 * np.abs(apply_povm(M, r) - q).sum() for r, q in zip(states, targets)))


def _match_lower_bound(y: NDArray, states: Sequence[NDArray], targets: NDArray) -> float:
    """Weak-duality bound from a dual iterate, repaired to exact feasibility.

    For weights ``pi`` on the simplex and signs ``|s| <= 1`` the objective
    is at least ``Tr Y - 1/2 sum pi_theta s_theta . q_theta`` whenever
    ``Y <= 1/2 sum_theta pi_theta s_theta(d) rho_theta`` for every d.
    """
    n = states[0].shape[0]
    T, k = targets.shape
    nn = n * n
    Y = hmat(y[:nn], n)
    lam = y[nn : nn + T * k].reshape(T, k)
    pi = np.maximum(-y[nn + T * k :], 0)
    if pi.sum() > 1:
        pi = pi / pi.sum()
    lam = np.clip(lam, -0.5 * pi[:, None], 0.5 * pi[:, None])
    Bd = [-sum(lam[th, d] * states[th] for th in range(T)) for d in range(k)]
    shift = max(0.0, max(np.linalg.eigvalsh(Y - B)[-1] for B in Bd))
    return float(np.trace(Y).real - n * shift + np.sum(lam * targets))


def match_povm(
    E: Experiment | Sequence[ArrayLike],
    targets: ArrayLike,
    tol: float = 1e-10,
    max_iter: int = MAX_ITER,
    restarts: int = 5,
    seed: int = 0,
) -> PovmSolveResult:
    """Find a POVM on ``E`` whose outcome distributions best match ``targets``.

    ``targets[theta]`` is a probability vector over the outcomes. The
    objective is ``max_theta 1/2 ||M(rho_theta) - targets[theta]||_1``;
    a value of zero means ``E`` can reproduce the targets exactly.
    The first run starts from ``I/k``; further restarts use seeded random
    starting points and the best certified pair is kept.
    """
    states = list(E.states) if isinstance(E, Experiment) else [as_hermitian(r) for r in E]
    q = np.atleast_2d(np.asarray(targets, dtype=float))
    if q.shape[0] != len(states):
        raise ValidationError(f"{q.shape[0]} target rows for {len(states)} states")
    if np.any(q < -1e-12) or np.any(np.abs(q.sum(axis=1) - 1) > 1e-9):
        raise ValidationError("targets must be probability vectors")
    n, (T, k) = states[0].shape[0], q.shape
    nn = n * n
    lp = _match_lp(states, q)
    rng = np.random.default_rng(seed)
    extra = lp.A.shape[1] - k * nn
    best: PovmSolveResult | None = None
    values: list[float] = []
    lower = -np.inf
    total_it = 0
    for r in range(max(1, restarts)):
        sol = lp.solve(_start_point(n, k, extra, None if r == 0 else rng), tol=tol, max_iter=max_iter)
        total_it += sol.iterations
        Ms = _round_to_povm([hmat(sol.x[d * nn : (d + 1) * nn], n) for d in range(k)])
        povm = Povm(tuple(Ms), tol=TAU_SOLVE)
        val = match_objective(povm, states, q)
        values.append(val)
        lower = max(lower, _match_lower_bound(sol.y, states, q))
        res = PovmSolveResult(
            povm, val, lower, {"primal": sol.pres, "dual": sol.dres}, sol.iterations, sol.converged
        )
        if best is None or val < best.value - 1e-15 or (
            abs(val - best.value) <= 1e-15 and _frob(povm) < _frob(best.povm)
        ):
            best = res
    best.lower_bound = max(0.0, lower)
    best.iterations = total_it
    best.restart_values = values
    return best


def _frob(M: Povm) -> float:
    return float(np.sqrt(sum(np.linalg.norm(e) ** 2 for e in M.elements)))


def project_to_povm(
    raw: Sequence[ArrayLike], tol: float = 1e-12, max_iter: int = MAX_ITER
) -> Povm:
    """Frobenius-nearest POVM via Dykstra's alternating projections.

    Alternates between the product of PSD cones and the affine set
    ``sum_d M_d = I``; Dykstra's correction terms make the limit the
    nearest point of the intersection rather than just some point in it.
    """
    mats = _check_family(raw)
    k, n = len(mats), mats[0].shape[0]
    X = [m.copy() for m in mats]
    p = [np.zeros_like(m) for m in mats]  # correction for the PSD step
    qc = [np.zeros_like(m) for m in mats]  # correction for the affine step
    I = np.eye(n)
    for _ in range(max_iter):
        Z = [X[d] + qc[d] for d in range(k)]
        corr = (I - sum(Z)) / k
        Yaff = [Zd + corr for Zd in Z]
        qc = [Z[d] - Yaff[d] for d in range(k)]
        W = [Yaff[d] + p[d] for d in range(k)]
        Xn = [project_psd(Wd) for Wd in W]
        p = [W[d] - Xn[d] for d in range(k)]
        delta = max(np.abs(Xn[d] - X[d]).max() for d in range(k))
        X = Xn
        if delta < tol and np.abs(sum(X) - I).max() < tol:
            break
    return Povm(tuple(X), tol=TAU_SOLVE)
