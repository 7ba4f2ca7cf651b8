"""Deficiency of one experiment with respect to another.

For binary experiments ``E >=_{2,eps} F`` holds iff
``f_E(t) >= f_F(t) - (1 + t) eps`` for every ``t >= 0``, so the minimal
2-deficiency is ``sup_t (f_F(t) - f_E(t))_+ / (1 + t)``. Both curves are
piecewise analytic with kinks only at their breakpoints, and the ratio is
bounded by ``1 / (1 + t)``, which makes the supremum a finite search.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .curve import TestingCurve
from .errors import SolverError, ValidationError
from .experiment import Experiment, LossFunction, Povm, apply_povm, as_binary
from .linalg import positive_part_trace
from .parallel import pmap
from .povm_opt import TAU_SOLVE, PovmSolveResult, match_povm, minimize_bayes

EPS_CLAMP = 1e-9
# beyond this the ratio is below EPS_CLAMP whatever the curves do
T_FAR = 1e10


@dataclass
class DeficiencyReport:
    """Minimal 2-deficiency of E w.r.t. F and where it is attained."""

    epsilon: float
    witness_t: float
    samples: list[tuple[float, float, float]] = field(repr=False)
    method: dict = field(default_factory=dict)

    def to_dict(self, include_samples: bool = False) -> dict:
        out = {"epsilon": self.epsilon, "witness_t": self.witness_t, "method": dict(self.method)}
        if include_samples:
            out["samples"] = [list(s) for s in self.samples]
        return out


def _ratio(cE: TestingCurve, cF: TestingCurve, t: float) -> float:
    return (cF(t) - cE(t)) / (1 + t)


def two_deficiency_index(E, F, grid: int = 512, xatol: float = 1e-10) -> DeficiencyReport:
    """``sup_{t >= 0} (f_F(t) - f_E(t))_+ / (1 + t)``.

    The ratio is sampled at every breakpoint of either curve, on a uniform
    grid over ``[0, T*]`` with ``T* = 2 max(breakpoints) + 2`` and on a
    geometric grid over ``[T*, 1e10]``; the best few local maxima are then
    refined with bounded Brent search. The tail grid is needed because a
    curve whose ``rho2`` has a kernel not invariant under ``rho1`` keeps
    decreasing past its last breakpoint. Past ``1e10`` the ratio is below
    the reporting clamp.
    """
    cE, cF = TestingCurve(E), TestingCurve(F)
    bps = sorted(set(cE.breakpoints) | set(cF.breakpoints))
    t_star = 2 * (max(bps) if bps else 0.0) + 2
    tail = np.geomspace(t_star, max(T_FAR, 2 * t_star), 64)
    ts = np.unique(np.concatenate([np.linspace(0.0, t_star, grid), bps, tail]))
    pairs = pmap(lambda t: (cE(t), cF(t)), ts)
    samples = [(float(t), fe, ff) for t, (fe, ff) in zip(ts, pairs)]
    g = np.array([(ff - fe) / (1 + t) for t, fe, ff in samples])

    best_t, best = float(ts[np.argmax(g)]), float(np.max(g))
    peaks = [i for i in range(len(ts)) if g[i] >= g[max(i - 1, 0)] and g[i] >= g[min(i + 1, len(ts) - 1)]]
    for i in sorted(peaks, key=lambda i: -g[i])[:4]:
        lo, hi = ts[max(i - 1, 0)], ts[min(i + 1, len(ts) - 1)]
        if hi <= lo:
            continue
        res = minimize_scalar(lambda t: -_ratio(cE, cF, t), bounds=(lo, hi), method="bounded",
                              options={"xatol": xatol})
        if -res.fun > best:
            best, best_t = float(-res.fun), float(res.x)
    eps = best if best > EPS_CLAMP else 0.0
    return DeficiencyReport(
        epsilon=eps,
        witness_t=best_t,
        samples=samples,
        method={"grid": int(grid), "t_star": t_star, "breakpoints": bps, "tail_points": len(tail),
                "refine": "bounded-brent"},
    )


def check_two_deficiency(E, F, eps: float) -> tuple[bool, float | None]:
    """Is ``E >=_{2,eps} F``? On failure also return a violating ``t``."""
    rep = two_deficiency_index(E, F)
    if rep.epsilon <= eps + EPS_CLAMP:
        return True, None
    return False, rep.witness_t


def bayes_risk(E: Experiment, W: LossFunction, **solver_kw) -> float:
    """``min_M sum_theta R(theta, W, M)`` over POVMs with ``W.n_decisions`` outcomes.

    Two decisions use the closed form ``sum_theta W_theta(1) - Tr(-sum_theta A_theta rho_theta)_+``
    with ``A_theta = W_theta(0) - W_theta(1)``; more decisions go through
    :func:`minimize_bayes`.
    """
    if not isinstance(W, LossFunction):
        W = LossFunction(W)
    if W.n_params != E.n_params:
        raise ValidationError(f"loss has {W.n_params} rows for {E.n_params} states")
    k = W.n_decisions
    if k < 2:
        raise ValidationError("a decision problem needs at least two decisions")
    if k == 2:
        a = sum(A * r for A, r in zip(W.coefficients, E.states))
        return float(W.table[:, 1].sum() - positive_part_trace(-a))
    Bs = [sum(W.table[th, d] * E.states[th] for th in range(E.n_params)) for d in range(k)]
    res = minimize_bayes(Bs, **solver_kw)
    if not res.converged and res.gap > 1e-6:
        raise SolverError(f"Bayes-risk solver stopped with gap {res.gap:.3e}")
    return res.value


def check_deficiency_vs_measurements(
    E: Experiment, F: Experiment, eps: float, measurements: Sequence[Povm], **solver_kw
) -> tuple[bool, list[PovmSolveResult]]:
    """Necessary check for ``E >=_eps F`` against the supplied measurements on F.

    For each ``N`` the best POVM ``M`` on E minimising
    ``max_theta 1/2 ||M(rho_theta) - N(sigma_theta)||_1`` is computed. The
    check fails only when the certified lower bound of some ``N`` exceeds
    ``eps`` by more than the solver tolerance.
    """
    if E.n_params != F.n_params:
        raise ValidationError("experiments have different parameter sets")
    results = []
    ok = True
    for N in measurements:
        if N.dim != F.dim:
            raise ValidationError(f"measurement acts on dim {N.dim}, target experiment has dim {F.dim}")
        targets = np.array([np.clip(apply_povm(N, s), 0, None) for s in F.states])
        targets /= targets.sum(axis=1, keepdims=True)
        res = match_povm(E, targets, **solver_kw)
        results.append(res)
        if res.lower_bound > eps + TAU_SOLVE:
            ok = False
    return ok, results


__all__ = [
    "DeficiencyReport",
    "two_deficiency_index",
    "check_two_deficiency",
    "bayes_risk",
    "check_deficiency_vs_measurements",
    "as_binary",
]
