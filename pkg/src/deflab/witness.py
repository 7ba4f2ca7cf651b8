"""Three-outcome classical experiments tangent to a testing curve.

Given ``0 < s1 < s2`` off the breakpoints, the tangent lines
``g_i(t) = a_i - t b_i`` of ``f_E`` at ``s_i`` together with ``g_0 = 1 - t``
and ``g_3 = 0`` define a classical experiment ``F`` on three outcomes with
``f_F = max_i g_i`` on ``t >= 0``. By convexity ``f_F <= f_E`` everywhere and
the two curves touch at ``s1`` and ``s2``, so ``E`` is 2-deficient by zero
with respect to ``F``. Whether a single measurement on ``E`` reproduces
``F`` exactly is a different question; for non-abelian ``E`` and well
chosen points it does not, which is what :func:`separation_demo` checks.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .curve import TestingCurve, f_derivative, f_value, np_projection
from .deficiency import two_deficiency_index
from .errors import PreconditionError
from .experiment import BinaryExperiment, ClassicalBinaryExperiment, as_binary, is_abelian, normalize_support
from .linalg import commutator_norm
from .povm_opt import TAU_SOLVE, PovmSolveResult, match_povm

S_MIN_GAP = 1e-6
S_MARGIN = 1e-3
INFEASIBLE_MARGIN = 10 * TAU_SOLVE


@dataclass(frozen=True, eq=False)
class WitnessConstruction:
    """Tangent data and the resulting classical experiment.

    Attributes
    ----------
    s1, s2 : float
        Tangency points.
    a, b : ndarray, shape (4,)
        Intercepts and negated slopes of ``g_0..g_3``; both nonincreasing.
    witness : ClassicalBinaryExperiment
        ``p_i = a_{i-1} - a_i`` and ``q_i = b_{i-1} - b_i`` for ``i = 1, 2, 3``.
    """

    s1: float
    s2: float
    a: NDArray[np.float64]
    b: NDArray[np.float64]
    witness: ClassicalBinaryExperiment

    @property
    def p(self) -> NDArray[np.float64]:
        return self.witness.p

    @property
    def q(self) -> NDArray[np.float64]:
        return self.witness.q

    def lines(self, t: float) -> NDArray[np.float64]:
        return self.a - t * self.b

    def f_witness(self, t: float) -> float:
        """``f_F(t) = sum_i (p_i - t q_i)_+``."""
        return float(np.sum(np.maximum(self.p - t * self.q, 0.0)))

    def f_piecewise(self, t: float) -> float:
        """``f_F`` via the crossing points: ``g_{i-1}`` on ``[t'_{i-1}, t'_i]``."""
        tp = crossing_points(self)
        for i in range(1, 4):
            if t <= tp[i]:
                return float(self.a[i - 1] - t * self.b[i - 1])
        return 0.0

    def to_dict(self) -> dict:
        return {
            "s": [self.s1, self.s2],
            "a": self.a.tolist(),
            "b": self.b.tolist(),
            "crossing_points": [None if math.isinf(x) else x for x in crossing_points(self)],
            "witness": {"p": self.p.tolist(), "q": self.q.tolist()},
        }


def _check_points(E: BinaryExperiment, s1: float, s2: float) -> None:
    if not 0 < s1 < s2:
        raise PreconditionError(f"need 0 < s1 < s2, got s1={s1}, s2={s2}")
    for s in (s1, s2):
        for b in TestingCurve(E).breakpoints:
            if abs(s - b) <= S_MIN_GAP:
                raise PreconditionError(f"breakpoint proximity: s={s} lies within {S_MIN_GAP} of breakpoint {b}")


def tangent_witness(E, s1: float, s2: float) -> WitnessConstruction:
    """Classical experiment whose testing curve touches ``f_E`` at ``s1`` and ``s2``."""
    E = normalize_support(as_binary(E))
    s1, s2 = float(s1), float(s2)
    _check_points(E, s1, s2)
    a, b = [1.0], [1.0]
    for s in (s1, s2):
        d = f_derivative(E, s)
        a.append(f_value(E, s) - s * d)
        b.append(-d)
    a.append(0.0)
    b.append(0.0)
    # rounding can break monotonicity by an ulp; the chains must be exact
    a = np.minimum.accumulate(np.clip(a, 0.0, 1.0))
    b = np.minimum.accumulate(np.clip(b, 0.0, 1.0))
    p, q = a[:-1] - a[1:], b[:-1] - b[1:]
    return WitnessConstruction(s1, s2, a, b, ClassicalBinaryExperiment(p, q))


def crossing_points(w: WitnessConstruction, tol: float = 1e-12) -> tuple[float, float, float, float]:
    """``t'_0..t'_3`` where consecutive tangent lines meet.

    Equal consecutive lines (up to ``tol``) collapse onto the previous
    crossing point; a line strictly below its predecessor everywhere gives
    ``inf``.
    """
    tp = [0.0]
    for i in range(1, 4):
        dp, dq = w.a[i - 1] - w.a[i], w.b[i - 1] - w.b[i]
        if dq > tol:
            tp.append(float(max(dp / dq, tp[-1])))
        elif dp > tol:
            tp.append(math.inf)
        else:
            tp.append(tp[-1])
    return tuple(tp)


def _fallback_points(bps: list[float]) -> tuple[float, float]:
    if len(bps) >= 2:
        s1 = math.sqrt(bps[0] * bps[1]) if bps[0] > 0 else bps[1] / 2
        s2 = 1.5 * bps[-1]
    elif bps:
        s1, s2 = bps[0] / 2, 2 * bps[0]
    else:
        s1, s2 = 0.5, 2.0
    out = []
    for s in (s1, s2):
        while any(abs(s - b) < S_MARGIN for b in bps):
            s += S_MARGIN
        out.append(s)
    return out[0], out[1]


def default_s_points(E, per_interval: int = 8) -> tuple[float, float]:
    """Tangency points that make the Neyman-Pearson projections least compatible.

    Candidates are spread over every breakpoint interval below ``tmax`` (or
    below ``2 max(breakpoints) + 2`` when ``tmax`` is infinite), kept
    ``1e-3`` away from breakpoints. The pair maximising
    ``||[P_{s1,+}, P_{s2,+}]||_F`` is returned. If every pair commutes the
    choice falls back to the geometric mean of the first two breakpoints
    and 1.5 times the last one.
    """
    E = normalize_support(as_binary(E))
    c = TestingCurve(E)
    bps = c.breakpoints
    hi = c.tmax if math.isfinite(c.tmax) else 2 * (max(bps) if bps else 0.0) + 2
    anchors = sorted({0.0, hi, *[x for x in bps if x < hi]})
    cands = []
    for lo, up in zip(anchors, anchors[1:]):
        for k in range(1, per_interval + 1):
            s = lo + (up - lo) * k / (per_interval + 1)
            if s > S_MARGIN and all(abs(s - x) >= S_MARGIN for x in bps):
                cands.append(s)
    projs = [np_projection(E, s)[0] for s in cands]
    best, pair = 0.0, None
    for i, j in itertools.combinations(range(len(cands)), 2):
        v = commutator_norm(projs[i], projs[j])
        if v > best:
            best, pair = v, (cands[i], cands[j])
    if pair is None or best <= 1e-8:
        return _fallback_points(bps)
    return pair


@dataclass(frozen=True, eq=False)
class SeparationReport:
    """Result of testing whether one measurement on E reproduces the tangent witness."""

    construction: WitnessConstruction
    deficiency: float
    match: PovmSolveResult
    verdict: str
    abelian: bool

    @property
    def margin(self) -> float:
        return self.match.lower_bound

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "abelian": self.abelian,
            "two_deficiency": self.deficiency,
            "match_value": self.match.value,
            "match_lower_bound": self.match.lower_bound,
            "iterations": self.match.iterations,
            "construction": self.construction.to_dict(),
        }


def separation_demo(E, s1: float | None = None, s2: float | None = None, **solver_kw) -> SeparationReport:
    """Build the tangent witness ``F`` and try to match it with a POVM on ``E``.

    The verdict is FEASIBLE when the matched objective is at most
    ``1e-7``, INFEASIBLE when the certified lower bound is at least
    ``1e-6`` and INCONCLUSIVE otherwise.
    """
    E = normalize_support(as_binary(E))
    if s1 is None or s2 is None:
        s1, s2 = default_s_points(E)
    w = tangent_witness(E, s1, s2)
    dep = two_deficiency_index(E, w.witness).epsilon
    res = match_povm(E, np.vstack([w.p, w.q]), **solver_kw)
    if res.value <= TAU_SOLVE:
        verdict = "FEASIBLE"
    elif res.lower_bound >= INFEASIBLE_MARGIN:
        verdict = "INFEASIBLE"
    else:
        verdict = "INCONCLUSIVE"
    return SeparationReport(w, dep, res, verdict, is_abelian(E))
