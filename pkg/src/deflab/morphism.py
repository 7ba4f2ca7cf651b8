"""Maps on ``span{rho1, rho2}`` sending ``rho_i`` to ``sigma_i`` and their CP extensions.

If ``E >=_{2,0} F`` the linear map ``L(rho_i) = sigma_i`` is trace-norm
contractive on the span. It extends to a completely positive map on all
matrices by splitting the span into two PSD operators ``u, v`` that each
have a kernel vector not annihilated by the other, and reading each off
with a rank-one functional. The extension is generally not trace
preserving.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .channels import ChoiMatrix, choi_from_map, is_completely_positive, trace_defect
from .curve import breakpoints, extremal_ts
from .deficiency import two_deficiency_index
from .errors import ConstructionError, DeficiencyPreconditionError, PreconditionError, ValidationError
from .experiment import BinaryExperiment, as_binary
from .linalg import support_basis, trace_norm

DEP_TOL = 1e-8
DEPENDENCE_TOL = 1e-10
KERNEL_RTOL = 1e-8


def _dependent(a: NDArray, b: NDArray) -> bool:
    return float(np.linalg.norm(a - b)) <= DEPENDENCE_TOL


@dataclass(frozen=True, eq=False)
class MorphismData:
    """``L: span{rho1, rho2} -> span{sigma1, sigma2}`` with ``L(rho_i) = sigma_i``.

    ``contractivity`` is the largest sampled ``||L(x)||_1 / ||x||_1``.
    """

    source: BinaryExperiment
    target: BinaryExperiment
    contractivity: float
    n_samples: int

    @property
    def degenerate(self) -> bool:
        return _dependent(self.source.rho1, self.source.rho2)

    def coefficients(self, x: ArrayLike) -> tuple[float, float]:
        """``(c1, c2)`` with ``x = c1 rho1 + c2 rho2``; raises if ``x`` is off the span."""
        x = np.asarray(x, dtype=complex)
        if self.degenerate:
            basis = self.source.rho1.reshape(-1, 1)
        else:
            basis = np.stack([self.source.rho1.ravel(), self.source.rho2.ravel()], axis=1)
        c, *_ = np.linalg.lstsq(basis, x.ravel(), rcond=None)
        if np.linalg.norm(basis @ c - x.ravel()) > 1e-8 * max(1.0, np.linalg.norm(x)):
            raise ValidationError("operator is not in span{rho1, rho2}")
        c = np.real(c)
        return (float(c[0]), 0.0) if self.degenerate else (float(c[0]), float(c[1]))

    def __call__(self, x: ArrayLike) -> NDArray[np.complex128]:
        c1, c2 = self.coefficients(x)
        return c1 * self.target.rho1 + c2 * self.target.rho2


def _contractivity(E: BinaryExperiment, F: BinaryExperiment, n: int, seed: int) -> float:
    rng = np.random.default_rng(seed)
    cs = list(rng.normal(size=(n, 2)))
    # the directions rho1 - t rho2 at kinks are where the bound is tight
    cs += [np.array([1.0, -t]) for t in breakpoints(E) + breakpoints(F)]
    best = 0.0
    for c1, c2 in cs:
        den = trace_norm(c1 * E.rho1 + c2 * E.rho2)
        if den > 1e-12:
            best = max(best, trace_norm(c1 * F.rho1 + c2 * F.rho2) / den)
    return best


def statistical_morphism(E, F, n_samples: int = 1000, seed: int = 0) -> MorphismData:
    """The span map ``rho_i -> sigma_i`` after checking it is well defined.

    Raises
    ------
    PreconditionError
        ``rho1 = rho2`` while ``sigma1 != sigma2``.
    DeficiencyPreconditionError
        ``E`` does not 2-dominate ``F`` (index above ``1e-8``).
    """
    E, F = as_binary(E), as_binary(F)
    if _dependent(E.rho1, E.rho2) and not _dependent(F.rho1, F.rho2):
        raise PreconditionError("ill-defined morphism: rho1 = rho2 but sigma1 != sigma2")
    eps = two_deficiency_index(E, F).epsilon
    if eps > DEP_TOL:
        raise DeficiencyPreconditionError(f"E is not 2-deficient by 0 w.r.t. F (index {eps:.3e})")
    return MorphismData(E, F, _contractivity(E, F, n_samples, seed), n_samples)


@dataclass(frozen=True, eq=False)
class CpExtensionData:
    """Completely positive ``T`` with ``T(rho_i) = sigma_i``.

    ``T(a) = <psi, a psi>/<psi, u psi> L(u) + <phi, a phi>/<phi, v phi> L(v)``
    with ``u phi = v psi = 0``. In the degenerate case ``rho1 = rho2`` the map is
    ``a -> Tr(a) sigma1`` and ``u, v, phi, psi`` are None.
    """

    case: str
    choi: ChoiMatrix
    morphism: MorphismData
    u: NDArray[np.complex128] | None = field(default=None, repr=False)
    v: NDArray[np.complex128] | None = field(default=None, repr=False)
    phi: NDArray[np.complex128] | None = field(default=None, repr=False)
    psi: NDArray[np.complex128] | None = field(default=None, repr=False)

    def __call__(self, a: ArrayLike) -> NDArray[np.complex128]:
        return self.choi.apply(a)

    @property
    def trace_defect(self) -> float:
        return trace_defect(self.choi)

    @property
    def min_choi_eigenvalue(self) -> float:
        return self.choi.min_eigenvalue()

    def extension_residual(self) -> float:
        """``max_i ||T(rho_i) - sigma_i||_1``."""
        E, F = self.morphism.source, self.morphism.target
        return max(trace_norm(self(r) - s) for r, s in zip(E.states, F.states))

    def kernel_residuals(self) -> tuple[float, float]:
        if self.u is None:
            return 0.0, 0.0
        return float(np.linalg.norm(self.u @ self.phi)), float(np.linalg.norm(self.v @ self.psi))

    def to_dict(self) -> dict:
        out = {
            "case": self.case,
            "dim_in": self.choi.dim_in,
            "dim_out": self.choi.dim_out,
            "min_choi_eigenvalue": self.min_choi_eigenvalue,
            "trace_defect": self.trace_defect,
            "extension_residual": self.extension_residual(),
            "completely_positive": is_completely_positive(self.choi),
            "contractivity": self.morphism.contractivity,
        }
        if self.u is not None:
            out["kernel_residuals"] = list(self.kernel_residuals())
        return out


def _kernel_vector(u: NDArray, v: NDArray, V: NDArray, name: str) -> NDArray:
    """Unit vector ``x`` in ``supp(rho1 + rho2)`` with ``u x = 0`` maximising ``<x, v x>``."""
    uc, vc = V.conj().T @ u @ V, V.conj().T @ v @ V
    w, U = np.linalg.eigh(uc)
    K = U[:, w <= KERNEL_RTOL * max(1.0, float(np.max(np.abs(w))))]
    if K.shape[1] == 0:
        raise ConstructionError(f"{name}: operator has no kernel on the support (min eigenvalue {w[0]:.3e})")
    g, G = np.linalg.eigh(K.conj().T @ vc @ K)
    if g[-1] <= 1e-9:
        raise ConstructionError(f"{name}: every kernel vector is annihilated by the partner operator")
    x = V @ (K @ G[:, -1])
    x = x / np.linalg.norm(x)
    k = int(np.argmax(np.abs(x) > 1e-12))
    return x * (abs(x[k]) / x[k])


def cp_extension(E, F) -> CpExtensionData:
    """Completely positive extension of the span map ``rho_i -> sigma_i``.

    The pair ``(u, v)`` depends on the extremal ratios ``t1 rho2 <= rho1 <= tmax rho2``:
    ``(tmax rho2 - rho1, rho1 - t1 rho2)`` for finite ``tmax``,
    ``(rho1 / t1 - rho2, rho2)`` for infinite ``tmax`` and ``t1 > 0``, and
    ``(rho1, rho2)`` otherwise.
    """
    E, F = as_binary(E), as_binary(F)
    L = statistical_morphism(E, F)
    n, m = E.dim, F.dim
    if L.degenerate:
        s1 = F.rho1
        return CpExtensionData("degenerate", choi_from_map(lambda a: np.trace(a) * s1, n, m), L)

    t1, tmax = extremal_ts(E)
    if math.isfinite(tmax):
        case, u, v = "tmax-finite", tmax * E.rho2 - E.rho1, E.rho1 - t1 * E.rho2
    elif t1 > 0:
        case, u, v = "tmax-infinite", E.rho1 / t1 - E.rho2, E.rho2
    else:
        case, u, v = "singular", E.rho1, E.rho2
    V = support_basis(E.rho1 + E.rho2, tol=1e-10)
    phi = _kernel_vector(u, v, V, "u")
    psi = _kernel_vector(v, u, V, "v")
    Lu, Lv = L(u), L(v)
    nu = float(np.real(psi.conj() @ u @ psi))
    nv = float(np.real(phi.conj() @ v @ phi))

    def T(a: NDArray) -> NDArray:
        return (psi.conj() @ a @ psi) / nu * Lu + (phi.conj() @ a @ phi) / nv * Lv

    return CpExtensionData(case, choi_from_map(T, n, m), L, u, v, phi, psi)


__all__ = [
    "MorphismData",
    "CpExtensionData",
    "statistical_morphism",
    "cp_extension",
    "is_completely_positive",
    "trace_defect",
]
