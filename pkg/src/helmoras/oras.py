"""ORAS preconditioner, Richardson iteration and error-propagation analysis.

With R_ℓ the nodal restriction to subdomain ℓ, R̃_ℓᵀ = R_ℓᵀ diag(χ_ℓ)
and A_ℓ the local impedance matrices,

    B⁻¹ = Σ_ℓ R̃_ℓᵀ A_ℓ⁻¹ R_ℓ,      E = I - B⁻¹ A.

Norms of Eˢ are taken in the k-weighted H¹ norm ‖u‖² = u* D_k u.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .decomposition import Cover
from .fem import FeSpace, assemble_helmholtz, assemble_metric_dk
from .linalg import (
    ComplexSparseMatrix,
    PowerIterationResult,
    SingularMatrixError,
    factorize,
    lanczos_generalized,
    power_iteration_generalized,
    real_spd_factorize,
)

__all__ = [
    "OrasOperator",
    "IterationTrace",
    "NormEstimate",
    "build_oras",
    "richardson",
    "residual_correction_step",
    "norm_E_power",
]


class OrasOperator:
    """Factorized subdomain problems plus the maps needed for B⁻¹, E, E* and T.

    Parameters
    ----------
    A : global Helmholtz matrix (impedance on ∂Ω)
    local_matrices : A_ℓ, impedance on the whole of ∂Ω_ℓ
    cover : cover with partition of unity built
    Dk : k-weighted H¹ Gram matrix, optional (needed for norms)
    """

    def __init__(self, A: ComplexSparseMatrix, local_matrices, cover: Cover,
                 Dk: Optional[ComplexSparseMatrix] = None, method: str = "auto"):
        if cover.pou is None:
            raise ValueError("cover has no partition of unity")
        if A.shape != (cover.space.ndofs,) * 2:
            raise ValueError("global matrix does not match the cover's space")
        self.A = A
        self.cover = cover
        self.local_matrices = list(local_matrices)
        self.factors = []
        for sub, Al in zip(cover.subdomains, self.local_matrices):
            if Al.shape != (len(sub.node_ids),) * 2:
                raise ValueError(f"local matrix {sub.id} has wrong shape {Al.shape}")
            try:
                self.factors.append(factorize(Al, method))
            except SingularMatrixError as exc:
                raise SingularMatrixError(f"subdomain {sub.id}: {exc}") from exc
        self.Dk = Dk
        self._Dk_factor = None
        self._A_factor = None
        self._method = method

    @property
    def n(self) -> int:
        return self.A.nrows

    @property
    def n_subdomains(self) -> int:
        return len(self.factors)

    @property
    def Dk_factor(self):
        if self._Dk_factor is None:
            if self.Dk is None:
                raise RuntimeError("operator was built without the D_k metric")
            self._Dk_factor = real_spd_factorize(self.Dk)
        return self._Dk_factor

    @property
    def A_factor(self):
        if self._A_factor is None:
            self._A_factor = factorize(self.A, self._method)
        return self._A_factor

    def _ids(self, ell):
        return self.cover.subdomains[ell].node_ids

    def _check(self, v):
        v = np.asarray(v, dtype=np.complex128)
        if v.shape != (self.n,):
            raise ValueError(f"expected global vector of length {self.n}, got {v.shape}")
        return v

    def local_solve(self, ell: int, r_local):
        try:
            return self.factors[ell].solve(r_local)
        except SingularMatrixError as exc:
            raise SingularMatrixError(f"subdomain {ell}: {exc}") from exc

    def local_solve_adjoint(self, ell: int, w_local):
        # A_ℓ is complex symmetric, so A_ℓᴴ = conj(A_ℓ)
        return np.conj(self.local_solve(ell, np.conj(w_local)))

    def apply_A(self, v):
        return self.A.to_scipy() @ v

    def apply_A_adjoint(self, v):
        return np.conj(self.A.to_scipy() @ np.conj(v))

    def apply_B_inverse(self, r):
        r = self._check(r)
        out = np.zeros(self.n, dtype=np.complex128)
        # ascending ℓ keeps the sum reproducible
        for ell in range(self.n_subdomains):
            ids = self._ids(ell)
            out[ids] += self.cover.pou[ell] * self.local_solve(ell, r[ids])
        return out

    def apply_B_inverse_adjoint(self, v):
        v = self._check(v)
        out = np.zeros(self.n, dtype=np.complex128)
        for ell in range(self.n_subdomains):
            ids = self._ids(ell)
            out[ids] += self.local_solve_adjoint(ell, self.cover.pou[ell] * v[ids])
        return out

    def apply_E(self, v):
        v = self._check(v)
        return v - self.apply_B_inverse(self.apply_A(v))

    def apply_E_adjoint(self, v):
        v = self._check(v)
        return v - self.apply_A_adjoint(self.apply_B_inverse_adjoint(v))

    def apply_E_power(self, v, s: int):
        for _ in range(s):
            v = self.apply_E(v)
        return v

    # -- block (product-space) operators ------------------------------------

    def restrict_all(self, v):
        """R v: concatenation of the nodal restrictions."""
        v = self._check(v)
        return np.concatenate([v[self._ids(l)] for l in range(self.n_subdomains)])

    def prolong_weighted_all(self, w):
        """R̃ᵀ w = Σ_ℓ R̃_ℓᵀ w_ℓ."""
        w = np.asarray(w, dtype=np.complex128)
        off = self.cover.offsets
        if w.shape != (off[-1],):
            raise ValueError(f"expected block vector of length {off[-1]}, got {w.shape}")
        out = np.zeros(self.n, dtype=np.complex128)
        for ell in range(self.n_subdomains):
            out[self._ids(ell)] += self.cover.pou[ell] * w[off[ell]:off[ell + 1]]
        return out

    def apply_T_block(self, w):
        """(Tw)_ℓ = R_ℓ g - A_ℓ⁻¹ R_ℓ A g with g = R̃ᵀ w."""
        g = self.prolong_weighted_all(w)
        Ag = self.apply_A(g)
        off = self.cover.offsets
        out = np.empty(off[-1], dtype=np.complex128)
        for ell in range(self.n_subdomains):
            ids = self._ids(ell)
            out[off[ell]:off[ell + 1]] = g[ids] - self.local_solve(ell, Ag[ids])
        return out

    # -- metric -------------------------------------------------------------

    def dk_inner(self, u, v) -> complex:
        """⟨u, v⟩ = v* D_k u."""
        return np.vdot(v, self.Dk.to_scipy() @ u)

    def dk_norm(self, u) -> float:
        return float(np.sqrt(max(self.dk_inner(u, u).real, 0.0)))


def build_oras(space: FeSpace, cover: Cover, k: float, with_metric: bool = True,
               method: str = "auto") -> OrasOperator:
    """Assemble A, every A_ℓ (impedance on all of ∂Ω_ℓ) and optionally D_k."""
    A = assemble_helmholtz(space, k)
    local = [assemble_helmholtz(s.local_space, k) for s in cover.subdomains]
    Dk = assemble_metric_dk(space, k) if with_metric else None
    return OrasOperator(A, local, cover, Dk, method)


@dataclass
class IterationTrace:
    errors: List[float] = field(default_factory=list)
    """‖uⁿ - u*‖ in the k-weighted H¹ norm (Euclidean if no metric)."""
    residuals: List[float] = field(default_factory=list)
    """Euclidean residual norms ‖f - A uⁿ‖."""


def richardson(op: OrasOperator, f, u0, n_steps: int, reference=None):
    """Run uⁿ⁺¹ = uⁿ + B⁻¹(f - A uⁿ) for ``n_steps`` steps.

    Returns the list of iterates (u0 included) and the trace, measured
    against ``reference`` or, if omitted, the direct solution of A u = f.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    f = op._check(f)
    u = op._check(u0).copy()
    ustar = op.A_factor.solve(f) if reference is None else op._check(reference)
    norm = op.dk_norm if op.Dk is not None else (lambda x: float(np.linalg.norm(x)))
    iterates = [u.copy()]
    trace = IterationTrace()
    for n in range(n_steps + 1):
        r = f - op.apply_A(u)
        trace.errors.append(norm(u - ustar))
        trace.residuals.append(float(np.linalg.norm(r)))
        if n == n_steps:
            break
        u = u + op.apply_B_inverse(r)
        iterates.append(u.copy())
    return iterates, trace


def residual_correction_step(op: OrasOperator, u_n, f, return_corrections: bool = False):
    """One step written as local corrections δ_ℓ = A_ℓ⁻¹ R_ℓ (f - A uⁿ),
    combined as uⁿ⁺¹ = uⁿ + Σ_ℓ R̃_ℓᵀ δ_ℓ."""
    u_n = op._check(u_n)
    f = op._check(f)
    residual = f - op.apply_A(u_n)
    deltas = [op.local_solve(l, residual[op._ids(l)]) for l in range(op.n_subdomains)]
    u = u_n.copy()
    for ell, d in enumerate(deltas):
        u[op._ids(ell)] += op.cover.pou[ell] * d
    return (u, deltas) if return_corrections else u


@dataclass
class NormEstimate:
    s: int
    norm: float
    converged: bool
    iterations: int
    residual: float

    @property
    def status(self) -> str:
        return "converged" if self.converged else "unconverged!"


def norm_E_power(op: OrasOperator, s: int, tol: float = 1e-8, max_iter: int = 2000,
                 seed: Optional[int] = 7, method: str = "lanczos") -> NormEstimate:
    """‖Eˢ‖ in the D_k norm: the square root of the largest eigenvalue of
    D_k⁻¹ (E*)ˢ D_k Eˢ.

    ``method="lanczos"`` solves the Hermitian pencil (E*)ˢ D_k Eˢ x = λ D_k x
    with ARPACK; ``method="power"`` runs plain power iteration on the
    D_k-self-adjoint operator, which needs many more steps when the top
    eigenvalues cluster.
    """
    if s < 1:
        raise ValueError("s must be at least 1")
    if method not in ("lanczos", "power"):
        raise ValueError(f"unknown method {method!r}")
    D = op.Dk.to_scipy()
    Dfac = op.Dk_factor

    def apply_K(x):
        y = D @ op.apply_E_power(x, s)
        for _ in range(s):
            y = op.apply_E_adjoint(y)
        return y

    if method == "lanczos":
        res: PowerIterationResult = lanczos_generalized(
            apply_K, D, Dfac.solve, op.n, tol=tol, max_iter=max_iter, seed=seed
        )
    else:
        res = power_iteration_generalized(
            lambda x: Dfac.solve(apply_K(x)), op.dk_inner, n=op.n, tol=tol,
            max_iter=max_iter, seed=seed
        )
    return NormEstimate(s, float(np.sqrt(res.eigenvalue)), res.converged,
                        res.iterations, res.residual)
