"""Complex sparse matrices, direct factorizations and Krylov/power iterations.

Everything downstream (assembly, subdomain solves, norm estimation) goes
through the small set of kernels in this module.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import lapack
from scipy.sparse.csgraph import reverse_cuthill_mckee

__all__ = [
    "ComplexSparseMatrix",
    "SingularMatrixError",
    "NotPositiveDefiniteError",
    "BandFactorization",
    "DenseFactorization",
    "SparseFactorization",
    "CholeskyBandFactorization",
    "GmresResult",
    "PowerIterationResult",
    "spmv",
    "spmv_conjugate_transpose",
    "band_factorize",
    "real_spd_factorize",
    "factorize",
    "gmres",
    "power_iteration_generalized",
    "lanczos_generalized",
]

DENSE_CUTOFF = 400
PIVOT_RTOL = 1e-14


class SingularMatrixError(np.linalg.LinAlgError):
    pass


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    pass


@dataclass(eq=False)
class ComplexSparseMatrix:
    """Compressed-row complex matrix.

    ``symmetric`` marks complex-symmetric matrices (M == M.T entrywise,
    not Hermitian); the flag is checked on construction.
    """

    nrows: int
    ncols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray
    symmetric: bool = False
    _csr: Optional[sp.csr_matrix] = field(default=None, repr=False)

    def __post_init__(self):
        self.row_offsets = np.asarray(self.row_offsets, dtype=np.int64)
        self.col_indices = np.asarray(self.col_indices, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=np.complex128)
        ro = self.row_offsets
        if ro.shape != (self.nrows + 1,) or ro[0] != 0 or ro[-1] != len(self.values):
            raise ValueError("row_offsets must have length nrows+1 and end at nnz")
        if np.any(np.diff(ro) < 0):
            raise ValueError("row_offsets must be nondecreasing")
        if len(self.col_indices) != len(self.values):
            raise ValueError("col_indices and values differ in length")
        if len(self.col_indices) and (
            self.col_indices.min() < 0 or self.col_indices.max() >= self.ncols
        ):
            raise ValueError("column index out of range")
        # strictly increasing columns inside each row
        d = np.diff(self.col_indices)
        row_starts = np.zeros(len(self.col_indices), dtype=bool)
        row_starts[ro[:-1][ro[:-1] < len(self.col_indices)]] = True
        if np.any((d <= 0) & ~row_starts[1:]):
            raise ValueError("column indices must be strictly increasing within rows")
        if self.symmetric:
            m = self.to_scipy()
            if m.shape[0] != m.shape[1] or (m != m.T).nnz != 0:
                raise ValueError("matrix flagged symmetric is not complex symmetric")

    @classmethod
    def from_scipy(cls, m, symmetric: bool = False) -> "ComplexSparseMatrix":
        m = sp.csr_matrix(m, dtype=np.complex128)
        m.sum_duplicates()
        m.sort_indices()
        return cls(m.shape[0], m.shape[1], m.indptr, m.indices, m.data, symmetric)

    @classmethod
    def from_coo(cls, rows, cols, vals, shape, symmetric: bool = False):
        """Sum duplicate triplets. With ``symmetric=True`` the result is
        replaced by (M + M^T)/2, which is bitwise symmetric because
        floating-point addition commutes."""
        m = sp.coo_matrix((vals, (rows, cols)), shape=shape, dtype=np.complex128).tocsr()
        if symmetric:
            m = ((m + m.T) * 0.5).tocsr()
        return cls.from_scipy(m, symmetric=symmetric)

    @classmethod
    def from_dense(cls, a, symmetric: bool = False):
        return cls.from_scipy(sp.csr_matrix(np.asarray(a, dtype=np.complex128)), symmetric)

    @property
    def shape(self):
        return (self.nrows, self.ncols)

    @property
    def nnz(self):
        return len(self.values)

    def to_scipy(self) -> sp.csr_matrix:
        if self._csr is None:
            self._csr = sp.csr_matrix(
                (self.values, self.col_indices, self.row_offsets), shape=self.shape
            )
        return self._csr

    def toarray(self) -> np.ndarray:
        return self.to_scipy().toarray()

    def is_real(self) -> bool:
        return not np.any(self.values.imag)

    def __matmul__(self, x):
        return spmv(self, x)

    def to_coordinate_text(self) -> str:
        """Zero-based ``i j re im`` lines, one per stored entry."""
        rows = np.repeat(np.arange(self.nrows), np.diff(self.row_offsets))
        lines = [
            f"{i} {j} {v.real:.17g} {v.imag:.17g}"
            for i, j, v in zip(rows, self.col_indices, self.values)
        ]
        return "\n".join(lines) + ("\n" if lines else "")


def spmv(m: ComplexSparseMatrix, x) -> np.ndarray:
    x = np.asarray(x)
    if x.shape != (m.ncols,):
        raise ValueError(f"expected vector of length {m.ncols}, got shape {x.shape}")
    return m.to_scipy() @ x.astype(np.complex128, copy=False)


def spmv_conjugate_transpose(m: ComplexSparseMatrix, x) -> np.ndarray:
    """Return conj(M)^T x."""
    x = np.asarray(x)
    if x.shape != (m.nrows,):
        raise ValueError(f"expected vector of length {m.nrows}, got shape {x.shape}")
    return np.conj(m.to_scipy().T @ np.conj(x.astype(np.complex128, copy=False)))


# ---------------------------------------------------------------------------
# direct factorizations


def _bandwidths(m: sp.spmatrix):
    c = m.tocoo()
    if c.nnz == 0:
        return 0, 0
    d = c.row - c.col
    return int(max(d.max(), 0)), int(max(-d.min(), 0))


def _rcm(m: sp.csr_matrix) -> np.ndarray:
    pattern = sp.csr_matrix((np.ones(m.nnz), m.indices, m.indptr), shape=m.shape)
    pattern = pattern + pattern.T
    return np.asarray(reverse_cuthill_mckee(pattern.tocsr(), symmetric_mode=True))


class _PermutedSolve:
    perm: Optional[np.ndarray]

    def _apply(self, b, inner):
        b = np.asarray(b)
        if b.shape[0] != self.n:
            raise ValueError(f"right-hand side has length {b.shape[0]}, expected {self.n}")
        if self.perm is None:
            return inner(b)
        y = inner(b[self.perm])
        out = np.empty_like(y)
        out[self.perm] = y
        return out


class BandFactorization(_PermutedSolve):
    """LU with partial pivoting inside the band (LAPACK ``zgbtrf``).

    ``bandwidth`` is (lower, upper) of the possibly reordered matrix.
    """

    def __init__(self, lu, ipiv, kl, ku, perm=None):
        self.lu = lu
        self.ipiv = ipiv
        self.bandwidth = (kl, ku)
        self.perm = perm
        self.n = lu.shape[1]

    def solve(self, b):
        kl, ku = self.bandwidth

        def inner(rhs):
            rhs = np.asarray(rhs, dtype=np.complex128)
            x, info = lapack.zgbtrs(self.lu, kl, ku, rhs.reshape(self.n, -1), self.ipiv)
            return x.reshape(rhs.shape)

        return self._apply(b, inner)


class DenseFactorization(_PermutedSolve):
    def __init__(self, lu_piv, n):
        self.lu_piv = lu_piv
        self.n = n
        self.perm = None

    def solve(self, b):
        return self._apply(
            b, lambda r: sla.lu_solve(self.lu_piv, np.asarray(r, dtype=np.complex128))
        )


class SparseFactorization(_PermutedSolve):
    """SuperLU factors; used for subdomain and global solves above the dense cutoff."""

    def __init__(self, lu, n):
        self.lu = lu
        self.n = n
        self.perm = None

    def solve(self, b):
        return self._apply(b, lambda r: self.lu.solve(np.asarray(r, dtype=np.complex128)))


class CholeskyBandFactorization(_PermutedSolve):
    """Banded Cholesky of a real SPD matrix after reverse Cuthill-McKee reordering.

    Complex right-hand sides are handled by solving for real and imaginary
    parts together.
    """

    def __init__(self, chol, perm):
        self.chol = chol
        self.perm = perm
        self.n = chol.shape[1]
        self.bandwidth = chol.shape[0] - 1

    def solve(self, b):
        def inner(rhs):
            rhs = np.asarray(rhs)
            cplx = np.iscomplexobj(rhs)
            r2 = rhs.reshape(self.n, -1)
            stacked = np.hstack([r2.real, r2.imag]) if cplx else r2.astype(float)
            x, info = lapack.dpbtrs(self.chol, stacked)
            if cplx:
                m = r2.shape[1]
                x = x[:, :m] + 1j * x[:, m:]
            return x.reshape(rhs.shape)

        return self._apply(b, inner)


def _pivot_check(diag, scale, what="matrix"):
    small = np.abs(diag) < PIVOT_RTOL * scale
    if scale == 0 or np.any(small):
        idx = int(np.argmax(small)) if scale else 0
        raise SingularMatrixError(f"{what} is numerically singular (pivot {idx})")


def band_factorize(m: ComplexSparseMatrix, reorder: bool = False) -> BandFactorization:
    """Banded LU of ``m``. With ``reorder=True`` a reverse Cuthill-McKee
    permutation is applied first to shrink the band."""
    if m.nrows != m.ncols:
        raise ValueError("band_factorize needs a square matrix")
    a = m.to_scipy()
    perm = None
    if reorder:
        perm = _rcm(a)
        a = a[perm][:, perm]
    n = a.shape[0]
    kl, ku = _bandwidths(a)
    ab = np.zeros((2 * kl + ku + 1, n), dtype=np.complex128)
    c = a.tocoo()
    ab[kl + ku + c.row - c.col, c.col] = c.data
    lu, ipiv, info = lapack.zgbtrf(ab, kl, ku)
    if info < 0:
        raise ValueError(f"zgbtrf: illegal argument {-info}")
    scale = np.abs(m.values).max() if m.nnz else 0.0
    if info > 0:
        raise SingularMatrixError(f"matrix is singular (zero pivot at {info - 1})")
    _pivot_check(lu[kl + ku], scale)
    return BandFactorization(lu, ipiv, kl, ku, perm)


def real_spd_factorize(m: ComplexSparseMatrix) -> CholeskyBandFactorization:
    if m.nrows != m.ncols:
        raise ValueError("real_spd_factorize needs a square matrix")
    if not m.is_real():
        raise NotPositiveDefiniteError("matrix has nonzero imaginary parts")
    a = m.to_scipy().real.tocsr()
    perm = _rcm(a)
    a = a[perm][:, perm]
    n = a.shape[0]
    kl, ku = _bandwidths(a)
    ab = np.zeros((ku + 1, n))
    c = sp.triu(a).tocoo()
    ab[ku + c.row - c.col, c.col] = c.data
    chol, info = lapack.dpbtrf(ab)
    if info != 0:
        raise NotPositiveDefiniteError(f"non-positive pivot at row {info - 1}")
    return CholeskyBandFactorization(chol, perm)


def factorize(m: ComplexSparseMatrix, method: str = "auto"):
    """Direct factorization with a ``solve(b)`` method.

    ``auto`` picks dense LU below ``DENSE_CUTOFF`` unknowns and SuperLU
    otherwise; ``band`` forces :func:`band_factorize`.
    """
    if m.nrows != m.ncols:
        raise ValueError("factorize needs a square matrix")
    n = m.nrows
    if method == "auto":
        method = "dense" if n < DENSE_CUTOFF else "sparse"
    scale = np.abs(m.values).max() if m.nnz else 0.0
    if method == "dense":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            lu, piv = sla.lu_factor(m.toarray(), check_finite=False)
        _pivot_check(np.diag(lu), scale)
        return DenseFactorization((lu, piv), n)
    if method == "band":
        return band_factorize(m, reorder=True)
    if method == "sparse":
        try:
            lu = spla.splu(m.to_scipy().tocsc())
        except RuntimeError as exc:
            raise SingularMatrixError(str(exc)) from exc
        _pivot_check(lu.U.diagonal(), scale)
        return SparseFactorization(lu, n)
    raise ValueError(f"unknown factorization method {method!r}")


# ---------------------------------------------------------------------------
# iterative methods


@dataclass
class GmresResult:
    solution: np.ndarray
    iterations: int
    residual_history: list
    converged: bool
    breakdown: bool = False


def gmres(
    apply_operator: Callable,
    apply_preconditioner: Optional[Callable],
    b,
    tol: float = 1e-6,
    max_iter: int = 200,
) -> GmresResult:
    """Full GMRES with right preconditioning and zero initial guess.

    Solves A B^{-1} y = b and returns x = B^{-1} y. The preconditioned
    Krylov vectors are stored so every iterate is formed without extra
    preconditioner applications; ``residual_history[i]`` is the true
    relative residual ||b - A x_i|| / ||b|| (entry 0 is the zero guess).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    b = np.asarray(b, dtype=np.complex128)
    n = b.shape[0]
    prec = apply_preconditioner if apply_preconditioner is not None else (lambda v: v)
    beta = np.linalg.norm(b)
    x = np.zeros(n, dtype=np.complex128)
    if beta == 0:
        return GmresResult(x, 0, [0.0], True)

    V = np.zeros((max_iter + 1, n), dtype=np.complex128)
    Z = np.zeros((max_iter, n), dtype=np.complex128)
    H = np.zeros((max_iter + 1, max_iter), dtype=np.complex128)
    cs = np.zeros(max_iter, dtype=np.complex128)
    sn = np.zeros(max_iter, dtype=np.complex128)
    g = np.zeros(max_iter + 1, dtype=np.complex128)
    g[0] = beta
    V[0] = b / beta
    history = [1.0]

    for j in range(max_iter):
        Z[j] = prec(V[j])
        w = np.asarray(apply_operator(Z[j]), dtype=np.complex128)
        # modified Gram-Schmidt, one reorthogonalization pass
        for _ in range(2):
            for i in range(j + 1):
                hij = np.vdot(V[i], w)
                H[i, j] += hij
                w = w - hij * V[i]
        hnext = np.linalg.norm(w)
        H[j + 1, j] = hnext
        breakdown = hnext < 1e-14 * beta
        if not breakdown:
            V[j + 1] = w / hnext

        # apply previous Givens rotations, then build the new one
        for i in range(j):
            t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
            H[i + 1, j] = -np.conj(sn[i]) * H[i, j] + cs[i] * H[i + 1, j]
            H[i, j] = t
        a, c = H[j, j], H[j + 1, j]
        r = np.hypot(abs(a), abs(c))
        if r == 0:
            cs[j], sn[j] = 1.0, 0.0
        else:
            cs[j] = abs(a) / r if a != 0 else 0.0
            phase = a / abs(a) if a != 0 else 1.0
            sn[j] = phase * np.conj(c) / r
        H[j, j] = cs[j] * a + sn[j] * c
        H[j + 1, j] = 0.0
        g[j + 1] = -np.conj(sn[j]) * g[j]
        g[j] = cs[j] * g[j]

        y = sla.solve_triangular(H[: j + 1, : j + 1], g[: j + 1])
        x = Z[: j + 1].T @ y
        res = np.linalg.norm(b - apply_operator(x)) / beta
        history.append(float(res))
        if res <= tol:
            return GmresResult(x, j + 1, history, True, breakdown)
        if breakdown:
            return GmresResult(x, j + 1, history, False, True)
    return GmresResult(x, max_iter, history, False)


@dataclass
class PowerIterationResult:
    eigenvalue: float
    iterations: int
    converged: bool
    residual: float
    """Relative eigen-residual ||Cx - lambda x|| / lambda in the metric."""

    @property
    def suspicious(self) -> bool:
        return self.residual > 1e-4


def power_iteration_generalized(
    apply_C: Callable,
    metric_inner: Callable,
    n: Optional[int] = None,
    tol: float = 1e-8,
    max_iter: int = 2000,
    x0=None,
    seed: Optional[int] = 7,
) -> PowerIterationResult:
    """Largest eigenvalue of an operator that is self-adjoint and positive
    semidefinite in the inner product ``metric_inner``.

    The start vector is the all-ones vector plus a seeded random complex
    perturbation (``seed=None`` uses plain ones), normalized in the metric.
    Iteration stops once the Rayleigh quotient changes by less than ``tol``
    relative to itself.
    """
    if x0 is None:
        if n is None:
            raise ValueError("need n or x0")
        x = np.ones(n, dtype=np.complex128)
        if seed is not None:
            rng = np.random.default_rng(seed)
            x = x + rng.standard_normal(n) + 1j * rng.standard_normal(n)
    else:
        x = np.array(x0, dtype=np.complex128)

    def mnorm(v):
        return np.sqrt(max(metric_inner(v, v).real, 0.0))

    nx = mnorm(x)
    if nx == 0:
        raise ValueError("start vector has zero metric norm")
    x = x / nx
    lam_old = None
    lam = 0.0
    y = apply_C(x)
    for it in range(1, max_iter + 1):
        lam = max(metric_inner(y, x).real, 0.0)
        ny = mnorm(y)
        if ny == 0 or lam == 0:
            return PowerIterationResult(0.0, it, True, 0.0)
        resid = mnorm(y - lam * x) / lam
        if lam_old is not None and abs(lam - lam_old) < tol * lam:
            return PowerIterationResult(float(lam), it, True, float(resid))
        lam_old = lam
        x = y / ny
        y = apply_C(x)
    resid = mnorm(y - lam * x) / lam if lam else 0.0
    return PowerIterationResult(float(lam), max_iter, False, float(resid))


def lanczos_generalized(
    apply_K: Callable,
    M,
    solve_M: Callable,
    n: int,
    tol: float = 1e-8,
    max_iter: int = 2000,
    seed: Optional[int] = 7,
    ncv: int = 20,
) -> PowerIterationResult:
    """Largest eigenvalue of the Hermitian pencil K x = lambda M x with M HPD.

    Implicitly restarted Arnoldi (ARPACK through scipy) in M-inner-product
    mode. Same start vector and result type as the power iteration;
    ``iterations`` counts applications of K. Tiny problems go to dense eigh.
    """
    M = sp.csr_matrix(M)
    counter = [0]

    def K(x):
        counter[0] += 1
        return np.asarray(apply_K(np.ravel(x)), dtype=np.complex128)

    def mnorm(v):
        return np.sqrt(max(np.vdot(v, M @ v).real, 0.0))

    if n <= 2 * ncv:
        Kd = np.column_stack([K(e) for e in np.eye(n, dtype=np.complex128)])
        Kd = 0.5 * (Kd + Kd.conj().T)
        w, V = sla.eigh(Kd, M.toarray())
        lam, x = max(w[-1], 0.0), V[:, -1]
        resid = mnorm(solve_M(Kd @ x) - w[-1] * x) / (lam * mnorm(x)) if lam else 0.0
        return PowerIterationResult(float(lam), n, True, float(resid))

    x0 = np.ones(n, dtype=np.complex128)
    if seed is not None:
        rng = np.random.default_rng(seed)
        x0 = x0 + rng.standard_normal(n) + 1j * rng.standard_normal(n)
    if not np.any(K(x0)):
        return PowerIterationResult(0.0, counter[0], True, 0.0)
    Kop = spla.LinearOperator((n, n), matvec=K, dtype=np.complex128)
    Minv = spla.LinearOperator((n, n), matvec=lambda v: solve_M(np.ravel(v)), dtype=np.complex128)
    converged = True
    try:
        w, V = spla.eigs(Kop, k=1, M=M.astype(np.complex128), Minv=Minv, which="LR",
                         v0=x0, tol=tol, ncv=min(ncv, n - 1), maxiter=max_iter)
    except spla.ArpackNoConvergence as exc:
        converged = False
        w, V = exc.eigenvalues, exc.eigenvectors
        if len(w) == 0:
            return PowerIterationResult(0.0, counter[0], False, np.inf)
    except spla.ArpackError:
        # e.g. a numerically null operator; fall back to the power iteration
        res = power_iteration_generalized(lambda v: solve_M(K(v)), lambda u, v: np.vdot(v, M @ u),
                                          x0=x0, tol=tol, max_iter=max_iter)
        res.iterations += counter[0]
        return res
    lam, x = max(float(w[0].real), 0.0), V[:, 0]
    if lam == 0.0:
        return PowerIterationResult(0.0, counter[0], converged, 0.0)
    resid = mnorm(solve_M(K(x)) - lam * x) / (lam * mnorm(x))
    return PowerIterationResult(lam, counter[0], converged, float(resid))
