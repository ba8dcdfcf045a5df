"""Simultaneous diagonalization of the diffusion quadratic form.

Finds a diagonal matrix ``D = diag(d_1, ..., d_N, -1)`` and the eigenvector
matrix ``R`` of ``D @ A`` such that

* ``R.T @ A @ R`` is diagonal (automatic for any eigenbasis of ``D @ A``
  whenever ``A`` is symmetric), and
* the rotated hedge-direction vector ``a @ R`` vanishes in components 1..N,
  so the quadratic gradient term of the pricing PDE involves only the first
  transformed coordinate.

The N unknown diagonal entries are pinned down by the N residual equations
``(a @ R)_i = 0, i >= 1``; eigenvectors are scale-ambiguous, so the last
diagonal entry is fixed at -1 and columns of ``R`` are normalized to unit
Euclidean norm with a deterministic sign and ordering convention.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FactorizationError

#: Condition number of D @ A beyond which the eigenproblem is declared stiff.
STIFF_CONDITION_LIMIT = 1e12

#: Relative tolerance for declaring the spectrum of D @ A complex.
_COMPLEX_TOL = 1e-9


@dataclass(frozen=True)
class FactorizedSystem:
    """Output of the diagonalizing transform build.

    Attributes
    ----------
    D : (N+1,) diagonal entries, last entry -1
    R : (N+1, N+1) unit-column eigenvector matrix of diag(D) @ A
    eigenvalues : (N+1,) matching eigenvalues
    p : (N+1,) diagonal of R.T @ A @ R; diffusion coefficients in u-space
    b : (N+1,) rotated vector a @ R; b[1:] vanish at the solution
    beta : nonlinear coefficient b[0]**2 used by the PDE solver
    residual : max |b[i]|, i >= 1
    iterations : root-solver iteration count (0 for N = 0)
    """

    D: np.ndarray
    R: np.ndarray
    eigenvalues: np.ndarray
    p: np.ndarray
    b: np.ndarray
    beta: float
    residual: float
    iterations: int

    @property
    def b0(self) -> float:
        return float(self.b[0])


@dataclass(frozen=True)
class FactorizationReport:
    max_offdiag: float
    offdiag_tol: float
    residual: float
    residual_tol: float
    passed: bool


def _sorted_eig(D_diag: np.ndarray, A: np.ndarray, a: np.ndarray):
    """Eigendecomposition of diag(D_diag) @ A under the package convention.

    Columns are unit-norm with the largest-magnitude component positive.
    The column maximizing |a . r| comes first (it carries the nonlinear
    direction); the rest are ordered by descending eigenvalue.
    """
    M = D_diag[:, None] * A
    try:
        lam, R = np.linalg.eig(M)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError(f"eigendecomposition of D @ A failed: {exc}") from exc
    scale = max(1.0, float(np.max(np.abs(lam))))
    if np.max(np.abs(lam.imag)) > _COMPLEX_TOL * scale:
        raise FactorizationError(
            "D @ A has a complex spectrum for d = "
            f"{np.array2string(D_diag[:-1], precision=6)}; the transform assumes real "
            "eigenvalues"
        )
    lam = lam.real
    R = R.real
    norms = np.linalg.norm(R, axis=0)
    if np.any(norms == 0.0) or np.any(~np.isfinite(norms)):
        raise FactorizationError("degenerate eigenvector matrix for D @ A")
    R = R / norms
    flip = R[np.argmax(np.abs(R), axis=0), np.arange(R.shape[1])] < 0
    R[:, flip] *= -1.0
    aR = a @ R
    j0 = int(np.argmax(np.abs(aR)))
    rest = sorted((j for j in range(R.shape[1]) if j != j0), key=lambda j: -lam[j])
    order = [j0] + rest
    return lam[order], R[:, order]


def residual_map(
    d: np.ndarray, A: np.ndarray, a: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Signed residuals (a @ R)_{1..N} for unknown diagonal entries ``d``.

    Assembles ``D = diag(d_1..d_N, -1)``, eigendecomposes ``D @ A`` under the
    package normalization, and returns ``(C, R, eigenvalues)`` where ``C``
    holds the signed components the root solver drives to zero.
    """
    d = np.asarray(d, dtype=float)
    A = np.asarray(A, dtype=float)
    a = np.asarray(a, dtype=float)
    n1 = A.shape[0]
    if d.shape != (n1 - 1,):
        raise FactorizationError(f"d must have length N = {n1 - 1}, got {d.shape}")
    D_diag = np.append(d, -1.0)
    lam, R = _sorted_eig(D_diag, A, a)
    C = (a @ R)[1:]
    return C, R, lam


def _restart_points(N: int, d_init: np.ndarray):
    """Deterministic ladder of alternative starting points."""
    yield d_init
    yield -d_init
    for s in (0.1, 0.5, 2.0):
        yield d_init * s
    rng = np.random.default_rng(20130614)
    for _ in range(40):
        yield rng.uniform(-3.0, 3.0, size=N)


def _newton(A, a, d0, eps, max_iter):
    """Damped Newton with forward-difference Jacobian; None when stuck."""
    d = np.array(d0, dtype=float)
    N = d.size
    try:
        C, R, lam = residual_map(d, A, a)
    except FactorizationError:
        return None
    its = 0
    for its in range(1, max_iter + 1):
        nrm = float(np.max(np.abs(C)))
        if nrm <= eps:
            return d, R, lam, nrm, its - 1
        J = np.empty((N, N))
        for k in range(N):
            h = 1e-7 * max(1.0, abs(d[k]))
            dk = d.copy()
            dk[k] += h
            try:
                Ck, _, _ = residual_map(dk, A, a)
            except FactorizationError:
                return None
            J[:, k] = (Ck - C) / h
        try:
            step = np.linalg.solve(J, -C)
        except np.linalg.LinAlgError:
            return None
        t = 1.0
        improved = False
        while t > 1e-10:
            dn = d + t * step
            try:
                Cn, Rn, lamn = residual_map(dn, A, a)
            except FactorizationError:
                t *= 0.5
                continue
            if np.max(np.abs(Cn)) < nrm:
                d, C, R, lam = dn, Cn, Rn, lamn
                improved = True
                break
            t *= 0.5
        if not improved:
            return None
    nrm = float(np.max(np.abs(C)))
    if nrm <= eps:
        return d, R, lam, nrm, its
    return None


def build_transform(
    A: np.ndarray,
    a: np.ndarray,
    eps: float = 1e-12,
    d_init: np.ndarray | None = None,
    max_iter: int = 200,
) -> FactorizedSystem:
    """Solve for the diagonalizing transform (Algorithm 1 of the method).

    Parameters
    ----------
    A : (N+1, N+1) symmetric positive semi-definite diffusion matrix
    a : (N+1,) hedge-direction vector
    eps : residual tolerance on max |(a @ R)_i|, i >= 1
    d_init : starting guess for the N unknowns; defaults to 0.01 everywhere.
        If the damped Newton iteration stalls (complex-spectrum wall, singular
        Jacobian), a deterministic ladder of restart points is tried.

    Raises
    ------
    FactorizationError
        On non-convergence, a stiff (near-singular) correlation structure,
        complex spectra at the solution, or non-positive diffusion
        coefficients p_i.
    """
    A = np.asarray(A, dtype=float)
    a = np.asarray(a, dtype=float)
    n1 = A.shape[0]
    if A.shape != (n1, n1) or a.shape != (n1,):
        raise FactorizationError(f"shape mismatch: A {A.shape}, a {a.shape}")
    if not np.allclose(A, A.T, atol=1e-10 * max(1.0, np.max(np.abs(A)))):
        raise FactorizationError("A must be symmetric")
    cond_A = np.linalg.cond(A)
    if cond_A > STIFF_CONDITION_LIMIT:
        raise FactorizationError(
            "correlation structure is near-singular; the eigenproblem for D @ A is stiff "
            f"(condition number {cond_A:.3e} exceeds {STIFF_CONDITION_LIMIT:.0e}). "
            "High-precision eigen-solvers are out of scope; decorrelate the inputs."
        )
    N = n1 - 1

    if N == 0:
        lam, R = _sorted_eig(np.array([-1.0]), A, a)
        p = np.diag(R.T @ A @ R).copy()
        b = a @ R
        if p[0] <= 0.0:
            raise FactorizationError(f"diffusion coefficient p_0 = {p[0]:.3e} is not positive")
        return FactorizedSystem(
            D=np.array([-1.0]),
            R=R,
            eigenvalues=lam,
            p=p,
            b=b,
            beta=float(b[0] ** 2),
            residual=0.0,
            iterations=0,
        )

    if d_init is None:
        d_init = np.full(N, 0.01)
    d_init = np.asarray(d_init, dtype=float)
    if d_init.shape != (N,):
        raise FactorizationError(f"d_init must have length {N}, got {d_init.shape}")

    out = None
    last_residual = np.inf
    for k, start in enumerate(_restart_points(N, d_init)):
        # the caller's guess gets the full budget; ladder restarts are capped
        out = _newton(A, a, start, eps, max_iter if k == 0 else min(max_iter, 60))
        if out is not None:
            break
        try:
            C, _, _ = residual_map(start, A, a)
            last_residual = min(last_residual, float(np.max(np.abs(C))))
        except FactorizationError:
            pass
    if out is None:
        raise FactorizationError(
            f"root solve did not converge to eps = {eps:.1e} within {max_iter} iterations "
            f"(best residual seen {last_residual:.3e})"
        )
    d, R, lam, resid, its = out

    DA = np.append(d, -1.0)[:, None] * A
    cond_DA = np.linalg.cond(DA)
    if cond_DA > STIFF_CONDITION_LIMIT:
        raise FactorizationError(
            f"D @ A is stiff at the solution (condition number {cond_DA:.3e}); "
            "eigenvector accuracy cannot be guaranteed"
        )

    p = np.diag(R.T @ A @ R).copy()
    if np.any(p <= 0.0):
        k = int(np.argmin(p))
        raise FactorizationError(
            f"diffusion coefficient p_{k} = {p[k]:.3e} is not positive; "
            "the heat substeps require p_i > 0"
        )
    b = a @ R
    return FactorizedSystem(
        D=np.append(d, -1.0),
        R=R,
        eigenvalues=lam,
        p=p,
        b=b,
        beta=float(b[0] ** 2),
        residual=resid,
        iterations=its,
    )


def verify_factorization(
    fs: FactorizedSystem,
    A: np.ndarray,
    a: np.ndarray,
    offdiag_tol: float = 1e-8,
    residual_tol: float = 1e-10,
) -> FactorizationReport:
    """Recompute R.T @ A @ R and a @ R, report diagonality and residual."""
    A = np.asarray(A, dtype=float)
    a = np.asarray(a, dtype=float)
    RtAR = fs.R.T @ A @ fs.R
    off = RtAR - np.diag(np.diag(RtAR))
    max_off = float(np.max(np.abs(off))) if off.size else 0.0
    resid = float(np.max(np.abs((a @ fs.R)[1:]))) if fs.b.size > 1 else 0.0
    scale = float(np.max(np.abs(A)))
    tol_abs = offdiag_tol * scale
    return FactorizationReport(
        max_offdiag=max_off,
        offdiag_tol=tol_abs,
        residual=resid,
        residual_tol=residual_tol,
        passed=(max_off <= tol_abs) and (resid <= residual_tol),
    )
