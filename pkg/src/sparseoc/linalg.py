"""
Sparse kernels and Krylov machinery for the reduced saddle-point systems.

The control subproblem of the heterogeneous ADMM reduces, after eliminating
the adjoint variable, to the 2x2 block system

    [ (1/gamma) M   K ] [y]   [rhs_top   ]
    [      -K       M ] [u] = [rhs_bottom]      gamma = alpha/2 + sigma.

Two backends solve it: a one-time sparse LU of the block matrix ("direct"),
and right-preconditioned GMRES with the modified HSS block preconditioner

    P = (1/gamma) [[I, sqrt(gamma) I], [-sqrt(gamma) I, gamma I]] diag(G, G),
    G = M + sqrt(gamma) K,

whose inverse costs two G-solves plus a closed-form 2x2 block inversion.
G itself is factored once per (grid, gamma); a Jacobi-preconditioned
Chebyshev semi-iteration is provided as the inexact alternative for the
mass-dominated regime.

Matrices are CSR and immutable once assembled; every solver call owns its
workspace, so concurrent solves on shared operators are safe.
"""

import numpy as np
import scipy.sparse as sp
from dataclasses import dataclass
from scipy.sparse.linalg import splu


class FactorizationError(RuntimeError):
    """Raised when a matrix turns out to be numerically singular."""


def spmv(A, x):
    """Sparse matrix-vector product with a dimension check."""
    x = np.asarray(x)
    if A.shape[1] != x.shape[0]:
        raise ValueError(f"dimension mismatch: {A.shape} @ {x.shape}")
    return A @ x


class Factorization:
    """Sparse LU wrapper; solve() is accurate to ~1e-12 relative residual."""

    def __init__(self, A):
        A = sp.csc_matrix(A)
        self.shape = A.shape
        try:
            self._lu = splu(A)
        except RuntimeError as exc:
            raise FactorizationError(str(exc)) from exc
        if not np.all(np.isfinite(self._lu.U.diagonal())):
            raise FactorizationError("LU factor contains non-finite pivots")

    def solve(self, rhs):
        return self._lu.solve(np.asarray(rhs, dtype=float))


def factorize(A):
    """Factor a square sparse matrix for repeated solves."""
    if A.shape[0] != A.shape[1]:
        raise ValueError("can only factorize square matrices")
    return Factorization(A)


@dataclass
class InnerSolveStats:
    iterations: int
    final_relative_residual: float
    preconditioner_applications: int
    converged: bool
    residual_history: list = None


def chebyshev_semi_iteration(G_apply, rhs, steps, eig_bounds, jacobi_diag=None):
    """Chebyshev semi-iteration for G x = rhs.

    eig_bounds = (lmin, lmax) must bracket the spectrum of D^{-1} G where D
    is the Jacobi diagonal (identity when jacobi_diag is None).  One step
    collapses to the damped Jacobi update x = 2/(lmin+lmax) * D^{-1} rhs.
    """
    lmin, lmax = eig_bounds
    if not (0.0 < lmin <= lmax):
        raise ValueError(f"eigenvalue bounds must be positive, got {eig_bounds}")
    if steps < 1:
        raise ValueError("need at least one Chebyshev step")
    rhs = np.asarray(rhs, dtype=float)
    dinv = 1.0 if jacobi_diag is None else 1.0 / np.asarray(jacobi_diag)

    theta = 0.5 * (lmax + lmin)
    delta = 0.5 * (lmax - lmin)
    x = np.zeros_like(rhs)
    r = rhs.copy()
    d = (dinv * r) / theta
    if delta == 0.0:                      # single eigenvalue: scaled Jacobi
        for _ in range(steps):
            x = x + d
            r = rhs - G_apply(x)
            d = (dinv * r) / theta
        return x
    sigma1 = theta / delta
    rho = 1.0 / sigma1
    for _ in range(steps - 1):
        x = x + d
        r = r - G_apply(d)
        rho_next = 1.0 / (2.0 * sigma1 - rho)
        d = rho_next * rho * d + (2.0 * rho_next / delta) * (dinv * r)
        rho = rho_next
    return x + d


def pmhss_apply(M, K, gamma, G_solver, r):
    """Apply the inverse of the modified-HSS block preconditioner to r.

    P = (1/gamma) [[I, sg I], [-sg I, gamma I]] diag(G, G) with
    sg = sqrt(gamma) and G = M + sg K; the block-scalar factor is inverted
    in closed form ((1/gamma)[[1, sg], [-sg, gamma]] has determinant 2),
    then G_solver supplies the two G-solves.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    n = M.shape[0]
    sg = np.sqrt(gamma)
    r1, r2 = r[:n], r[n:]
    # inverse of the scalar factor: 0.5 * [[gamma, -sg], [sg, 1]]
    s1 = 0.5 * (gamma * r1 - sg * r2)
    s2 = 0.5 * (sg * r1 + r2)
    return np.concatenate([G_solver(s1), G_solver(s2)])


def gmres(A_apply, P_apply, rhs, tol, max_iter=500, restart=50, x0=None):
    """Right-preconditioned restarted GMRES.

    Stops when the true residual satisfies ||rhs - A x|| <= tol * ||rhs||
    (right preconditioning keeps the recurrence residual equal to the true
    one).  Happy breakdown counts as convergence; hitting max_iter is
    reported through the stats flag, never an exception.
    """
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    rhs = np.asarray(rhs, dtype=float)
    n = rhs.shape[0]
    if P_apply is None:
        P_apply = lambda v: v
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()

    norm_b = np.linalg.norm(rhs)
    if norm_b == 0.0:
        return np.zeros(n), InnerSolveStats(0, 0.0, 0, True, [])
    target = tol * norm_b

    total_iters = 0
    precond_apps = 0
    history = []
    res = np.linalg.norm(rhs - A_apply(x))
    while total_iters < max_iter:
        if res <= target:
            break
        m = min(restart, max_iter - total_iters)
        V = np.zeros((m + 1, n))
        H = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)

        r = rhs - A_apply(x)
        beta = np.linalg.norm(r)
        V[0] = r / beta
        g[0] = beta

        j = 0
        for j in range(m):
            z = P_apply(V[j])
            precond_apps += 1
            # copy: operators may return their argument (e.g. identity)
            w = np.array(A_apply(z), dtype=float)
            for i in range(j + 1):          # modified Gram-Schmidt
                H[i, j] = w @ V[i]
                w -= H[i, j] * V[i]
            H[j + 1, j] = np.linalg.norm(w)
            happy = H[j + 1, j] < 1e-14 * beta
            if not happy:
                V[j + 1] = w / H[j + 1, j]
            for i in range(j):              # apply stored Givens rotations
                t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = t
            denom = np.hypot(H[j, j], H[j + 1, j])
            cs[j] = H[j, j] / denom
            sn[j] = H[j + 1, j] / denom
            H[j, j] = denom
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            total_iters += 1
            res = abs(g[j + 1])
            history.append(res)
            if res <= target or happy or total_iters >= max_iter:
                break
        k = j + 1
        ym = np.linalg.solve(H[:k, :k], g[:k])
        x = x + P_apply(V[:k].T @ ym)
        precond_apps += 1
        res = np.linalg.norm(rhs - A_apply(x))

    converged = res <= target * (1.0 + 1e-12) or res <= target
    return x, InnerSolveStats(total_iters, res / norm_b, precond_apps,
                              converged, history)


@dataclass
class BlockSaddleSystem:
    """The reduced 2x2 saddle system in (y, u) with weight gamma."""

    M: sp.csr_matrix
    K: sp.csr_matrix
    gamma: float
    rhs_top: np.ndarray
    rhs_bottom: np.ndarray

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        n = self.M.shape[0]
        if not (self.K.shape == (n, n) and len(self.rhs_top) == n
                and len(self.rhs_bottom) == n):
            raise ValueError("inconsistent saddle-system dimensions")


def saddle_matrix(M, K, gamma):
    """Assemble [[(1/gamma) M, K], [-K, M]] as one sparse matrix."""
    return sp.bmat([[M / gamma, K], [-K, M]], format="csr")


class SaddleSolver:
    """Reusable solver for a fixed (M, K, gamma) saddle operator.

    The direct backend factors the block matrix once; the pmhss_gmres
    backend factors G = M + sqrt(gamma) K once and runs right-preconditioned
    GMRES.  Both report the achieved ||r1|| + ||r2|| in the stats.
    """

    def __init__(self, M, K, gamma, gmres_restart=50, gmres_max_iter=500):
        self.M = M
        self.K = K
        self.gamma = gamma
        self.n = M.shape[0]
        self.gmres_restart = gmres_restart
        self.gmres_max_iter = gmres_max_iter
        self._A = saddle_matrix(M, K, gamma)
        self._direct = None
        self._G_fact = None

    def _direct_fact(self):
        if self._direct is None:
            self._direct = factorize(self._A)
        return self._direct

    def _G_solver(self):
        if self._G_fact is None:
            G = (self.M + np.sqrt(self.gamma) * self.K).tocsc()
            self._G_fact = factorize(G)
        return self._G_fact.solve

    def solve(self, rhs_top, rhs_bottom, backend="direct", tol=1e-10, x0=None):
        """Solve for (y, u); returns (y, u, InnerSolveStats).

        tol is the absolute target on ||r1|| + ||r2||.
        """
        rhs = np.concatenate([rhs_top, rhs_bottom])
        norm_b = np.linalg.norm(rhs)
        if backend == "direct":
            x = self._direct_fact().solve(rhs)
            r = rhs - self._A @ x
            x += self._direct_fact().solve(r)      # one refinement step
            stats_iters, papps = 0, 0
        elif backend == "pmhss_gmres":
            if norm_b == 0.0:
                x = np.zeros(2 * self.n)
                stats_iters, papps = 0, 0
            else:
                G_solve = self._G_solver()
                P = lambda r: pmhss_apply(self.M, self.K, self.gamma, G_solve, r)
                # ||r1|| + ||r2|| <= sqrt(2) ||r||_2, so aim for tol/sqrt(2)
                rel = tol / (np.sqrt(2.0) * norm_b)
                x, st = gmres(lambda v: self._A @ v, P, rhs, rel,
                              max_iter=self.gmres_max_iter,
                              restart=self.gmres_restart, x0=x0)
                stats_iters, papps = st.iterations, st.preconditioner_applications
        else:
            raise ValueError(f"unknown saddle backend {backend!r}")

        y, u = x[:self.n], x[self.n:]
        r = rhs - self._A @ x
        achieved = np.linalg.norm(r[:self.n]) + np.linalg.norm(r[self.n:])
        rel_res = achieved / norm_b if norm_b > 0 else 0.0
        return y, u, InnerSolveStats(stats_iters, rel_res, papps,
                                     achieved <= max(tol, 1e-30) or norm_b == 0.0)


def solve_saddle(system, backend="direct", tol=1e-10):
    """One-shot solve of a BlockSaddleSystem; see SaddleSolver for reuse."""
    solver = SaddleSolver(system.M, system.K, system.gamma)
    return solver.solve(system.rhs_top, system.rhs_bottom, backend=backend, tol=tol)


def estimate_mkinv_norm(M, factorK, steps=50, seed=0):
    """Power-iteration estimate of ||M K^{-1}||_2 (cached by the callers).

    Iterates on (M K^{-1})(M K^{-1})^T = M K^{-1} K^{-1} M using the
    K factorization; 50 steps resolve the dominant singular value well
    beyond the accuracy the inexactness schedule needs.
    """
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(M.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(steps):
        w = M @ factorK.solve(factorK.solve(M @ v))
        lam = np.linalg.norm(w)
        if lam == 0.0:
            return 0.0
        v = w / lam
    return float(np.sqrt(lam))
