"""
Outer optimization methods for the discretized sparse control problem.

Four solvers share the termination residuals of prox.py:

* solve_ihadmm       -- heterogeneous ADMM: M-weighted penalty in the u-step
                        (reduced 2x2 saddle solve), W-weighted penalty in the
                        z-step (closed form), inexact inner solves driven by
                        a summable tolerance sequence eps_k.
* solve_classical_admm -- Euclidean-penalty ADMM; its 3x3 block system has no
                        cheap elimination and is factored once per run.
* solve_apg          -- accelerated proximal gradient (FISTA) with doubling
                        backtracking for the curvature constant and gradient
                        based restart.
* solve_pdas         -- primal-dual active set (semismooth Newton): classify
                        every dof against the thresholds +-c w_i beta and the
                        bounds, fix the active ones, solve the remaining
                        coupled linear system, repeat until the sets freeze.

solve_two_phase runs ihADMM to moderate accuracy and hands its thresholded
iterate z (with y, p and the stationarity-consistent multiplier
mu = M p - alpha T z) to PDAS for polishing.

A solver run is single-threaded and deterministic for a given config; problem
data is immutable, so distinct runs may execute concurrently.
"""

import time
import numpy as np
import scipy.sparse as sp
from dataclasses import dataclass

from .linalg import (SaddleSolver, factorize, estimate_mkinv_norm,
                     FactorizationError, InnerSolveStats)
from .prox import (z_update_ihadmm, z_update_classical, prox_g_euclidean,
                   grad_f, kkt_residual_pdas, admm_residuals_weighted,
                   dist_subdifferential_g)

_GOLDEN = 0.5 * (1.0 + np.sqrt(5.0))


@dataclass
class SolverConfig:
    """Shared solver parameters; None picks the documented per-solver default.

    sigma defaults to 0.1*alpha, tau to 1 (heterogeneous ADMM) or 1.618
    (classical ADMM).  eps0/eps_decay define the summable inner tolerance
    sequence eps_k = eps0 / (k+1)^eps_decay used by the inexact u-step.
    """

    tol: float = 1e-6
    max_iter: int = 500
    sigma: float = None
    tau: float = None
    eps0: float = 1e-2
    eps_decay: float = 1.2
    inner_backend: str = "direct"
    pdas_c: float = 1.0
    gmres_restart: int = 50
    gmres_max_iter: int = 500
    apg_restart: bool = True
    log_path: str = None

    def validate(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.sigma is not None and self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.tau is not None and not (0.0 < self.tau < _GOLDEN):
            raise ValueError(f"tau must lie in (0, {_GOLDEN:.4f})")
        if self.eps_decay <= 1.0:
            raise ValueError("eps_decay must exceed 1 so that sum(eps_k) < inf")
        if self.inner_backend not in ("direct", "pmhss_gmres"):
            raise ValueError(f"unknown inner backend {self.inner_backend!r}")
        if self.pdas_c <= 0:
            raise ValueError("active-set parameter c must be positive")
        return self


@dataclass
class IterateState:
    """The (u, z, lambda, y, p[, mu]) tuple every solver carries."""

    u: np.ndarray
    z: np.ndarray = None
    lam: np.ndarray = None
    y: np.ndarray = None
    p: np.ndarray = None
    mu: np.ndarray = None


@dataclass
class ConvergenceReport:
    solver: str
    iterations: int
    eta_history: list
    Rh_history: list
    inner_stats: list
    wall_time: float
    converged: bool
    final_state: IterateState
    phase_iterations: tuple = None

    @property
    def final_eta(self):
        return self.eta_history[-1].eta if self.eta_history else np.inf

    def write_log(self, path):
        """Per-iteration convergence log as machine-readable CSV."""
        with open(path, "w") as fh:
            fh.write("iter,eta1,eta2,eta3,eta4,eta5,eta,Rh,inner_iters\n")
            for k, res in enumerate(self.eta_history):
                rh = self.Rh_history[k] if k < len(self.Rh_history) else ""
                it = (self.inner_stats[k].iterations
                      if k < len(self.inner_stats) else 0)
                vals = ",".join(_fmt(v) for v in res.as_tuple())
                fh.write(f"{k + 1},{vals},{_fmt(rh)},{it}\n")


def _fmt(v):
    if v == "":
        return ""
    return np.format_float_scientific(v, precision=16, trim="-")


def _zero_state(n):
    z = np.zeros(n)
    return IterateState(u=z.copy(), z=z.copy(), lam=z.copy())


def _check_warm(warm, n):
    if warm is None:
        return _zero_state(n)
    for name in ("u", "z", "lam"):
        v = getattr(warm, name)
        if v is not None and len(v) != n:
            raise ValueError(f"warm state field {name} has wrong length")
    u = warm.u if warm.u is not None else np.zeros(n)
    return IterateState(u=u.copy(),
                        z=warm.z.copy() if warm.z is not None else u.copy(),
                        lam=warm.lam.copy() if warm.lam is not None else np.zeros(n),
                        y=None if warm.y is None else warm.y.copy(),
                        p=None if warm.p is None else warm.p.copy(),
                        mu=None if warm.mu is None else warm.mu.copy())


def _finish(report, config):
    if config.log_path:
        report.write_log(config.log_path)
    return report


def solve_ihadmm(problem, config=None, warm=None, callback=None, factorK=None):
    """Heterogeneous ADMM with inexact saddle-point u-steps."""
    config = (config or SolverConfig()).validate()
    sigma = config.sigma if config.sigma is not None else 0.1 * problem.alpha
    tau = config.tau if config.tau is not None else 1.0
    gamma = 0.5 * problem.alpha + sigma
    M, K, W = problem.M, problem.K, problem.W
    n = problem.n

    t0 = time.perf_counter()
    if factorK is None:
        factorK = factorize(K)
    factorM = factorize(M)
    saddle = SaddleSolver(M, K, gamma, config.gmres_restart, config.gmres_max_iter)
    inexact = config.inner_backend == "pmhss_gmres"
    if inexact:
        mk_norm = estimate_mkinv_norm(M, factorK)
        # residual budget of the error-vector map delta = gamma M K^{-1} r1
        # + (M K^{-1})^2 r2, capped so the M^{-1}-weighted residual norms
        # (amplified by at most 2/h, since lambda_min(M) >= h^2/4) can never
        # block eta <= tol
        denom = np.sqrt(2.0) * mk_norm * max(mk_norm, gamma)
        cap = 0.25 * config.tol * problem.h / max(1.0, gamma)

    state = _check_warm(warm, n)
    u, z, lam = state.u, state.z, state.lam
    eta_hist, rh_hist, inner_hist = [], [], []
    converged = False
    myc = M @ problem.yc
    myd = M @ problem.yd

    for k in range(config.max_iter):
        rhs_top = (K @ (sigma * z - lam) + myd) / gamma
        rhs_bottom = -myc
        if inexact:
            eps_k = config.eps0 / (k + 1.0) ** config.eps_decay
            tol_inner = min(eps_k / denom, cap)
        else:
            tol_inner = 1e-13
        y, u_new, stats = saddle.solve(rhs_top, rhs_bottom,
                                       backend=config.inner_backend,
                                       tol=tol_inner)
        p = gamma * u_new - sigma * z + lam
        z = z_update_ihadmm(u_new, lam, problem, sigma)
        lam = lam + tau * sigma * (u_new - z)
        u = u_new

        state = IterateState(u=u, z=z, lam=lam, y=y, p=p)
        Mlam = M @ lam
        res = admm_residuals_weighted(u, z, Mlam, y, p, problem, factorM)
        eta_hist.append(res)
        rh_hist.append(_Rh_from(u, z, Mlam, problem, factorK))
        inner_hist.append(stats)
        if callback is not None:
            callback(k, state)
        if inexact and not stats.converged:
            break
        if res.eta <= config.tol:
            converged = True
            break

    report = ConvergenceReport("ihadmm", len(eta_hist), eta_hist, rh_hist,
                               inner_hist, time.perf_counter() - t0,
                               converged, state)
    return _finish(report, config)


def _Rh_from(u, z, Mlam, problem, factorK):
    """R_h given M*lambda directly (avoids M-solves in the classical ADMM)."""
    r1 = Mlam + grad_f(problem, factorK, u)
    d = dist_subdifferential_g(z, Mlam, problem)
    r3 = u - z
    return float(r1 @ r1 + d @ d + r3 @ r3)


def solve_classical_admm(problem, config=None, warm=None, callback=None,
                         factorK=None):
    """Classical (Euclidean-penalty) ADMM; the 3x3 system is factored once."""
    config = (config or SolverConfig()).validate()
    sigma = config.sigma if config.sigma is not None else 0.1 * problem.alpha
    tau = config.tau if config.tau is not None else 1.618
    M, K = problem.M, problem.K
    n = problem.n

    t0 = time.perf_counter()
    if factorK is None:
        factorK = factorize(K)
    factorM = factorize(M)
    A3 = sp.bmat([[M, None, K],
                  [None, 0.5 * problem.alpha * M + sigma * sp.identity(n), -M],
                  [K, -M, None]], format="csc")
    fact = factorize(A3)

    state = _check_warm(warm, n)
    u, z = state.u, state.z
    lam_c = M @ state.lam      # euclidean multiplier; state stores M^{-1} lam_c
    myc = M @ problem.yc
    myd = M @ problem.yd
    eta_hist, rh_hist, inner_hist = [], [], []
    converged = False

    for k in range(config.max_iter):
        rhs = np.concatenate([myd, sigma * z - lam_c, myc])
        x = fact.solve(rhs)
        y, u, p = x[:n], x[n:2 * n], x[2 * n:]
        z = z_update_classical(u, lam_c, problem, sigma)
        lam_c = lam_c + tau * sigma * (u - z)

        res = admm_residuals_weighted(u, z, lam_c, y, p, problem, factorM)
        eta_hist.append(res)
        rh_hist.append(_Rh_from(u, z, lam_c, problem, factorK))
        inner_hist.append(InnerSolveStats(0, 0.0, 0, True))
        if callback is not None:
            callback(k, IterateState(u=u, z=z, lam=None, y=y, p=p))
        if res.eta <= config.tol:
            converged = True
            break

    lam = factorM.solve(lam_c)
    state = IterateState(u=u, z=z, lam=lam, y=y, p=p)
    report = ConvergenceReport("classical_admm", len(eta_hist), eta_hist,
                               rh_hist, inner_hist, time.perf_counter() - t0,
                               converged, state)
    return _finish(report, config)


def _f_and_grad(problem, factorK, u):
    """f(u), grad f(u) and the state y in two K-solves."""
    y = factorK.solve(problem.M @ (u + problem.yc))
    d = y - problem.yd
    Md = problem.M @ d
    fval = 0.5 * d @ Md + 0.25 * problem.alpha * u @ (problem.M @ u)
    grad = 0.5 * problem.alpha * (problem.M @ u) + problem.M @ factorK.solve(Md)
    return fval, grad, y


def solve_apg(problem, config=None, warm=None, callback=None, factorK=None):
    """FISTA with doubling backtracking on the curvature constant."""
    config = (config or SolverConfig()).validate()
    n = problem.n
    t0 = time.perf_counter()
    if factorK is None:
        factorK = factorize(problem.K)
    factorM = factorize(problem.M)

    state = _check_warm(warm, n)
    u = state.u
    x = u.copy()
    tk = 1.0
    # cheap curvature seed; backtracking only ever increases it
    L = 0.5 * problem.alpha * float(problem.M.diagonal().max())
    eta_hist, rh_hist, inner_hist = [], [], []
    converged = False

    for k in range(config.max_iter):
        fx, gx, _ = _f_and_grad(problem, factorK, x)
        doublings = 0
        while True:
            u_new = prox_g_euclidean(x - gx / L, L, problem)
            diff = u_new - x
            fu, _, y_new = _f_and_grad(problem, factorK, u_new)
            upper = fx + gx @ diff + 0.5 * L * (diff @ diff)
            if fu <= upper + 1e-12 * max(1.0, abs(fx)):
                break
            L *= 2.0
            doublings += 1
            if doublings > 60:
                report = ConvergenceReport(
                    "apg", len(eta_hist), eta_hist, rh_hist, inner_hist,
                    time.perf_counter() - t0, False,
                    IterateState(u=u, z=u.copy(), lam=None))
                return _finish(report, config)

        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * tk * tk))
        momentum = (tk - 1.0) / t_next
        x_next = u_new + momentum * (u_new - u)
        if config.apg_restart and gx @ (u_new - u) > 0.0:
            t_next = 1.0            # adaptive restart when momentum misaligns
            x_next = u_new.copy()
        u, x, tk = u_new, x_next, t_next

        p = factorK.solve(problem.M @ (problem.yd - y_new))
        it_state = IterateState(u=u, z=u.copy(), y=y_new, p=p,
                                lam=p - 0.5 * problem.alpha * u)
        res = kkt_residual_pdas(it_state, problem, factorM=factorM)
        eta_hist.append(res)
        Mlam = problem.M @ (p - 0.5 * problem.alpha * u)
        rh_hist.append(_Rh_from(u, u, Mlam, problem, factorK))
        inner_hist.append(InnerSolveStats(doublings, 0.0, 0, True))
        if callback is not None:
            callback(k, it_state)
        if res.eta <= config.tol:
            converged = True
            break

    report = ConvergenceReport("apg", len(eta_hist), eta_hist, rh_hist,
                               inner_hist, time.perf_counter() - t0,
                               converged, it_state)
    return _finish(report, config)


# PDAS dof classification codes
_AT_A, _AT_B, _AT_0, _INACT_POS, _INACT_NEG = range(5)


def _classify(u, mu, problem, c):
    """Active/inactive partition of Algorithm-step-1 with deterministic ties.

    Strict inequalities as printed; boundary-equality dofs fall through to
    the inactive set matching the sign of u + c mu.
    """
    w = problem.W
    t = u + c * mu
    thr = c * w * problem.beta
    return np.where(t - problem.a < -thr, _AT_A,
                    np.where(t - problem.b > thr, _AT_B,
                             np.where(np.abs(t) < thr, _AT_0,
                                      np.where(t >= 0.0, _INACT_POS, _INACT_NEG))))


def solve_pdas(problem, config=None, warm=None, callback=None, factorK=None):
    """Primal-dual active set method on the z-eliminated problem."""
    config = (config or SolverConfig()).validate()
    c = config.pdas_c
    M, K, W = problem.M, problem.K, problem.W
    n = problem.n
    T = (0.5 * (M + sp.diags(W))).tocsr()

    t0 = time.perf_counter()
    factorM = factorize(M)
    state = _check_warm(warm, n)
    u = state.u
    if state.mu is not None:
        mu = state.mu
    elif state.p is not None:
        mu = M @ state.p - problem.alpha * (T @ u)
    else:
        mu = np.zeros(n)

    myc = M @ problem.yc
    myd = M @ problem.yd
    eta_hist, rh_hist, inner_hist = [], [], []
    converged = False
    prev_code = None
    y = p = None

    for k in range(config.max_iter):
        code = _classify(u, mu, problem, c)
        if prev_code is not None and np.array_equal(code, prev_code):
            converged = True        # active sets repeat: finite termination
            break
        prev_code = code

        active = code <= _AT_0
        free = ~active
        u_fix = np.where(code == _AT_A, problem.a,
                         np.where(code == _AT_B, problem.b, 0.0))
        mu_fix = np.where(code == _INACT_POS, W * problem.beta,
                          -W * problem.beta)
        ia = np.flatnonzero(active)
        jf = np.flatnonzero(free)
        nf = len(jf)

        rhs_state = M[:, ia] @ u_fix[ia] + myc if len(ia) else myc.copy()
        try:
            if nf:
                A = sp.bmat(
                    [[K, None, -M[:, jf]],
                     [M, K, None],
                     [None, -M[jf, :], problem.alpha * T[np.ix_(jf, jf)]]],
                    format="csc")
                rhs = np.concatenate([rhs_state, myd, -mu_fix[jf]])
                if len(ia):
                    rhs[2 * n:] -= problem.alpha * (T[np.ix_(jf, ia)] @ u_fix[ia])
            else:
                A = sp.bmat([[K, None], [M, K]], format="csc")
                rhs = np.concatenate([rhs_state, myd])
            fact = factorize(A)
            x = fact.solve(rhs)
            for _ in range(2):      # refinement: the blocks span ~1/alpha
                x += fact.solve(rhs - A @ x)    # orders of magnitude in scale
            y, p = x[:n], x[n:2 * n]
            u = u_fix.copy()
            if nf:
                u[jf] = x[2 * n:]
        except FactorizationError:
            break                   # singular reduced system: abort flagged

        mu = mu_fix.copy()
        mu[ia] = (M @ p - problem.alpha * (T @ u))[ia]

        it_state = IterateState(u=u, z=u.copy(), y=y, p=p, mu=mu,
                                lam=p - 0.5 * problem.alpha * u)
        res = kkt_residual_pdas(it_state, problem, factorM=factorM)
        eta_hist.append(res)
        Mlam = mu + 0.5 * problem.alpha * (W * u)
        if factorK is not None:
            rh_hist.append(_Rh_from(u, u, Mlam, problem, factorK))
        else:
            rh_hist.append(np.nan)
        inner_hist.append(InnerSolveStats(0, 0.0, 0, True))
        if callback is not None:
            callback(k, it_state)
        if res.eta <= config.tol:
            converged = True
            break

    final = IterateState(u=u, z=u.copy(), y=y, p=p, mu=mu,
                         lam=None if p is None else p - 0.5 * problem.alpha * u)
    report = ConvergenceReport("pdas", len(eta_hist), eta_hist, rh_hist,
                               inner_hist, time.perf_counter() - t0,
                               converged, final)
    return _finish(report, config)


def solve_two_phase(problem, config_phase1=None, config_phase2=None,
                    factorK=None):
    """ihADMM to moderate accuracy, then PDAS warm-started from its iterate."""
    config_phase1 = config_phase1 or SolverConfig(tol=1e-3)
    config_phase2 = config_phase2 or SolverConfig(tol=1e-10)
    if config_phase1.tol < config_phase2.tol:
        raise ValueError("phase tolerances must satisfy tol1 >= tol2")
    t0 = time.perf_counter()
    if factorK is None:
        factorK = factorize(problem.K)

    rep1 = solve_ihadmm(problem, config_phase1, factorK=factorK)
    if not rep1.converged:
        return ConvergenceReport("two_phase", rep1.iterations,
                                 rep1.eta_history, rep1.Rh_history,
                                 rep1.inner_stats,
                                 time.perf_counter() - t0, False,
                                 rep1.final_state,
                                 phase_iterations=(rep1.iterations, 0))

    # hand PDAS the thresholded copy z: it is exactly zero / exactly at the
    # bounds on the active sets, so the first classification is reliable
    # even though the unthresholded u still carries O(tol) noise there
    s1 = rep1.final_state
    T = 0.5 * (problem.M + sp.diags(problem.W))
    mu0 = problem.M @ s1.p - problem.alpha * (T @ s1.z)
    warm = IterateState(u=s1.z.copy(), z=s1.z.copy(), lam=s1.lam, y=s1.y,
                        p=s1.p, mu=mu0)
    rep2 = solve_pdas(problem, config_phase2, warm=warm, factorK=factorK)

    report = ConvergenceReport(
        "two_phase", rep1.iterations + rep2.iterations,
        rep1.eta_history + rep2.eta_history,
        rep1.Rh_history + rep2.Rh_history,
        rep1.inner_stats + rep2.inner_stats,
        time.perf_counter() - t0, rep2.converged, rep2.final_state,
        phase_iterations=(rep1.iterations, rep2.iterations))
    if config_phase2.log_path:
        report.write_log(config_phase2.log_path)
    return report


SOLVERS = {
    "ihadmm": solve_ihadmm,
    "classical_admm": solve_classical_admm,
    "apg": solve_apg,
    "pdas": solve_pdas,
}
