"""Inner numerical loops shared by the public API.

Every routine here is written in the subset of numpy that numba can compile.
``_build(jit)`` creates one namespace of these routines; ``backend(*fns)``
returns the compiled namespace when every user callable involved is a numba
dispatcher and the plain-Python namespace otherwise, so arbitrary Python
callables keep working (slowly) while jitted benchmark models run at
compiled speed.

Status codes are returned instead of raising so that the loops compile; the
public wrappers translate them into exceptions or MCMC rejections.
"""

from types import SimpleNamespace
import warnings

import numpy as np
from numba import njit
from numba.core.dispatcher import Dispatcher
from numba.core.errors import NumbaPerformanceWarning

warnings.filterwarnings("ignore", category=NumbaPerformanceWarning)

OK = 0
SOLVE_FAILED = 1
NON_FINITE = 2
LINALG_FAILED = 3
NOT_REVERSIBLE = 4
NOT_LOCAL = 5

STATUS_NAMES = {
    OK: "ok",
    SOLVE_FAILED: "solve_failed",
    NON_FINITE: "non_finite",
    LINALG_FAILED: "linalg_failed",
    NOT_REVERSIBLE: "not_reversible",
    NOT_LOCAL: "not_local",
}


def _build(jit):
    deco = njit if jit else (lambda f: f)

    @deco
    def leapfrog(grad_v, q, p, h, n_steps):
        g = grad_v(q)
        for _ in range(n_steps):
            p = p - 0.5 * h * g
            q = q + h * p
            g = grad_v(q)
            p = p - 0.5 * h * g
            if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
                return q, p, NON_FINITE
        return q, p, OK

    @deco
    def relaxed_value(residual, value_v, eps, x):
        r = residual(x)
        return value_v(x) + np.dot(r, r) / eps

    @deco
    def relaxed_grad(residual, jacobian, grad_v, eps, x):
        return grad_v(x) + (2.0 / eps) * (jacobian(x) @ residual(x))

    @deco
    def relaxed_leapfrog(residual, jacobian, grad_v, eps, q, p, h, n_steps):
        g = relaxed_grad(residual, jacobian, grad_v, eps, q)
        for _ in range(n_steps):
            p = p - 0.5 * h * g
            q = q + h * p
            g = relaxed_grad(residual, jacobian, grad_v, eps, q)
            p = p - 0.5 * h * g
            if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
                return q, p, NON_FINITE
        return q, p, OK

    @deco
    def rattle_step(residual, jacobian, grad_v, q, p, h, tol, max_iter, max_corr):
        j0 = jacobian(q)
        m = j0.shape[1]
        lam = np.zeros(m)
        mu = np.zeros(m)
        p_half = p - 0.5 * h * grad_v(q)
        base = q + h * p_half
        q1 = base
        if m > 0:
            converged = False
            for it in range(max_iter + 1):
                q1 = base + h * (j0 @ lam)
                r = residual(q1)
                if not np.all(np.isfinite(r)):
                    return q1, p, lam, mu, NON_FINITE
                if np.max(np.abs(r)) <= tol:
                    converged = True
                    break
                if it == max_iter:
                    break
                a = h * (jacobian(q1).T @ j0)
                try:
                    lam = lam - np.linalg.solve(a, r)
                except Exception:  # noqa: BLE001 - numba cannot bind the instance
                    return q1, p, lam, mu, LINALG_FAILED
            if not converged:
                return q1, p, lam, mu, SOLVE_FAILED
            # a correction longer than the free move means Newton reached a
            # distant root of the constraint, e.g. another component
            if np.linalg.norm(j0 @ lam) > max_corr * np.linalg.norm(p_half):
                return q1, p, lam, mu, NOT_LOCAL
            p_half = p_half + j0 @ lam
        w = p_half - 0.5 * h * grad_v(q1)
        p1 = w
        if m > 0:
            j1 = jacobian(q1)
            try:
                mu = -np.linalg.solve(j1.T @ j1, j1.T @ w)
            except Exception:  # noqa: BLE001
                return q1, p, lam, mu, LINALG_FAILED
            p1 = w + j1 @ mu
        if not (np.all(np.isfinite(q1)) and np.all(np.isfinite(p1))):
            return q1, p1, lam, mu, NON_FINITE
        return q1, p1, lam, mu, OK

    @deco
    def rattle_trajectory(residual, jacobian, grad_v, q0, p0, h, n_steps, tol,
                          max_iter, max_corr, rev_tol):
        q = q0
        p = p0
        for _ in range(n_steps):
            q, p, lam, mu, status = rattle_step(residual, jacobian, grad_v, q, p,
                                                h, tol, max_iter, max_corr)
            if status != OK:
                return q, p, status
        qb = q
        pb = -p
        for _ in range(n_steps):
            qb, pb, lam, mu, status = rattle_step(residual, jacobian, grad_v, qb,
                                                  pb, h, tol, max_iter, max_corr)
            if status != OK:
                return q, p, NOT_REVERSIBLE
        if np.max(np.abs(qb - q0)) > rev_tol:
            return q, p, NOT_REVERSIBLE
        return q, -p, OK

    @deco
    def project_cotangent(jacobian, q, p):
        j = jacobian(q)
        if j.shape[1] == 0:
            return p.copy(), OK
        try:
            coef = np.linalg.solve(j.T @ j, j.T @ p)
        except Exception:  # noqa: BLE001
            return p.copy(), LINALG_FAILED
        return p - j @ coef, OK

    @deco
    def chmc_transition(residual, jacobian, grad_v, value_v, q, p_raw, h, n_steps,
                        tol, max_iter, max_corr, rev_tol, log_u):
        # One constrained HMC update; returns (q, accepted, delta_h, status).
        p, status = project_cotangent(jacobian, q, p_raw)
        if status != OK:
            return q, False, np.inf, status
        h0 = value_v(q) + 0.5 * np.dot(p, p)
        q1, p1, status = rattle_trajectory(residual, jacobian, grad_v, q, p, h,
                                           n_steps, tol, max_iter, max_corr, rev_tol)
        if status != OK:
            return q, False, np.inf, status
        dh = value_v(q1) + 0.5 * np.dot(p1, p1) - h0
        if np.isfinite(dh) and log_u < -dh:
            return q1, True, dh, OK
        return q, False, dh, OK

    @deco
    def hmc_transition(residual, jacobian, grad_v, value_v, eps, q, p, h, n_steps,
                       log_u):
        # One HMC update on the relaxed density; returns (q, accepted, delta_h).
        h0 = relaxed_value(residual, value_v, eps, q) + 0.5 * np.dot(p, p)
        q1, p1, status = relaxed_leapfrog(residual, jacobian, grad_v, eps, q, p, h,
                                          n_steps)
        if status != OK:
            return q, False, np.inf
        dh = relaxed_value(residual, value_v, eps, q1) + 0.5 * np.dot(p1, p1) - h0
        if np.isfinite(dh) and log_u < -dh:
            return q1, True, dh
        return q, False, dh

    @deco
    def hmc_ladder(residual, jacobian, grad_v, value_v, eps, xs, ps, hs, n_steps,
                   log_us):
        # hmc_transition applied to each row of xs in place; returns accept flags.
        accepted = np.zeros(xs.shape[0], dtype=np.bool_)
        for i in range(xs.shape[0]):
            x1, ok, _ = hmc_transition(residual, jacobian, grad_v, value_v, eps[i],
                                       xs[i].copy(), ps[i], hs[i], n_steps[i],
                                       log_us[i])
            xs[i] = x1
            accepted[i] = ok
        return accepted

    @deco
    def _projection_residual(residual, jacobian, x, q, v):
        recon = q + jacobian(q) @ v - x
        r = residual(q)
        return recon, r, np.sqrt(np.dot(recon, recon) + np.dot(r, r))

    @deco
    def _projection_direction(jacobian, hessians, q, v, recon, r):
        n = q.shape[0]
        m = v.shape[0]
        j = jacobian(q)
        hs = hessians(q)
        a = np.zeros((n + m, n + m))
        top = np.eye(n)
        for i in range(m):
            top = top + v[i] * hs[i]
        a[:n, :n] = top
        a[:n, n:] = j
        a[n:, :n] = j.T
        return np.linalg.solve(a, -np.concatenate((recon, r)))

    @deco
    def project(residual, jacobian, hessians, x, tol, recon_tol, max_iter,
                max_backtrack):
        # Newton on (q, v) for q + jac(q) v = x, residual(q) = 0, from q = x, v = 0.
        n = x.shape[0]
        q = x.copy()
        v = np.zeros(residual(q).shape[0])
        recon, r, norm = _projection_residual(residual, jacobian, x, q, v)
        if not np.isfinite(norm):
            return q, v, NON_FINITE
        converged = False
        for it in range(max_iter + 1):
            if np.max(np.abs(r)) <= tol and np.max(np.abs(recon)) <= recon_tol:
                converged = True
                break
            if it == max_iter:
                break
            try:
                d = _projection_direction(jacobian, hessians, q, v, recon, r)
            except Exception:  # noqa: BLE001 - numba cannot bind the instance
                return q, v, LINALG_FAILED
            t = 1.0
            accepted = False
            for _ in range(max_backtrack + 1):
                q_new = q + t * d[:n]
                v_new = v + t * d[n:]
                recon_new, r_new, norm_new = _projection_residual(
                    residual, jacobian, x, q_new, v_new)
                if np.isfinite(norm_new) and norm_new < norm:
                    accepted = True
                    break
                t *= 0.5
            if not accepted:
                return q, v, SOLVE_FAILED
            q, v, recon, r, norm = q_new, v_new, recon_new, r_new, norm_new
        if not converged:
            return q, v, SOLVE_FAILED
        # Two extra full steps push the solution to rounding level, which the
        # finite-difference Jacobian checks rely on.
        for _ in range(2):
            try:
                d = _projection_direction(jacobian, hessians, q, v, recon, r)
            except Exception:  # noqa: BLE001
                break
            q_new = q + d[:n]
            v_new = v + d[n:]
            recon_new, r_new, norm_new = _projection_residual(
                residual, jacobian, x, q_new, v_new)
            if not (np.isfinite(norm_new) and norm_new < norm
                    and np.max(np.abs(r_new)) <= tol
                    and np.max(np.abs(recon_new)) <= recon_tol):
                break
            q, v, recon, r, norm = q_new, v_new, recon_new, r_new, norm_new
        return q, v, OK

    return SimpleNamespace(
        leapfrog=leapfrog,
        relaxed_value=relaxed_value,
        relaxed_grad=relaxed_grad,
        relaxed_leapfrog=relaxed_leapfrog,
        rattle_step=rattle_step,
        rattle_trajectory=rattle_trajectory,
        project_cotangent=project_cotangent,
        chmc_transition=chmc_transition,
        hmc_transition=hmc_transition,
        hmc_ladder=hmc_ladder,
        project=project,
    )


_PY = _build(False)
_JIT = None


def is_jitted(fn):
    return isinstance(fn, Dispatcher)


def backend(*fns):
    """Kernel namespace able to call every function in ``fns``."""
    global _JIT
    if fns and all(is_jitted(f) for f in fns):
        if _JIT is None:
            _JIT = _build(True)
        return _JIT
    return _PY
