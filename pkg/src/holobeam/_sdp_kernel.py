"""Dual barrier Newton kernel for trace-form SDPs.

Solves  max  b^T y  s.t.  S_j = F_j - sum_k y_k G_{k,j} >= 0,  y >= 0,
the Lagrange dual of  min sum_j Tr(F_j X_j)  s.t. sum_j Tr(G_{k,j} X_j) >= b_k,
X_j >= 0, by path-following on the log-det barrier. The primal iterate is
recovered from the central-path identity X_j = mu * S_j^{-1}.

The caller (sdr.solve_sdp) normalizes the problem, pads blocks to a common
size, and adds a small ridge to F so that y = small is strictly dual feasible.
Everything here is nopython-compatible numpy: with HOLOBEAM_NUMBA disabled the
identical source runs as plain vectorized numpy.
"""

import numpy as np

from ._accel import njit

STATUS_OPTIMAL = 0
STATUS_INFEASIBLE = 1
STATUS_MAX_ITERS = 2


@njit(cache=True)
def _assemble(F, G, y, S):
    J = F.shape[0]
    K = y.shape[0]
    for j in range(J):
        acc = F[j].copy()
        for k in range(K):
            acc -= y[k] * G[k, j]
        S[j] = acc


@njit(cache=True)
def _barrier_value(F, G, b, y, mu, S):
    """(feasible, phi) at y; phi = b.y + mu*(sum logdet S_j + sum log y_k)."""
    K = y.shape[0]
    for k in range(K):
        if y[k] <= 0.0:
            return False, 0.0
    _assemble(F, G, y, S)
    ld_sum = 0.0
    for j in range(F.shape[0]):
        lam = np.linalg.eigvalsh(S[j])
        if lam[0] <= 0.0:
            return False, 0.0
        ld_sum += np.sum(np.log(lam))
    return True, b @ y + mu * (ld_sum + np.sum(np.log(y)))


@njit(cache=True)
def dual_barrier_solve(F, G, b, mu_min, y_max, max_newton):
    """Returns (X, y, status, newton_iters, mu_final).

    F: (J, n, n) complex Hermitian, strictly positive definite.
    G: (K, J, n, n) complex Hermitian constraint coefficients.
    b: (K,) real right-hand sides (sense >=).
    """
    J, n, _ = F.shape
    K = b.shape[0]
    S = np.empty((J, n, n), dtype=np.complex128)
    A = np.empty((K, J, n, n), dtype=np.complex128)
    X = np.zeros((J, n, n), dtype=np.complex128)

    # Strictly feasible start: shrink a uniform y until every S_j > 0.
    y = np.full(K, 1e-2)
    started = False
    for _ in range(160):
        feasible, _ = _barrier_value(F, G, b, y, 1.0, S)
        if feasible:
            started = True
            break
        y *= 0.5
    if not started:
        return X, y, STATUS_MAX_ITERS, 0, 1.0

    mu = 1.0
    iters = 0
    status = STATUS_MAX_ITERS
    last_stage = mu <= mu_min
    grad = np.zeros(K)
    hess = np.zeros((K, K))

    while iters < max_newton:
        centered = False
        while iters < max_newton:
            iters += 1
            _assemble(F, G, y, S)
            ld_sum = 0.0
            lost_pd = False
            for j in range(J):
                lam, U = np.linalg.eigh(S[j])
                if lam[0] <= 0.0:
                    lost_pd = True
                    break
                ld_sum += np.sum(np.log(lam))
                s_inv = (U / lam) @ np.conj(U.T)
                for k in range(K):
                    A[k, j] = s_inv @ G[k, j]
            if lost_pd:
                break

            for k in range(K):
                tr_k = 0.0
                for j in range(J):
                    tr_k += np.trace(A[k, j]).real
                grad[k] = b[k] - mu * tr_k + mu / y[k]
            for k in range(K):
                for l in range(k, K):
                    acc = 0.0
                    for j in range(J):
                        acc += np.sum(A[k, j] * A[l, j].T).real
                    hess[k, l] = mu * acc
                    hess[l, k] = hess[k, l]
            damp = 0.0
            for k in range(K):
                hess[k, k] += mu / (y[k] * y[k])
                damp += hess[k, k]
            damp = damp / K * 1e-13
            for k in range(K):
                hess[k, k] += damp

            dy = np.linalg.solve(hess, grad)
            dec2 = grad @ dy
            if dec2 < 0.0:
                dec2 = 0.0
            if dec2 <= max(1e-6 * mu, 1e-26):
                centered = True
                break

            phi0 = b @ y + mu * (ld_sum + np.sum(np.log(y)))
            t = 1.0
            accepted = False
            for _ls in range(60):
                y_new = y + t * dy
                feasible, phi_new = _barrier_value(F, G, b, y_new, mu, S)
                if feasible and phi_new >= phi0 + 0.25 * t * dec2 - 1e-12 * (1.0 + abs(phi0)):
                    y = y_new
                    accepted = True
                    break
                t *= 0.5
            if not accepted:
                centered = True  # step below the numerical floor
                break
            if np.max(y) > y_max:
                return X, y, STATUS_INFEASIBLE, iters, mu

        if np.max(y) > y_max:
            return X, y, STATUS_INFEASIBLE, iters, mu
        if last_stage and centered:
            status = STATUS_OPTIMAL
            break
        if iters >= max_newton:
            break
        mu *= 0.2
        if mu <= mu_min:
            mu = mu_min
            last_stage = True

    # Primal recovery from the central-path identity.
    _assemble(F, G, y, S)
    for j in range(J):
        lam, U = np.linalg.eigh(S[j])
        for i in range(n):
            if lam[i] < 1e-300:
                lam[i] = 1e-300
        x_j = mu * ((U / lam) @ np.conj(U.T))
        X[j] = 0.5 * (x_j + np.conj(x_j.T))
    return X, y, status, iters, mu
