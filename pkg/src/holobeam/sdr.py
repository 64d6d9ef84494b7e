"""Trace-form SDP solver and rank-one extraction.

Problem shape: minimize sum_j Tr(F_j X_j) subject to
sum_j Tr(G_{k,j} X_j) >= b_k for all k and X_j PSD, with Hermitian data.
Solved by a dual barrier interior-point method (see _sdp_kernel); blocks of
unequal size are padded to a common dimension before hitting the kernel.

Objective blocks are expected to be PSD up to roundoff (true for every power
matrix in this package); strongly indefinite objectives may fail to admit the
dual starting point and come back as max_iters.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ._sdp_kernel import (STATUS_INFEASIBLE, STATUS_OPTIMAL, dual_barrier_solve)

logger = logging.getLogger("holobeam.sdr")

HERMITIAN_TOL = 1e-10
RIDGE = 1e-11


class InfeasibleProblemError(RuntimeError):
    """Raised by stage solvers when an SDP has no feasible point."""


@dataclass
class TraceConstraint:
    """sum_j Tr(coefficients[j] @ X_j) >= rhs"""

    coefficients: list
    rhs: float


@dataclass
class TraceSdp:
    blocks: list                      # objective matrices F_j
    constraints: list[TraceConstraint]

    @property
    def block_dims(self) -> list[int]:
        return [int(F.shape[0]) for F in self.blocks]

    def validate(self):
        if not self.blocks:
            raise ValueError("problem has no blocks")
        if not self.constraints:
            raise ValueError("problem has no constraints")
        for j, F in enumerate(self.blocks):
            _check_hermitian(F, f"objective block {j}")
        for k, con in enumerate(self.constraints):
            if len(con.coefficients) != len(self.blocks):
                raise ValueError(f"constraint {k} has wrong block count")
            for j, Gkj in enumerate(con.coefficients):
                if Gkj.shape != self.blocks[j].shape:
                    raise ValueError(f"constraint {k} block {j} dimension mismatch")
                _check_hermitian(Gkj, f"constraint {k} block {j}")

    def dump(self, path):
        """Plain-text dump (block dims, then matrices row-major re/im pairs)."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("trace-sdp v1\n")
            fh.write("dims " + " ".join(str(d) for d in self.block_dims) + "\n")
            for j, F in enumerate(self.blocks):
                fh.write(f"objective {j}\n")
                _write_matrix(fh, F)
            for k, con in enumerate(self.constraints):
                fh.write(f"constraint {k} rhs {con.rhs!r}\n")
                for j, Gkj in enumerate(con.coefficients):
                    fh.write(f"coeff {j}\n")
                    _write_matrix(fh, Gkj)


def _write_matrix(fh, M):
    for row in np.asarray(M):
        fh.write(" ".join(f"{v.real!r} {v.imag!r}" for v in row) + "\n")


def _check_hermitian(M, label):
    M = np.asarray(M)
    scale = max(float(np.linalg.norm(M)), 1.0)
    if float(np.linalg.norm(M - M.conj().T)) > HERMITIAN_TOL * scale:
        raise ValueError(f"{label} is not Hermitian within {HERMITIAN_TOL}")


@dataclass
class SdpSolution:
    blocks: list
    objective: float
    status: str                       # "optimal" | "infeasible" | "max_iters"
    primal_residual: float
    dual_residual: float
    eigen_ratio: list[float] = field(default_factory=list)
    duality_gap: float = 0.0
    iterations: int = 0


def _eigen_ratios(blocks) -> list[float]:
    out = []
    for X in blocks:
        if X.shape[0] == 1:
            out.append(0.0)
            continue
        lam = np.linalg.eigvalsh(0.5 * (X + X.conj().T))
        if lam[-1] <= 0.0:
            out.append(0.0)
        else:
            out.append(float(max(lam[-2], 0.0) / lam[-1]))
    return out


def _constraint_values(constraints, blocks) -> np.ndarray:
    vals = np.empty(len(constraints))
    for k, con in enumerate(constraints):
        acc = 0.0
        for Gkj, Xj in zip(con.coefficients, blocks):
            acc += float(np.trace(Gkj @ Xj).real)
        vals[k] = acc
    return vals


def _rank_one_polish(p: TraceSdp, X_blocks, objective):
    """Snap a near-rank-one iterate onto the active constraint manifold.

    Keeps the dominant direction of each block and re-solves the block scales
    so every constraint holds with equality. Applicable when the block count
    matches the constraint count (one stream per user) or for single-block
    single-constraint problems; rejected whenever it does not both stay
    feasible and improve the objective.
    """
    K = len(p.constraints)
    J = len(p.blocks)
    if K != J and not (K == 1 and J == 1):
        return None
    dirs = []
    for X in X_blocks:
        lam, U = np.linalg.eigh(0.5 * (X + X.conj().T))
        if lam[-1] <= 0.0:
            return None
        dirs.append(U[:, -1])
    T = np.empty((K, J))
    for k, con in enumerate(p.constraints):
        for j, v in enumerate(dirs):
            T[k, j] = float((v.conj() @ con.coefficients[j] @ v).real)
    rhs = np.array([con.rhs for con in p.constraints])
    try:
        c = np.linalg.solve(T, rhs)
    except np.linalg.LinAlgError:
        return None
    if np.any(c < -1e-12 * (1.0 + np.abs(c).max())):
        return None
    c = np.maximum(c, 0.0)
    polished = [c[j] * np.outer(v, v.conj()) for j, v in enumerate(dirs)]
    new_obj = sum(float(np.trace(F @ Xj).real)
                  for F, Xj in zip(p.blocks, polished))
    if new_obj > objective + 1e-9 * (1.0 + abs(objective)):
        return None
    vals = _constraint_values(p.constraints, polished)
    for k, con in enumerate(p.constraints):
        if vals[k] < con.rhs - 1e-9 * (1.0 + abs(con.rhs)):
            return None
    return polished, new_obj


def solve_sdp(p: TraceSdp, tol: float = 1e-7, max_iters: int = 20000) -> SdpSolution:
    """Solve a trace-form SDP; never raises on infeasible input."""
    p.validate()
    dims = p.block_dims
    J = len(dims)
    n_max = max(dims)
    b_all = np.array([float(con.rhs) for con in p.constraints])

    # Constraints with zero coefficients are either vacuous or a proof of
    # infeasibility; the barrier cannot represent them.
    g_norms = np.array([
        np.sqrt(sum(float(np.linalg.norm(Gkj)) ** 2 for Gkj in con.coefficients))
        for con in p.constraints
    ])
    keep = []
    for k, gn in enumerate(g_norms):
        if gn == 0.0:
            if b_all[k] > 0.0:
                zeros = [np.zeros((d, d), dtype=complex) for d in dims]
                return SdpSolution(blocks=zeros, objective=0.0, status="infeasible",
                                   primal_residual=float(b_all[k]),
                                   dual_residual=0.0,
                                   eigen_ratio=[0.0] * J)
        else:
            keep.append(k)
    if not keep:
        zeros = [np.zeros((d, d), dtype=complex) for d in dims]
        return SdpSolution(blocks=zeros, objective=0.0, status="optimal",
                           primal_residual=0.0, dual_residual=0.0,
                           eigen_ratio=[0.0] * J)

    K = len(keep)
    v_scale = g_norms[keep]
    b_scaled = b_all[keep] / v_scale
    t_scale = float(np.max(np.abs(b_scaled)))
    if t_scale == 0.0:
        t_scale = 1.0
    f_scale = max(float(np.linalg.norm(F)) for F in p.blocks)
    if f_scale == 0.0:
        f_scale = 1.0

    F_stack = np.zeros((J, n_max, n_max), dtype=np.complex128)
    G_stack = np.zeros((K, J, n_max, n_max), dtype=np.complex128)
    for j, F in enumerate(p.blocks):
        d = dims[j]
        Fj = np.asarray(F, dtype=np.complex128) / f_scale
        F_stack[j, :d, :d] = 0.5 * (Fj + Fj.conj().T)
        if d < n_max:  # identity padding keeps the dual slack nonsingular
            F_stack[j, d:, d:] = np.eye(n_max - d)
        F_stack[j] += RIDGE * np.eye(n_max)
    for kk, k in enumerate(keep):
        con = p.constraints[k]
        for j, Gkj in enumerate(con.coefficients):
            d = dims[j]
            Gs = np.asarray(Gkj, dtype=np.complex128) / v_scale[kk]
            G_stack[kk, j, :d, :d] = 0.5 * (Gs + Gs.conj().T)

    n_tot = sum(dims)
    mu_min = min(1e-9, max(1e-12, 0.2 * tol / (n_tot + K)))
    X_stack, y_scaled, code, iters, mu_final = dual_barrier_solve(
        np.ascontiguousarray(F_stack), np.ascontiguousarray(G_stack),
        b_scaled / t_scale, mu_min, 1e12, max_iters)

    X_blocks = [t_scale * X_stack[j, :dims[j], :dims[j]] for j in range(J)]
    # Dual multipliers map back as y = f * y_scaled / v; the b-scale t moves
    # the primal only (X = t * X_scaled) and leaves the dual stationarity.
    y = np.zeros(len(p.constraints))
    for kk, k in enumerate(keep):
        y[k] = f_scale * y_scaled[kk] / v_scale[kk]

    objective = sum(float(np.trace(F @ Xj).real)
                    for F, Xj in zip(p.blocks, X_blocks))

    if code == STATUS_INFEASIBLE:
        return SdpSolution(blocks=X_blocks, objective=objective,
                           status="infeasible", primal_residual=np.inf,
                           dual_residual=0.0, eigen_ratio=_eigen_ratios(X_blocks),
                           iterations=iters)

    polished = _rank_one_polish(p, X_blocks, objective)
    if polished is not None:
        X_blocks, objective = polished

    vals = _constraint_values(p.constraints, X_blocks)
    primal_res = 0.0
    for k, con in enumerate(p.constraints):
        primal_res = max(primal_res, (con.rhs - vals[k]) / (1.0 + abs(con.rhs)))
    primal_res = max(primal_res, 0.0)

    dual_res = 0.0
    dual_obj = float(b_all @ y)
    for j, F in enumerate(p.blocks):
        S = np.asarray(F, dtype=complex).copy()
        for k, con in enumerate(p.constraints):
            S -= y[k] * np.asarray(con.coefficients[j])
        lam_min = float(np.linalg.eigvalsh(0.5 * (S + S.conj().T))[0])
        dual_res = max(dual_res, -lam_min / (1.0 + float(np.linalg.norm(F))))
    gap = abs(objective - dual_obj) / (1.0 + abs(objective) + abs(dual_obj))

    status = "optimal" if code == STATUS_OPTIMAL else "max_iters"
    if status == "optimal" and (primal_res > tol or dual_res > tol):
        status = "max_iters"
        logger.warning("sdp residuals above tol (primal %.2e dual %.2e)",
                       primal_res, dual_res)

    return SdpSolution(blocks=X_blocks, objective=objective, status=status,
                       primal_residual=float(primal_res),
                       dual_residual=float(dual_res),
                       eigen_ratio=_eigen_ratios(X_blocks),
                       duality_gap=float(gap), iterations=iters)


def dominant_rank_one(X: np.ndarray) -> np.ndarray:
    """Best rank-one PSD factor: sqrt(lam_max) * u_max, phase-normalized so the
    first non-negligible entry is real nonnegative. All-zero input gives the
    zero vector."""
    X = np.asarray(X, dtype=complex)
    H = 0.5 * (X + X.conj().T)
    lam, U = np.linalg.eigh(H)
    if lam[-1] <= 0.0:
        return np.zeros(X.shape[0], dtype=complex)
    v = np.sqrt(lam[-1]) * U[:, -1]
    mags = np.abs(v)
    nz = np.nonzero(mags > 1e-12 * mags.max())[0]
    if nz.size:
        v = v * np.exp(-1j * np.angle(v[nz[0]]))
    return v
