"""Substage 1: digital-precoder SDP for fixed DMA weights, plus the fully
digital benchmark.

The trace matrices exploit the block-diagonal weight structure: Z is diagonal
with per-microstrip energy and each P_k is the rank-one outer product of the
per-microstrip effective channel. Extracted vectors get an exact per-stream
power rebalance (directions fixed, SINR equalities re-solved), which is a
no-op up to solver accuracy but pins the targets to machine precision.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .dma import DmaWeights, PrecoderSet, WaveguideResponse
from .sdr import (InfeasibleProblemError, SdpSolution, TraceConstraint,
                  TraceSdp, dominant_rank_one, solve_sdp)

logger = logging.getLogger("holobeam.precoder")


@dataclass
class PrecoderProblem:
    z: np.ndarray          # (n, n) Hermitian PSD transmit-power kernel
    p_k: np.ndarray        # (K, n, n) Hermitian rank-one receive kernels
    delta: np.ndarray      # (K,) linear SINR targets
    sigma_sq: np.ndarray   # (K,) noise powers [mW]

    @property
    def n_users(self) -> int:
        return self.p_k.shape[0]

    @property
    def dim(self) -> int:
        return self.z.shape[0]


def build_precoder_problem(channels: np.ndarray, H: WaveguideResponse,
                           q: DmaWeights, n_r: int, delta: np.ndarray,
                           sigma_sq: np.ndarray) -> PrecoderProblem:
    """Assemble Z = (HQ)^H HQ and P_k = (gamma_k^H HQ)^H (gamma_k^H HQ)
    through the strip map, without forming the dense N x N_r weight matrix."""
    channels = np.atleast_2d(np.asarray(channels, dtype=complex))
    K, n = channels.shape
    if n % n_r != 0:
        raise ValueError("element count not divisible by microstrip count")
    hq = H.diag_entries * q.q
    if hq.shape[0] != n:
        raise ValueError("channel length does not match weight vector")
    per_strip = (np.abs(hq) ** 2).reshape(n_r, -1)
    z = np.diag(per_strip.sum(axis=1)).astype(complex)
    # u_k[i] = (gamma_k^H H Q)_i = sum_{n in strip i} conj(gamma_kn) * hq_n
    u = (np.conj(channels) * hq[None, :]).reshape(K, n_r, -1).sum(axis=2)
    p_k = np.conj(u)[:, :, None] * u[:, None, :]
    return PrecoderProblem(z=z, p_k=p_k,
                           delta=np.asarray(delta, dtype=float),
                           sigma_sq=np.asarray(sigma_sq, dtype=float))


def to_trace_sdp(prob: PrecoderProblem) -> TraceSdp:
    """One PSD block per stream; constraint k couples all streams through P_k."""
    K = prob.n_users
    blocks = [prob.z.copy() for _ in range(K)]
    constraints = []
    for k in range(K):
        coeffs = [prob.p_k[k] if m == k else -prob.delta[k] * prob.p_k[k]
                  for m in range(K)]
        constraints.append(
            TraceConstraint(coeffs, float(prob.delta[k] * prob.sigma_sq[k])))
    return TraceSdp(blocks=blocks, constraints=constraints)


def _rebalance_powers(prob: PrecoderProblem, vectors: np.ndarray):
    """Re-solve per-stream powers with directions fixed so every SINR
    constraint holds with equality. Returns None when the direction set
    cannot meet the targets (degenerate extraction)."""
    K = prob.n_users
    norms = np.linalg.norm(vectors, axis=1)
    if np.any(norms <= 0.0):
        return None
    dirs = vectors / norms[:, None]
    # a[k, m] = dir_m^H P_k dir_m = received power of stream m at user k
    a = np.einsum("mi,kij,mj->km", np.conj(dirs), prob.p_k, dirs).real
    T = -prob.delta[:, None] * a
    T[np.arange(K), np.arange(K)] = a[np.arange(K), np.arange(K)]
    rhs = prob.delta * prob.sigma_sq
    try:
        powers = np.linalg.solve(T, rhs)
    except np.linalg.LinAlgError:
        return None
    if np.any(powers <= 0.0) or not np.all(np.isfinite(powers)):
        return None
    return np.sqrt(powers)[:, None] * dirs


def solve_precoders(prob: PrecoderProblem, tol: float = 1e-7):
    """Solve the relaxed precoder problem and extract rank-one vectors.

    Returns (PrecoderSet, p_tx_mw, SdpSolution). Raises
    InfeasibleProblemError when no precoder set can meet the targets.
    """
    sdp = to_trace_sdp(prob)
    sol = solve_sdp(sdp, tol=tol)
    if sol.status == "infeasible":
        raise InfeasibleProblemError("precoder SDP infeasible")
    if sol.status != "optimal":
        logger.warning("precoder SDP returned %s (primal %.2e dual %.2e)",
                       sol.status, sol.primal_residual, sol.dual_residual)
    vectors = np.stack([dominant_rank_one(W) for W in sol.blocks])
    rebalanced = _rebalance_powers(prob, vectors)
    if rebalanced is not None:
        drift = np.linalg.norm(rebalanced - vectors) / max(np.linalg.norm(vectors), 1e-300)
        if drift > 1e-4:
            logger.warning("power rebalance moved precoders by %.2e", drift)
        vectors = rebalanced
    p_tx = float(np.einsum("mi,ij,mj->", np.conj(vectors), prob.z, vectors).real)
    return PrecoderSet(vectors=vectors), p_tx, sol


def solve_fd(channels: np.ndarray, delta: np.ndarray, sigma_sq: np.ndarray,
             tol: float = 1e-7):
    """Fully digital benchmark: one RF chain per element, x_m = w_m.

    Same SDP shape with Z = I_N and P_k = gamma_k gamma_k^H; precoders live in
    C^N. Returns (PrecoderSet, p_tx_mw, SdpSolution).
    """
    channels = np.atleast_2d(np.asarray(channels, dtype=complex))
    K, n = channels.shape
    # |gamma^H w|^2 = Tr(P W) with P[i, j] = gamma_i * conj(gamma_j).
    p_k = channels[:, :, None] * np.conj(channels)[:, None, :]
    prob = PrecoderProblem(z=np.eye(n, dtype=complex), p_k=p_k,
                           delta=np.asarray(delta, dtype=float),
                           sigma_sq=np.asarray(sigma_sq, dtype=float))
    return solve_precoders(prob, tol=tol)
