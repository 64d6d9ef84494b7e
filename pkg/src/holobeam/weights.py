"""Substage 2: ideal (unrestricted) DMA-weight SDP for fixed precoders.

The Kronecker lifting of the weight vector collapses after zero removal:
(H Q w_m)_n = H_n * w_{m,i(n)} * q_n, so the power kernel of stream m is the
diagonal matrix |H_n w_{m,i(n)}|^2 and the per-user receive kernel is the
rank-one outer product of c_{k,m,n} = conj(H_n w_{m,i(n)}) * gamma_{k,n}.
The L = N_r^2*N_c dimensional intermediates exist only in test oracles.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .dma import PrecoderSet, WaveguideResponse
from .sdr import (InfeasibleProblemError, TraceConstraint, TraceSdp,
                  dominant_rank_one, solve_sdp)

logger = logging.getLogger("holobeam.weights")

RANK_GAP_LOG_THRESHOLD = 1e-3


@dataclass
class WeightProblem:
    """Reduced-form data of the weight SDP.

    b_diag[m] holds the diagonal of the PSD power kernel of stream m;
    c[k, m] holds the vector whose outer product is the receive kernel of
    user k under stream m.
    """

    b_diag: np.ndarray     # (M, N) real >= 0
    c: np.ndarray          # (K, M, N) complex
    delta: np.ndarray      # (K,)
    sigma_sq: np.ndarray   # (K,)

    @property
    def n_elements(self) -> int:
        return self.b_diag.shape[1]

    def power_kernel(self, m: int) -> np.ndarray:
        """Dense Hermitian power kernel of stream m (tests and SDP assembly)."""
        return np.diag(self.b_diag[m]).astype(complex)

    def receive_kernel(self, k: int, m: int) -> np.ndarray:
        """Dense rank-one receive kernel of (user k, stream m)."""
        return np.outer(self.c[k, m], np.conj(self.c[k, m]))


def build_weight_problem(channels: np.ndarray, H: WaveguideResponse,
                         w: PrecoderSet, delta: np.ndarray,
                         sigma_sq: np.ndarray) -> WeightProblem:
    channels = np.atleast_2d(np.asarray(channels, dtype=complex))
    K, n = channels.shape
    n_r = w.vectors.shape[1]
    if n % n_r != 0:
        raise ValueError("element count not divisible by microstrip count")
    strips = np.repeat(np.arange(n_r), n // n_r)
    hw = H.diag_entries[None, :] * w.vectors[:, strips]      # (M, N)
    b_diag = np.abs(hw) ** 2
    # y_{k,m} = c_{k,m}^H q must reproduce gamma_k^H H Q w_m.
    c = np.conj(hw)[None, :, :] * channels[:, None, :]       # (K, M, N)
    return WeightProblem(b_diag=b_diag, c=c,
                         delta=np.asarray(delta, dtype=float),
                         sigma_sq=np.asarray(sigma_sq, dtype=float))


def received_amplitudes(prob: WeightProblem, q: np.ndarray) -> np.ndarray:
    """y_{k,m} = c_{k,m}^H q for all users and streams, shape (K, M)."""
    return np.einsum("kmn,n->km", np.conj(prob.c), q)


def to_trace_sdp(prob: WeightProblem) -> TraceSdp:
    """Single N x N block; constraint k mixes the rank-one receive kernels."""
    K = prob.delta.shape[0]
    M = prob.b_diag.shape[0]
    objective = np.diag(prob.b_diag.sum(axis=0)).astype(complex)
    constraints = []
    for k in range(K):
        g = prob.receive_kernel(k, k).copy()
        for m in range(M):
            if m != k:
                g -= prob.delta[k] * prob.receive_kernel(k, m)
        constraints.append(
            TraceConstraint([g], float(prob.delta[k] * prob.sigma_sq[k])))
    return TraceSdp(blocks=[objective], constraints=constraints)


def solve_ideal_weights(prob: WeightProblem, tol: float = 1e-7):
    """Solve the relaxed weight SDP and extract the dominant rank-one vector.

    Returns (q_star, SdpSolution). The relaxation drops the rank-one
    constraint, so the eigenvalue gap of the lifted solution is reported and
    logged; extraction proceeds regardless (the Lorentzian mapping and the
    precoder re-solve downstream restore feasibility).
    """
    sdp = to_trace_sdp(prob)
    sol = solve_sdp(sdp, tol=tol)
    if sol.status == "infeasible":
        raise InfeasibleProblemError("weight SDP infeasible")
    if sol.status != "optimal":
        logger.warning("weight SDP returned %s (primal %.2e dual %.2e)",
                       sol.status, sol.primal_residual, sol.dual_residual)
    ratio = sol.eigen_ratio[0]
    if ratio > RANK_GAP_LOG_THRESHOLD:
        logger.info("weight SDP rank-one gap lambda2/lambda1 = %.3e", ratio)
    q_star = dominant_rank_one(sol.blocks[0])
    return q_star, sol
