"""Adaptive-radius Lorentzian mapping: alternating optimization of the circle
diameter and the per-element phases to fit the full-amplitude ideal weights.

Unlike GMLCH this consumes amplitudes as well as phases: the diameter step is
the closed-form least-squares projection of the unitary-circle vector onto the
ideal weights, and the phase step is the radial projection of each ideal
weight onto the circle of the current diameter (the fitting line passes
through that circle's center). Both substeps minimize the shared cost exactly,
so the cost is non-increasing. The output is re-normalized to the unitary
Lorentzian circle; the diameter is absorbed by the precoder re-solve.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ._accel import njit
from .dma import DmaWeights

logger = logging.getLogger("holobeam.arlch")

EPS_DIAMETER = 1e-6
DEFAULT_EPSILON = 1e-4
DEFAULT_MAX_ITERS = 50


@dataclass(frozen=True)
class ArlchState:
    """One AO iterate: phases, diameter, and the fit cost."""

    iteration: int
    diameter: float
    cost: float


def optimal_diameter(q_hat: np.ndarray, q_star: np.ndarray) -> float:
    """Closed-form diameter minimizing ||q_star - D*q_hat||^2:
    D = Re(q_hat^H q_star) / (q_hat^H q_hat), clamped below at EPS_DIAMETER
    (anti-aligned ideal weights are degenerate and logged)."""
    q_hat = np.asarray(q_hat, dtype=complex)
    q_star = np.asarray(q_star, dtype=complex)
    denom = float(np.vdot(q_hat, q_hat).real)
    if denom <= 0.0:
        raise ValueError("q_hat must be nonzero")
    d_opt = float(np.vdot(q_hat, q_star).real) / denom
    if d_opt <= 0.0:
        logger.warning("degenerate diameter %.3e clamped to %.1e", d_opt, EPS_DIAMETER)
        return EPS_DIAMETER
    return max(d_opt, EPS_DIAMETER)


def phases_for_diameter(q_star: np.ndarray, diameter: float) -> np.ndarray:
    """Per-element phases whose circle points (center j*D/2, radius D/2) are
    nearest each ideal weight along the line through the circle center.

    Ideal weights exactly at the circle center default to phi = pi/2."""
    if diameter <= 0.0:
        raise ValueError("diameter must be positive")
    q_star = np.asarray(q_star, dtype=complex)
    phases, n_degenerate = _phase_kernel(np.ascontiguousarray(q_star), diameter)
    if n_degenerate:
        logger.info("arlch: %d ideal weight(s) at the circle center; "
                    "defaulted their phase to pi/2", int(n_degenerate))
    return phases


@njit(cache=True)
def _phase_kernel(q_star, diameter):
    n = q_star.shape[0]
    phases = np.empty(n)
    center = 0.5j * diameter
    n_degenerate = 0
    for i in range(n):
        w = q_star[i] - center
        r = abs(w)
        if r < 1e-300:
            phases[i] = np.pi / 2.0
            n_degenerate += 1
            continue
        point = center + 0.5 * diameter * (w / r)
        # invert f(phi, D) = D*(j + e^{j*phi})/2 at the projected point
        phases[i] = np.angle(2.0 * point / diameter - 1j) % (2.0 * np.pi)
    return phases, n_degenerate


@njit(cache=True)
def _arlch_kernel(q_star, epsilon, max_iters, eps_diameter):
    n = q_star.shape[0]
    phases = np.angle(q_star) % (2.0 * np.pi)
    q_hat = (1j + np.exp(1j * phases)) / 2.0
    diam_trace = np.zeros(max_iters)
    cost_trace = np.zeros(max_iters)
    n_degenerate = 0
    count = 0
    e_prev = 0.0  # sentinel per the AO initialization, not a true cost
    for t in range(max_iters):
        denom = np.vdot(q_hat, q_hat).real
        d_t = np.vdot(q_hat, q_star).real / denom
        if d_t <= eps_diameter:
            d_t = eps_diameter
            n_degenerate += 1
        center = 0.5j * d_t
        for i in range(n):
            w = q_star[i] - center
            r = abs(w)
            if r < 1e-300:
                phases[i] = np.pi / 2.0
            else:
                point = center + 0.5 * d_t * (w / r)
                phases[i] = np.angle(2.0 * point / d_t - 1j) % (2.0 * np.pi)
        q_hat = (1j + np.exp(1j * phases)) / 2.0
        resid = q_star - d_t * q_hat
        e_t = np.vdot(resid, resid).real
        diam_trace[count] = d_t
        cost_trace[count] = e_t
        count += 1
        if e_t == 0.0:
            break
        if t > 0 and abs(e_t - e_prev) / e_t < epsilon:
            break
        e_prev = e_t
    return q_hat, phases, diam_trace[:count], cost_trace[:count], n_degenerate


def arlch_map(q_star: np.ndarray, epsilon: float = DEFAULT_EPSILON,
              max_iters: int = DEFAULT_MAX_ITERS, return_trace: bool = False):
    """Run the AO loop and return unitary-circle DMA weights.

    The relative-cost convergence test starts from the second iterate (the
    initial cost is a sentinel zero); an exact fit terminates immediately.
    With return_trace=True also returns the list of per-iteration ArlchState.
    """
    q_star = np.asarray(q_star, dtype=complex)
    if q_star.ndim != 1 or not np.any(np.abs(q_star) > 0.0):
        raise ValueError("q_star must be a nonzero vector")
    q_hat, _phases, diams, costs, n_degen = _arlch_kernel(
        np.ascontiguousarray(q_star), float(epsilon), int(max_iters),
        EPS_DIAMETER)
    if n_degen:
        logger.warning("arlch: diameter step clamped %d time(s)", int(n_degen))
    weights = DmaWeights(q=q_hat, constrained=True)
    if return_trace:
        trace = [ArlchState(iteration=t + 1, diameter=float(d), cost=float(e))
                 for t, (d, e) in enumerate(zip(diams, costs))]
        return weights, trace
    return weights


def fit_cost(q_star: np.ndarray, phases: np.ndarray, diameter: float) -> float:
    """||q_star - f(phases, diameter)||^2 for testing the AO invariants."""
    f = diameter * (1j + np.exp(1j * np.asarray(phases, dtype=float))) / 2.0
    resid = np.asarray(q_star, dtype=complex) - f
    return float(np.vdot(resid, resid).real)
