"""Outer alternating optimization: precoder SDP, weight SDP, Lorentzian
mapping, with best-so-far retention and convergence tracking.

Method variants: the fully digital benchmark solves a single SDP; the
Unrestricted variant runs the loop with the mapping step skipped (ideal
weights used directly); GMLCH variants map the unitized ideal weights through
a fixed center; ARLCH fits the full-amplitude ideal weights adaptively. The
mapping may transiently violate the SINR targets; the precoder re-solve that
follows restores them, so every retained iterate is feasible.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .arlch import arlch_map
from .dma import (DmaWeights, PrecoderSet, WaveguideResponse, all_user_sinrs,
                  lorentzian_point, transmit_power)
from .mapping import (LCEH_CENTER, LCPH_CENTER, LCUSH_CENTER, MappingCenter,
                      gmlch_map)
from .precoder import build_precoder_problem, solve_fd, solve_precoders
from .scenario import Scenario, channel_matrix
from .sdr import InfeasibleProblemError
from .weights import build_weight_problem, solve_ideal_weights

logger = logging.getLogger("holobeam.driver")

DEFAULT_OUTER_ITERS = 15
DEFAULT_REL_TOL = 1e-4
INIT_RETRY_CAP = 5
SINR_SLACK = 1e-6

_PRESETS = {
    "lcph": LCPH_CENTER,
    "lceh": LCEH_CENTER,
    "lcush": LCUSH_CENTER,
}


@dataclass(frozen=True)
class Method:
    """Optimization method selector.

    variant is one of fd | unrestricted | gmlch | arlch; the named holograms
    are gmlch at their preset centers and keep their names as labels.
    """

    variant: str
    center: MappingCenter | None = None
    name: str = ""

    def __post_init__(self):
        if self.variant not in ("fd", "unrestricted", "gmlch", "arlch"):
            raise ValueError(f"unknown method variant {self.variant!r}")
        if self.variant == "gmlch" and self.center is None:
            raise ValueError("gmlch requires a mapping center")
        if not self.name:
            object.__setattr__(self, "name", self._default_name())

    def _default_name(self) -> str:
        if self.variant == "gmlch":
            for name, preset in _PRESETS.items():
                if preset == self.center:
                    return name
            return f"gmlch({self.center.x_c:g},{self.center.y_c:g})"
        return self.variant

    @classmethod
    def parse(cls, name: str, map_center: tuple[float, float] | None = None) -> "Method":
        key = name.strip().lower()
        if key in _PRESETS:
            return cls(variant="gmlch", center=_PRESETS[key])
        if key in ("fd", "unrestricted", "arlch"):
            return cls(variant=key)
        if key == "gmlch":
            if map_center is None:
                raise ValueError("gmlch needs --map-center x,y")
            return cls(variant="gmlch", center=MappingCenter(*map_center))
        raise ValueError(f"unknown method {name!r}")


@dataclass
class RunResult:
    method: str
    p_tx: float                       # [mW]
    trace: list[tuple[int, float]]    # (iteration, p_tx)
    precoders: PrecoderSet | None
    weights: DmaWeights | None
    achieved_sinrs: np.ndarray | None
    status: str                       # converged | max_iters | infeasible
    weight_rank_gaps: list[float] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return self.status != "infeasible"


def _init_weights(n: int, seed: int, init: str) -> DmaWeights:
    """Lorentzian starting weights: seeded uniform phases or the deterministic
    maximum-amplitude point phi = pi/2 ('all-j')."""
    if init == "all-j":
        phases = np.full(n, math.pi / 2.0)
    else:
        rng = np.random.default_rng(seed)
        phases = rng.uniform(0.0, 2.0 * math.pi, size=n)
    return DmaWeights(q=lorentzian_point(phases), constrained=True)


def _map_ideal_weights(method: Method, q_star: np.ndarray,
                       outer_iter: int = 0,
                       arlch_trace_sink: list | None = None) -> DmaWeights:
    if method.variant == "unrestricted":
        scale = float(np.max(np.abs(q_star)))
        return DmaWeights(q=q_star / scale, constrained=False)
    if method.variant == "arlch":
        if arlch_trace_sink is not None:
            weights, states = arlch_map(q_star, return_trace=True)
            arlch_trace_sink.extend((outer_iter, s.iteration, s.diameter, s.cost)
                                    for s in states)
            return weights
        return arlch_map(q_star)
    phases = np.angle(q_star)
    return gmlch_map(np.exp(1j * phases), method.center)


def optimize(scenario: Scenario, method: Method, T: int = DEFAULT_OUTER_ITERS,
             seed: int = 0, init: str = "random",
             rel_tol: float = DEFAULT_REL_TOL,
             arlch_trace_sink: list | None = None) -> RunResult:
    """Run one end-to-end optimization; deterministic in all arguments."""
    cfg, geom = scenario.cfg, scenario.geom
    if cfg.n_users > geom.n_r:
        raise ValueError(
            f"{cfg.n_users} users exceed the {geom.n_r} available streams")
    channels = channel_matrix(scenario)
    delta = cfg.sinr_targets
    sigma_sq = cfg.noise_power
    tol = cfg.tolerances.sdp_tol

    if method.variant == "fd":
        try:
            w, p_tx, _sol = solve_fd(channels, delta, sigma_sq, tol=tol)
        except InfeasibleProblemError:
            return RunResult(method=method.name, p_tx=math.nan, trace=[],
                             precoders=None, weights=None, achieved_sinrs=None,
                             status="infeasible")
        H_fd = WaveguideResponse.identity(geom.n)
        q_fd = DmaWeights(q=np.ones(geom.n, dtype=complex), constrained=False)
        sinrs = _fd_sinrs(channels, w, sigma_sq)
        return RunResult(method=method.name, p_tx=p_tx, trace=[(0, p_tx)],
                         precoders=w, weights=q_fd, achieved_sinrs=sinrs,
                         status="converged")

    H = WaveguideResponse.for_scenario(scenario)

    q = None
    w = None
    p_curr = math.inf
    for attempt in range(INIT_RETRY_CAP + 1):
        attempt_seed = int(np.random.SeedSequence([seed, attempt]).generate_state(
            1, np.uint64)[0])
        q_try = _init_weights(geom.n, attempt_seed, init)
        prob = build_precoder_problem(channels, H, q_try, geom.n_r, delta, sigma_sq)
        try:
            w, p_curr, _sol = solve_precoders(prob, tol=tol)
            q = q_try
            break
        except InfeasibleProblemError:
            logger.info("init attempt %d infeasible (%s)", attempt, method.name)
    if q is None:
        return RunResult(method=method.name, p_tx=math.nan, trace=[],
                         precoders=None, weights=None, achieved_sinrs=None,
                         status="infeasible")

    p_curr = transmit_power(H, q, w)
    trace = [(0, p_curr)]
    best = (p_curr, w, q)
    rank_gaps: list[float] = []
    status = "max_iters"
    for t in range(1, T + 1):
        wprob = build_weight_problem(channels, H, w, delta, sigma_sq)
        try:
            q_star, wsol = solve_ideal_weights(wprob, tol=tol)
        except InfeasibleProblemError:
            logger.warning("weight SDP infeasible at iteration %d (%s)",
                           t, method.name)
            break
        rank_gaps.append(wsol.eigen_ratio[0])
        q_new = _map_ideal_weights(method, q_star, outer_iter=t,
                                   arlch_trace_sink=arlch_trace_sink)
        prob = build_precoder_problem(channels, H, q_new, geom.n_r, delta, sigma_sq)
        try:
            w_new, _p_sdp, _sol = solve_precoders(prob, tol=tol)
        except InfeasibleProblemError:
            logger.warning("precoder SDP infeasible at iteration %d (%s)",
                           t, method.name)
            break
        q, w = q_new, w_new
        p_new = transmit_power(H, q, w)
        trace.append((t, p_new))
        if p_new < best[0]:
            sinrs = all_user_sinrs(channels, H, q, w, sigma_sq)
            if np.all(sinrs >= delta * (1.0 - SINR_SLACK)):
                best = (p_new, w, q)
        rel = abs(p_new - p_curr) / p_new if p_new > 0 else 0.0
        p_curr = p_new
        if rel < rel_tol:
            status = "converged"
            break

    p_best, w_best, q_best = best
    sinrs = all_user_sinrs(channels, H, q_best, w_best, sigma_sq)
    return RunResult(method=method.name, p_tx=float(p_best), trace=trace,
                     precoders=w_best, weights=q_best, achieved_sinrs=sinrs,
                     status=status, weight_rank_gaps=rank_gaps)


def _fd_sinrs(channels: np.ndarray, w: PrecoderSet,
              sigma_sq: np.ndarray) -> np.ndarray:
    received = np.conj(channels) @ w.vectors.T
    powers = np.abs(received) ** 2
    idx = np.arange(channels.shape[0])
    signal = powers[idx, idx]
    interference = powers.sum(axis=1) - signal
    return signal / (interference + np.asarray(sigma_sq, dtype=float))


def convergence_trace(result: RunResult) -> list[tuple[int, float, float]]:
    """(iteration, p_tx, relative change) rows; the first row's change is nan."""
    rows = []
    prev = None
    for t, p in result.trace:
        rel = math.nan if prev is None else abs(p - prev) / p
        rows.append((t, p, rel))
        prev = p
    return rows


def best_so_far_envelope(result: RunResult) -> list[float]:
    """Running minimum of the trace powers (non-increasing by construction)."""
    env = []
    cur = math.inf
    for _t, p in result.trace:
        cur = min(cur, p)
        env.append(cur)
    return env
