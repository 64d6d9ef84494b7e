"""Array geometry, user placement, and near-field LoS channel construction.

Conventions: the planar array lies in the y-z plane centered at the origin,
boresight is +x, and users live in the x-y plane at (rho*cos(theta),
rho*sin(theta), 0). Elements along a microstrip step in y by d_x; microstrips
stack in z by d_y. Element n = (i-1)*N_c + l (row-major, 1-based in the math,
0-based in code).

All powers are in milliwatts internally; SINR targets are linear ratios.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0  # m/s

THETA_MAX_DEG = 85.0
RHO_MIN_FRACTION = 0.1


@dataclass(eq=False)
class ArrayGeometry:
    """Uniform planar DMA array: N_r microstrips of N_c elements each."""

    n_r: int
    n_c: int
    d_x: float  # element spacing along a microstrip [m]
    d_y: float  # microstrip spacing [m]
    element_positions: np.ndarray = field(repr=False)  # (N, 3) [m]

    def __post_init__(self):
        if self.n_r < 1 or self.n_c < 1:
            raise ValueError("array must have at least one microstrip and one element")
        if self.element_positions.shape != (self.n, 3):
            raise ValueError("element_positions must have shape (N_r*N_c, 3)")

    @property
    def n(self) -> int:
        return self.n_r * self.n_c

    @property
    def strip_index(self) -> np.ndarray:
        """Microstrip index i(n) for each element, shape (N,)."""
        return np.repeat(np.arange(self.n_r), self.n_c)


def planar_array(n_r: int, n_c: int, d_x: float, d_y: float) -> ArrayGeometry:
    """Build a centered y-z plane array with boresight +x."""
    ll = np.arange(n_c) - (n_c - 1) / 2.0
    ii = np.arange(n_r) - (n_r - 1) / 2.0
    y = np.tile(ll * d_x, n_r)
    z = np.repeat(ii * d_y, n_c)
    pos = np.column_stack([np.zeros_like(y), y, z])
    return ArrayGeometry(n_r=n_r, n_c=n_c, d_x=d_x, d_y=d_y, element_positions=pos)


@dataclass(frozen=True)
class UserLocation:
    rho: float  # radial distance [m]
    theta: float  # azimuth from boresight [rad]
    cartesian: tuple[float, float, float]

    @classmethod
    def from_polar(cls, rho: float, theta: float) -> "UserLocation":
        return cls(rho=rho, theta=theta,
                   cartesian=(rho * math.cos(theta), rho * math.sin(theta), 0.0))


@dataclass
class Tolerances:
    """Numerical tolerances shared across the pipeline."""

    sdp_tol: float = 1e-7      # relative primal/dual residual target
    psd_tol: float = 1e-8      # PSD slack on returned blocks
    feas_tol: float = 1e-7     # per-constraint slack scale: tol*(1+|b_k|)
    lorentz_tol: float = 1e-9  # Lorentzian circle membership


@dataclass
class ScenarioConfig:
    """Physical and optimization constants for one scenario."""

    frequency: float                      # [Hz]
    n_users: int
    n_streams: int
    sinr_targets: np.ndarray              # (K,) linear
    noise_power: np.ndarray               # (K,) [mW]
    gain_exponent: float = 2.0
    waveguide_mode: str = "identity"      # "identity" | "microstrip"
    waveguide_alpha: float = 0.0          # [1/m]
    waveguide_beta: float = 0.0           # [rad/m]
    rng_seed: int = 0
    tolerances: Tolerances = field(default_factory=Tolerances)

    def __post_init__(self):
        self.sinr_targets = np.atleast_1d(np.asarray(self.sinr_targets, dtype=float))
        self.noise_power = np.atleast_1d(np.asarray(self.noise_power, dtype=float))
        if self.sinr_targets.size == 1 and self.n_users > 1:
            self.sinr_targets = np.full(self.n_users, float(self.sinr_targets[0]))
        if self.noise_power.size == 1 and self.n_users > 1:
            self.noise_power = np.full(self.n_users, float(self.noise_power[0]))
        if self.sinr_targets.size != self.n_users or self.noise_power.size != self.n_users:
            raise ValueError("per-user arrays must match n_users")
        if np.any(self.sinr_targets <= 0) or np.any(self.noise_power <= 0):
            raise ValueError("SINR targets and noise powers must be positive")
        if self.frequency <= 0:
            raise ValueError("frequency must be positive")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.frequency

    @property
    def wavenumber(self) -> float:
        return 2.0 * math.pi / self.wavelength


@dataclass
class Scenario:
    """A fully resolved problem instance: config, array, and user positions."""

    cfg: ScenarioConfig
    geom: ArrayGeometry
    users: list[UserLocation]

    def __post_init__(self):
        if len(self.users) != self.cfg.n_users:
            raise ValueError("number of users does not match config")


def fraunhofer_distance(geom: ArrayGeometry, wavelength: float) -> float:
    """Near-field boundary 2*L^2/lambda for the effective aperture length L.

    L is the array diagonal over the (N_e-1)*d_x by (N_r-1)*d_y footprint,
    with N_e the element count along the horizontal direction (= N_c here).
    A degenerate 1x1 array returns 0; callers must reject it for sampling.
    """
    if wavelength <= 0:
        raise ValueError("wavelength must be positive")
    span_x = (geom.n_c - 1) * geom.d_x
    span_y = (geom.n_r - 1) * geom.d_y
    length = math.hypot(span_x, span_y)
    return 2.0 * length * length / wavelength


def element_gain(psi, g: float):
    """Element radiation pattern: 2(g+1)cos^g(psi) up to broadside, 0 behind.

    psi is measured from boresight and must lie in [0, pi]. Accepts scalars
    or arrays.
    """
    psi_arr = np.asarray(psi, dtype=float)
    if np.any(psi_arr < 0.0) or np.any(psi_arr > math.pi):
        raise ValueError("psi must lie in [0, pi]")
    front = psi_arr <= math.pi / 2.0
    out = np.zeros_like(psi_arr)
    out[front] = 2.0 * (g + 1.0) * np.cos(psi_arr[front]) ** g
    if np.ndim(psi) == 0:
        return float(out)
    return out


def channel_vector(geom: ArrayGeometry, user: UserLocation,
                   cfg: ScenarioConfig) -> np.ndarray:
    """Near-field spherical-wave LoS channel vector for one user.

    Entry n stores the conjugate of the per-element propagation coefficient
    sqrt(G_e(psi)) * lambda/(4*pi*d) * exp(-j*beta0*d), so that applying the
    Hermitian transpose downstream recovers the raw coefficients. psi is the
    per-element angle between boresight (+x) and the element-to-user vector.
    """
    r_k = np.asarray(user.cartesian, dtype=float)
    diff = r_k[None, :] - geom.element_positions  # (N, 3)
    dist = np.linalg.norm(diff, axis=1)
    if np.any(dist <= 0.0):
        raise ValueError("user coincides with an array element (degenerate geometry)")
    cos_psi = np.clip(diff[:, 0] / dist, -1.0, 1.0)
    psi = np.arccos(cos_psi)
    gain = element_gain(psi, cfg.gain_exponent)
    lam = cfg.wavelength
    raw = np.sqrt(gain) * lam / (4.0 * math.pi * dist) * np.exp(-1j * cfg.wavenumber * dist)
    return np.conj(raw)


def sample_users(cfg: ScenarioConfig, geom: ArrayGeometry, count: int,
                 seed: int) -> list[UserLocation]:
    """Draw users uniformly over the half-disc 0.1*d_F <= rho <= d_F,
    |theta| <= 85 deg. Deterministic for a given seed."""
    if count < 1:
        raise ValueError("count must be >= 1")
    d_f = fraunhofer_distance(geom, cfg.wavelength)
    if d_f <= 0:
        raise ValueError("degenerate array: Fraunhofer distance is zero")
    rng = np.random.default_rng(seed)
    rho = rng.uniform(RHO_MIN_FRACTION * d_f, d_f, size=count)
    theta_lim = math.radians(THETA_MAX_DEG)
    theta = rng.uniform(-theta_lim, theta_lim, size=count)
    return [UserLocation.from_polar(float(r), float(t)) for r, t in zip(rho, theta)]


def _sinr_linear(sinr_db) -> np.ndarray:
    return 10.0 ** (np.atleast_1d(np.asarray(sinr_db, dtype=float)) / 10.0)


def _noise_mw(noise_dbm: float) -> float:
    return 10.0 ** (noise_dbm / 10.0)


def load_scenario(source) -> Scenario:
    """Build a Scenario from a JSON file path or an already-parsed dict.

    Schema::

        {frequency_hz, n_r, n_c, dx_over_lambda, dy_over_lambda,
         gain_exponent, noise_dbm, sinr_db (scalar | per-user list),
         users: [{rho_over_df, theta_deg}, ...] | {count, seed},
         waveguide: {alpha, beta} | "identity"}
    """
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            spec = json.load(fh)
    else:
        spec = dict(source)

    frequency = float(spec["frequency_hz"])
    lam = SPEED_OF_LIGHT / frequency
    geom = planar_array(
        n_r=int(spec["n_r"]),
        n_c=int(spec["n_c"]),
        d_x=float(spec.get("dx_over_lambda", 0.5)) * lam,
        d_y=float(spec.get("dy_over_lambda", 0.5)) * lam,
    )

    waveguide = spec.get("waveguide", "identity")
    if waveguide == "identity":
        wg_mode, wg_alpha, wg_beta = "identity", 0.0, 0.0
    else:
        wg_mode = "microstrip"
        wg_alpha = float(waveguide["alpha"])
        wg_beta = float(waveguide["beta"])

    users_spec = spec["users"]
    if isinstance(users_spec, dict):
        n_users = int(users_spec["count"])
    else:
        n_users = len(users_spec)
    if n_users < 1:
        raise ValueError("scenario must have at least one user")

    delta = _sinr_linear(spec.get("sinr_db", 30.0))
    if delta.size not in (1, n_users):
        raise ValueError("sinr_db must be scalar or one entry per user")

    cfg = ScenarioConfig(
        frequency=frequency,
        n_users=n_users,
        n_streams=min(n_users, geom.n_r),
        sinr_targets=delta,
        noise_power=np.array([_noise_mw(float(spec.get("noise_dbm", -75.0)))]),
        gain_exponent=float(spec.get("gain_exponent", 2.0)),
        waveguide_mode=wg_mode,
        waveguide_alpha=wg_alpha,
        waveguide_beta=wg_beta,
        rng_seed=int(spec.get("seed", 0)),
    )

    d_f = fraunhofer_distance(geom, cfg.wavelength)
    if isinstance(users_spec, dict):
        users = sample_users(cfg, geom, n_users, int(users_spec.get("seed", 0)))
    else:
        if d_f <= 0:
            raise ValueError("degenerate array: cannot place users by rho_over_df")
        users = [
            UserLocation.from_polar(float(u["rho_over_df"]) * d_f,
                                    math.radians(float(u["theta_deg"])))
            for u in users_spec
        ]
    return Scenario(cfg=cfg, geom=geom, users=users)


def channel_matrix(scenario: Scenario) -> np.ndarray:
    """Stack per-user channel vectors into a (K, N) matrix."""
    return np.stack([channel_vector(scenario.geom, u, scenario.cfg)
                     for u in scenario.users])
