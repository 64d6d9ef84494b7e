"""DMA transmit chain: waveguide response, tunable weights, power and SINR.

The full N x N_r weight matrix is never stored densely: it is block-diagonal
with one column per microstrip, so Q*w is evaluated as q_n * w_{i(n)} via the
strip map i(n) = n // N_c. Dense constructions appear only in test oracles.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .scenario import ArrayGeometry

LORENTZ_TOL = 1e-9


class LorentzianViolation(ValueError):
    """Raised when weights tagged as constrained leave the Lorentzian circle."""


def lorentzian_point(phi):
    """Lorentzian resonance response (j + e^{j*phi}) / 2.

    Every value lies on the circle |q - j/2| = 1/2: amplitude in [0, 1] and
    phase confined to [0, pi], coupled through the single parameter phi.
    """
    return (1j + np.exp(1j * np.asarray(phi, dtype=float))) / 2.0


def lorentzian_deviation(q: np.ndarray) -> float:
    """max_n | |q_n - j/2| - 1/2 |, the circle-membership defect."""
    return float(np.max(np.abs(np.abs(q - 0.5j) - 0.5))) if len(q) else 0.0


@dataclass(eq=False)
class WaveguideResponse:
    """Diagonal waveguide propagation H (stored as its diagonal)."""

    diag_entries: np.ndarray  # (N,) complex
    alpha: float
    beta: float
    mode: str  # "identity" | "microstrip"

    @classmethod
    def identity(cls, n: int) -> "WaveguideResponse":
        return cls(diag_entries=np.ones(n, dtype=complex), alpha=0.0, beta=0.0,
                   mode="identity")

    @classmethod
    def microstrip(cls, geom: ArrayGeometry, alpha: float,
                   beta: float) -> "WaveguideResponse":
        """Per-element response exp(-d_{i,l}(alpha + j*beta)).

        d_{i,l} = (l-1)*d_x: element l sits (l-1) pitches from the feed, so the
        first element of every microstrip is unattenuated.
        """
        d = np.tile(np.arange(geom.n_c) * geom.d_x, geom.n_r)
        return cls(diag_entries=np.exp(-d * (alpha + 1j * beta)), alpha=alpha,
                   beta=beta, mode="microstrip")

    @classmethod
    def for_scenario(cls, scenario) -> "WaveguideResponse":
        cfg, geom = scenario.cfg, scenario.geom
        if cfg.waveguide_mode == "identity":
            return cls.identity(geom.n)
        return cls.microstrip(geom, cfg.waveguide_alpha, cfg.waveguide_beta)


@dataclass(eq=False)
class DmaWeights:
    """Per-element weight vector plus the Lorentzian-membership flag."""

    q: np.ndarray  # (N,) complex
    constrained: bool

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=complex)
        if self.constrained:
            dev = lorentzian_deviation(self.q)
            if dev > LORENTZ_TOL:
                raise LorentzianViolation(
                    f"constrained weights off the Lorentzian circle by {dev:.3e}")

    def to_json_obj(self) -> list:
        return [[float(v.real), float(v.imag)] for v in self.q]

    @classmethod
    def from_json_obj(cls, obj, constrained: bool) -> "DmaWeights":
        q = np.array([complex(re, im) for re, im in obj])
        return cls(q=q, constrained=constrained)


@dataclass(eq=False)
class PrecoderSet:
    """Digital precoding vectors w_m (rows) with optional Gram cache."""

    vectors: np.ndarray  # (M, N_r) complex
    gram_matrices: np.ndarray | None = field(default=None, repr=False)  # (M, N_r, N_r)

    def __post_init__(self):
        self.vectors = np.atleast_2d(np.asarray(self.vectors, dtype=complex))
        if self.gram_matrices is not None:
            for m, w in enumerate(self.vectors):
                g = self.gram_matrices[m]
                ref = np.outer(w, np.conj(w))
                if np.linalg.norm(g - ref) > 1e-8 * max(np.linalg.norm(g), 1e-300):
                    raise ValueError(f"gram matrix {m} inconsistent with its vector")

    @property
    def n_streams(self) -> int:
        return self.vectors.shape[0]

    def to_json_obj(self) -> list:
        return [[[float(v.real), float(v.imag)] for v in w] for w in self.vectors]

    @classmethod
    def from_json_obj(cls, obj) -> "PrecoderSet":
        vecs = np.array([[complex(re, im) for re, im in w] for w in obj])
        return cls(vectors=vecs)


def _strip_map(n: int, n_r: int) -> np.ndarray:
    if n % n_r != 0:
        raise ValueError(f"element count {n} not divisible by {n_r} microstrips")
    return np.repeat(np.arange(n_r), n // n_r)


def transmit_signal(H: WaveguideResponse, q: DmaWeights,
                    w: PrecoderSet) -> np.ndarray:
    """Per-stream aperture excitations x_m = H Q w_m, returned as (M, N)."""
    n = len(q.q)
    if len(H.diag_entries) != n:
        raise ValueError("waveguide response length does not match weights")
    strips = _strip_map(n, w.vectors.shape[1])
    hq = H.diag_entries * q.q
    return w.vectors[:, strips] * hq[None, :]


def transmit_power(H: WaveguideResponse, q: DmaWeights, w: PrecoderSet) -> float:
    """Total radiated power sum_m ||H Q w_m||^2 [mW]."""
    x = transmit_signal(H, q, w)
    return float(np.sum(np.abs(x) ** 2))


def user_sinr(gamma: np.ndarray, H: WaveguideResponse, q: DmaWeights,
              w: PrecoderSet, sigma_sq: float, k: int) -> float:
    """SINR of user k: |gamma^H x_k|^2 / (sum_{m != k} |gamma^H x_m|^2 + sigma^2)."""
    if k >= w.n_streams:
        raise ValueError("user index exceeds stream count")
    x = transmit_signal(H, q, w)
    received = x @ np.conj(gamma)  # (M,) entries gamma^H x_m
    powers = np.abs(received) ** 2
    interference = float(np.sum(powers) - powers[k])
    return float(powers[k] / (interference + sigma_sq))


def all_user_sinrs(channels: np.ndarray, H: WaveguideResponse, q: DmaWeights,
                   w: PrecoderSet, sigma_sq: np.ndarray) -> np.ndarray:
    """SINRs for all users at once; channels is (K, N), sigma_sq is (K,)."""
    x = transmit_signal(H, q, w)
    received = np.conj(channels) @ x.T  # (K, M) entries gamma_k^H x_m
    powers = np.abs(received) ** 2
    k_idx = np.arange(channels.shape[0])
    signal = powers[k_idx, k_idx]
    interference = powers.sum(axis=1) - signal
    return signal / (interference + np.asarray(sigma_sq, dtype=float))
