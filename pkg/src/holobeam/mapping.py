"""GMLCH: projection of ideal unit-modulus weights onto the Lorentzian circle.

Each element's mapped weight is the intersection of the circle |q - j/2| = 1/2
with the line through the ideal point e^{j*phi} and a parametric mapping
center (x_c, y_c), taking the intersection nearer the ideal point. That single
tie-break rule reproduces the three named holograms: phase-preserving (center
at the origin, lower half-plane clipped to zero), Euclidean-nearest (center at
the circle center), and unitary imaginary shift (center at j).

The line-circle intersection is solved analytically; the literal 1-D
phase-search formulation survives as oracle_grid_map for tests.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from ._accel import njit
from .dma import DmaWeights, lorentzian_point

logger = logging.getLogger("holobeam.mapping")

UNIT_MODULUS_TOL = 1e-6

# Kernel status flags (per element, bitwise).
_FLAG_DEGENERATE = 1  # ideal point coincides with the mapping center
_FLAG_MISS = 2        # line does not intersect the circle


@dataclass(frozen=True)
class MappingCenter:
    x_c: float
    y_c: float

    def as_complex(self) -> complex:
        return complex(self.x_c, self.y_c)


LCPH_CENTER = MappingCenter(0.0, 0.0)
LCEH_CENTER = MappingCenter(0.0, 0.5)
LCUSH_CENTER = MappingCenter(0.0, 1.0)


@njit(cache=True)
def _gmlch_kernel(phases, x_c, y_c):
    n = phases.shape[0]
    out = np.empty(n, dtype=np.complex128)
    flags = np.zeros(n, dtype=np.int64)
    center = complex(x_c, y_c)
    circle_center = 0.5j
    for i in range(n):
        p = np.exp(1j * phases[i])
        v = p - center
        a = (v * np.conj(v)).real
        if a < 1e-24:
            # center sits on the ideal point: no line to intersect
            out[i] = (1j + p) / 2.0
            flags[i] = _FLAG_DEGENERATE
            continue
        u = center - circle_center
        bq = 2.0 * (np.conj(u) * v).real
        c0 = (u * np.conj(u)).real - 0.25
        disc = bq * bq - 4.0 * a * c0
        if disc < 0.0:
            # line misses the circle: take the circle point nearest the line
            t_foot = -bq / (2.0 * a)
            w = center + t_foot * v - circle_center
            r = abs(w)
            z = circle_center + 0.5 * w / r
            flags[i] = _FLAG_MISS
        else:
            sq = math.sqrt(disc)
            t1 = (-bq + sq) / (2.0 * a)
            t2 = (-bq - sq) / (2.0 * a)
            z1 = center + t1 * v
            z2 = center + t2 * v
            z = z1 if abs(z1 - p) <= abs(z2 - p) else z2
        # snap exactly onto the circle to absorb quadratic roundoff
        w = z - circle_center
        r = abs(w)
        if r > 0.0:
            z = circle_center + 0.5 * w / r
        else:
            z = circle_center + 0.5  # unreachable: circle points are off-center
        out[i] = z
    return out, flags


def gmlch_map(q_hat_star: np.ndarray, center: MappingCenter) -> DmaWeights:
    """Map unit-modulus ideal weights onto the Lorentzian circle.

    The operator consumes phases only; inputs must be unit modulus. Degenerate
    elements (ideal point equal to the center) fall back to the direct
    Lorentzian response of their phase and are logged, as are lines that miss
    the circle entirely (possible for centers far outside it).
    """
    q_hat_star = np.asarray(q_hat_star, dtype=complex)
    if q_hat_star.ndim != 1:
        raise ValueError("expected a vector of ideal weights")
    mags = np.abs(q_hat_star)
    if np.any(np.abs(mags - 1.0) > UNIT_MODULUS_TOL):
        raise ValueError("gmlch_map expects unit-modulus inputs")
    phases = np.angle(q_hat_star)
    out, flags = _gmlch_kernel(np.ascontiguousarray(phases, dtype=float),
                               float(center.x_c), float(center.y_c))
    n_degenerate = int(np.sum(flags & _FLAG_DEGENERATE != 0))
    n_miss = int(np.sum(flags & _FLAG_MISS != 0))
    if n_degenerate:
        logger.info("gmlch: %d element(s) coincided with the mapping center",
                    n_degenerate)
    if n_miss:
        logger.warning("gmlch: line missed the circle for %d element(s); "
                       "used nearest circle point", n_miss)
    return DmaWeights(q=out, constrained=True)


def lcph_map(phi):
    """Phase-preserving hologram: sin(phi)*e^{j*phi} on the upper half-plane,
    zero on the lower. Equals gmlch_map with the center at the origin."""
    phi = np.mod(np.asarray(phi, dtype=float), 2.0 * math.pi)
    upper = phi <= math.pi
    out = np.where(upper, np.sin(phi) * np.exp(1j * phi), 0.0 + 0.0j)
    return out if out.ndim else complex(out)


def lceh_map(q_hat):
    """Euclidean-nearest circle point: radial projection from the circle
    center j/2. Equals gmlch_map with the center at (0, 0.5)."""
    q_hat = np.asarray(q_hat, dtype=complex)
    w = q_hat - 0.5j
    out = 0.5j + 0.5 * w / np.abs(w)
    return out if out.ndim else complex(out)


def lcush_map(phi):
    """Unitary shift along the imaginary axis: (j + e^{j*phi}) / 2 exactly.
    Equals gmlch_map with the center at (0, 1)."""
    return lorentzian_point(phi)


def _line_distance(f_val: complex, phi_star: float, center: MappingCenter) -> float:
    """Literal objective of the 1-D search: distance between the circle point
    and the line evaluated at the circle point's real part (vertical lines
    measured horizontally)."""
    cx, cy = center.x_c, center.y_c
    px, py = math.cos(phi_star), math.sin(phi_star)
    dx = px - cx
    if abs(dx) < 1e-12:
        return abs(f_val.real - cx)
    slope = (py - cy) / dx
    line_y = slope * (f_val.real - cx) + cy
    return abs(f_val.imag - line_y)


def oracle_grid_map(q_hat_n: complex, center: MappingCenter,
                    grid_points: int = 8192) -> complex:
    """Brute-force reference for gmlch_map on a single element.

    Minimizes the line-distance objective over a phase grid, refines every
    near-zero local minimum by golden-section search, and returns the refined
    candidate nearest the ideal point (the operator's tie-break). Test oracle
    only; production code uses the analytic intersection.
    """
    if grid_points < 1024:
        raise ValueError("grid_points must be >= 1024")
    phi_star = float(np.angle(q_hat_n))
    p = complex(math.cos(phi_star), math.sin(phi_star))
    if abs(p - center.as_complex()) < 1e-12:
        return complex(lorentzian_point(phi_star))

    grid = np.linspace(0.0, 2.0 * math.pi, grid_points, endpoint=False)
    dist = np.array([_line_distance(complex(lorentzian_point(g)), phi_star, center)
                     for g in grid])
    dmin = dist.min()
    step = 2.0 * math.pi / grid_points
    # local minima on the circular grid, kept if near the global minimum
    prev = np.roll(dist, 1)
    nxt = np.roll(dist, -1)
    cand = np.nonzero((dist <= prev) & (dist <= nxt)
                      & (dist <= dmin + 10.0 * step))[0]

    def refine(idx: int) -> float:
        lo, hi = grid[idx] - step, grid[idx] + step
        gr = (math.sqrt(5.0) - 1.0) / 2.0
        a, b = lo, hi
        c = b - gr * (b - a)
        d = a + gr * (b - a)
        fc = _line_distance(complex(lorentzian_point(c)), phi_star, center)
        fd = _line_distance(complex(lorentzian_point(d)), phi_star, center)
        for _ in range(80):
            if fc < fd:
                b, d, fd = d, c, fc
                c = b - gr * (b - a)
                fc = _line_distance(complex(lorentzian_point(c)), phi_star, center)
            else:
                a, c, fc = c, d, fd
                d = a + gr * (b - a)
                fd = _line_distance(complex(lorentzian_point(d)), phi_star, center)
        return 0.5 * (a + b)

    best_point = None
    best_key = None
    for idx in cand:
        phi_ref = refine(int(idx))
        f_ref = complex(lorentzian_point(phi_ref))
        d_ref = _line_distance(f_ref, phi_star, center)
        on_line = d_ref <= 1e-6
        key = (0 if on_line else 1, abs(f_ref - p) if on_line else d_ref)
        if best_key is None or key < best_key:
            best_key = key
            best_point = f_ref
    return best_point
