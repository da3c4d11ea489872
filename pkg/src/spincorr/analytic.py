"""Closed-form interference probabilities.

Angles are radians; any analyzer argument may be :data:`~spincorr.optics.REMOVED`,
in which case the probability is summed over both exits of that analyzer.
The reduced forms (``prob2_coinc``, ``prob4_lr`` and the like) hold for a
50:50 splitter at zero phase and take no splitter or phase arguments;
``prob2`` and ``prob4`` cover the general case.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .optics import (
    BeamSplitterSpec,
    Removed,
    as_setting,
    phase_of,
)

FIFTY = BeamSplitterSpec()
HALF_PI = math.pi / 2


@dataclass(frozen=True)
class Visibility:
    v: float

    def __post_init__(self):
        if not 0.0 <= self.v <= 1.0:
            raise ValueError(f"visibility must lie in [0, 1], got {self.v}")

    def __float__(self):
        return float(self.v)


def _vis(v) -> float:
    return float(Visibility(float(v)))


def _channels(setting) -> list[float]:
    """Angles to sum over: the setting itself, or both exits if removed."""
    s = as_setting(setting)
    if isinstance(s, Removed):
        return [0.0, HALF_PI]
    return [s.theta]


def s_coeff(s_x: float, s_y: float, theta_i: float, theta_j: float) -> float:
    return s_x * math.cos(theta_i) * math.cos(theta_j) + s_y * math.sin(theta_i) * math.sin(theta_j)


def q_coeff(q_x: float, q_y: float, theta_i: float, theta_j: float) -> float:
    return q_x * math.sin(theta_i) * math.cos(theta_j) - q_y * math.cos(theta_i) * math.sin(theta_j)


def prob2(theta1_0, theta2_0, theta1, theta2, spec: BeamSplitterSpec = FIFTY, phi=0.0, v=1.0) -> float:
    """Coincidence of D1 and D2 for photons prepared at theta1_0, theta2_0.

    A removed input polarizer sums over two orthogonal preparations,
    which is how the unpolarized-input values are normalized.
    """
    phi = phase_of(phi)
    v = _vis(v)
    total = 0.0
    for a in _channels(theta1_0):
        for b in _channels(theta2_0):
            for c in _channels(theta1):
                for d in _channels(theta2):
                    A = s_coeff(spec.t_x, spec.t_y, a, c) * s_coeff(spec.t_x, spec.t_y, b, d)
                    B = s_coeff(spec.r_x, spec.r_y, a, d) * s_coeff(spec.r_x, spec.r_y, b, c)
                    total += A * A + B * B - 2 * v * A * B * math.cos(phi)
    return total


def prob2_coinc(theta1_0: float, theta2_0: float, theta1: float, theta2: float) -> float:
    """50:50, phi = 0 factorized form: sin^2(prep diff) sin^2(analyzer diff) / 4."""
    return 0.25 * math.sin(theta1_0 - theta2_0) ** 2 * math.sin(theta1 - theta2) ** 2


def prob2_opposite(theta1_0: float, theta2_0: float) -> float:
    return 0.5 * math.sin(theta1_0 - theta2_0) ** 2


def prob2_same_side(theta1_0: float, theta2_0: float) -> float:
    return 0.5 * (1 + math.cos(theta1_0 - theta2_0) ** 2)


def prob2_unpolarized_out(theta1_0: float, theta2_0: float, theta1: float = 0.0) -> float:
    """One analyzer in place, the other removed; independent of theta1."""
    return 0.25 * math.sin(theta1_0 - theta2_0) ** 2


def prob2_unpolarized_in(theta1: float, theta2: float) -> float:
    return 0.5 * math.sin(theta1 - theta2) ** 2


def prob2_same_side_unpolarized(theta1: float, theta2: float) -> float:
    """Both photons in one arm, read at theta1 and theta2, inputs unpolarized."""
    return 0.5 * (1 + math.cos(theta1 - theta2) ** 2)


def interference_terms4(theta1p, theta2p, theta1, theta2, spec: BeamSplitterSpec = FIFTY):
    A = q_coeff(spec.t_x, spec.t_y, theta1p, theta1) * q_coeff(spec.t_x, spec.t_y, theta2p, theta2)
    B = q_coeff(spec.r_x, spec.r_y, theta1p, theta2) * q_coeff(spec.r_x, spec.r_y, theta2p, theta1)
    return A, B


def prob4(theta1p, theta2p, theta1, theta2, spec: BeamSplitterSpec = FIFTY, phi=0.0, v=1.0) -> float:
    """All four detectors fire, one photon on each side of the central splitter."""
    phi = phase_of(phi)
    v = _vis(v)
    total = 0.0
    for a in _channels(theta1p):
        for b in _channels(theta2p):
            for c in _channels(theta1):
                for d in _channels(theta2):
                    A, B = interference_terms4(a, b, c, d, spec)
                    total += 0.25 * (A * A + B * B - 2 * v * A * B * math.cos(phi))
    return total


def prob4_lr(theta1p: float, theta2p: float, theta1: float, theta2: float) -> float:
    """Left-right factorized form at 50:50, phi = 0."""
    return math.sin(theta1p - theta2p) ** 2 * math.sin(theta1 - theta2) ** 2 / 16


def prob4_bell(theta1p: float, theta2p: float, v: float = 1.0) -> float:
    """D1' and D2' with both central polarizers removed, at visibility v.

    At v = 1 this is sin^2(diff) / 8.
    """
    return (1 - _vis(v) * math.cos(theta1p - theta2p) ** 2) / 8


def prob4_one_arm(theta1p: float, theta2p: float, theta1: float, theta2: float) -> float:
    """Both central photons in one arm, read there at theta1 and theta2.

    This is the intensity correlation |<0|a_theta1 a_theta2|arm>|^2 with the
    free photons counted at the D1'_perp and D2'_perp exits; at the
    unperped exits theta1 and theta2 shift by a right angle.
    """
    return (
        math.cos(theta1p - theta1) * math.cos(theta2p - theta2)
        + math.cos(theta1p - theta2) * math.cos(theta2p - theta1)
    ) ** 2 / 16


def prob4_one_arm_nopol(theta1p: float, theta2p: float) -> float:
    """D1' and D2' with both central photons leaving by the same arm (either)."""
    return (1 + math.cos(theta1p - theta2p) ** 2) / 8


def prob4_triplet(theta1p: float, theta2p: float) -> float:
    """D1' and D2'_perp with both central polarizers removed."""
    return math.cos(theta1p - theta2p) ** 2 / 8


def visibility_from_geometry(dz: float, L: float) -> Visibility:
    if not L > 0:
        raise ValueError(f"fringe spacing must be positive, got L={L}")
    if dz < 0:
        raise ValueError(f"detector width must be non-negative, got dz={dz}")
    u = math.pi * dz / L
    if u == 0:
        return Visibility(1.0)
    v = (math.sin(u) / u) ** 2
    # sin(pi) is not exactly zero in floating point
    return Visibility(0.0 if v < 1e-30 else min(v, 1.0))


def eberhard_prob(theta1p: float, theta2p: float, r: float, v: float = 1.0) -> float:
    """Conditional D1' and D2'_perp probability behind a polarizing splitter.

    The central splitter has r_x / t_x = r and 50:50 along y; D1 sits at a
    right angle and D2 at zero. Conditioning is on the D1-D2 coincidence
    with all four free-photon exit pairs (D1'_perp and D2' included) in
    the denominator.
    """
    if not r >= 0:
        raise ValueError(f"r must be non-negative, got {r}")
    v = _vis(v)
    c1, s1, c2, s2 = math.cos(theta1p), math.sin(theta1p), math.cos(theta2p), math.sin(theta2p)
    p = (c1 * c2) ** 2 + (r * s1 * s2) ** 2 + 2 * v * r * c1 * c2 * s1 * s2
    return p / (1 + r * r)


def eberhard_single(theta: float, r: float) -> float:
    """Marginal of :func:`eberhard_prob` over the partner's two exits."""
    return (math.cos(theta) ** 2 + (r * math.sin(theta)) ** 2) / (1 + r * r)


def transmittance_x(r: float) -> float:
    return 1.0 / (1.0 + r * r)


def width_for_visibility(v: float, L: float = 1.0, tol: float = 1e-13) -> float:
    """Detector width giving visibility v, by bisection on the main lobe dz in [0, L]."""
    v = _vis(v)
    if not L > 0:
        raise ValueError(f"fringe spacing must be positive, got L={L}")
    lo, hi = 0.0, L
    while hi - lo > tol * L:
        mid = 0.5 * (lo + hi)
        if float(visibility_from_geometry(mid, L)) > v:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
