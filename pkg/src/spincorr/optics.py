"""Optical elements, source states and the fourth-order phase model."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

from .fock import PRUNE, FockError, FockState, ModeId, ModeMap, x, y

SQRT_HALF = 2 ** -0.5
LOSSLESS_TOL = 1e-9
SPEED_OF_LIGHT = 299_792_458.0


class OpticsError(ValueError):
    pass


@dataclass(frozen=True)
class BeamSplitterSpec:
    """Real amplitude coefficients per polarization axis.

    Reflection carries an extra factor ``i`` applied by
    :func:`beam_splitter_map`, not stored here.
    """

    t_x: float = SQRT_HALF
    t_y: float = SQRT_HALF
    r_x: float = SQRT_HALF
    r_y: float = SQRT_HALF

    def __post_init__(self):
        for name in ("t_x", "t_y", "r_x", "r_y"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise OpticsError(f"{name}={v} outside [0, 1]")
        for axis, t, r in (("x", self.t_x, self.r_x), ("y", self.t_y, self.r_y)):
            if abs(t * t + r * r - 1.0) > LOSSLESS_TOL:
                raise OpticsError(f"lossy along {axis}: t^2 + r^2 = {t * t + r * r:.12g}")

    @classmethod
    def fifty_fifty(cls) -> "BeamSplitterSpec":
        return cls()

    @classmethod
    def from_ratio(cls, r: float) -> "BeamSplitterSpec":
        """Polarizing splitter with r_x / t_x = r and a 50:50 y axis."""
        if not r >= 0 or math.isinf(r):
            raise OpticsError(f"ratio must be finite and non-negative, got {r}")
        t_x = 1.0 / math.sqrt(1.0 + r * r)
        return cls(t_x=t_x, t_y=SQRT_HALF, r_x=r * t_x, r_y=SQRT_HALF)

    @property
    def ratio(self) -> float:
        return self.r_x / self.t_x

    @property
    def is_fifty_fifty(self) -> bool:
        return all(abs(v - SQRT_HALF) < 1e-12 for v in (self.t_x, self.t_y, self.r_x, self.r_y))


@dataclass(frozen=True)
class Angle:
    """Polarizer orientation in radians, reduced to [0, pi)."""

    theta: float

    def __post_init__(self):
        if not math.isfinite(self.theta):
            raise OpticsError(f"angle must be finite, got {self.theta}")
        t = math.fmod(self.theta, math.pi)
        if t < 0:
            t += math.pi
        if t >= math.pi:
            t = 0.0
        object.__setattr__(self, "theta", t)

    @classmethod
    def degrees(cls, deg: float) -> "Angle":
        return cls(math.radians(deg))

    def perp(self) -> "Angle":
        return Angle(self.theta + math.pi / 2)


@dataclass(frozen=True)
class Removed:
    """Polarizer taken out: both polarizations reach one detector."""

    def __repr__(self):
        return "Removed()"


REMOVED = Removed()
AnalyzerSetting = Union[Angle, Removed]


def as_setting(value) -> AnalyzerSetting:
    """Coerce radians, ``None`` or ``"removed"`` into an analyzer setting."""
    if isinstance(value, (Angle, Removed)):
        return value
    if value is None or (isinstance(value, str) and value.lower() in {"removed", "inf", "none"}):
        return REMOVED
    if isinstance(value, float) and math.isinf(value):
        return REMOVED
    return Angle(float(value))


@dataclass(frozen=True)
class Fixed:
    phi: float = 0.0


@dataclass(frozen=True)
class TransverseFringe:
    """Detector centres z1, z2, fringe spacing L and detector width dz."""

    z1: float
    z2: float
    L: float
    dz: float = 0.0

    def __post_init__(self):
        if not self.L > 0:
            raise OpticsError(f"fringe spacing must be positive, got L={self.L}")
        if self.dz < 0:
            raise OpticsError(f"detector width must be non-negative, got dz={self.dz}")


@dataclass(frozen=True)
class Beat:
    """Frequency-difference beating over an optical path difference."""

    d_omega: float
    delta: float
    c: float = SPEED_OF_LIGHT

    def __post_init__(self):
        if not self.c > 0:
            raise OpticsError("speed of light must be positive")


PhaseModel = Union[Fixed, TransverseFringe, Beat]


def phase_of(model: PhaseModel | float) -> float:
    if isinstance(model, (int, float)):
        return float(model)
    if isinstance(model, Fixed):
        return model.phi
    if isinstance(model, TransverseFringe):
        if model.L == 0:
            raise OpticsError("L = 0")
        return 2 * math.pi * (model.z2 - model.z1) / model.L
    if isinstance(model, Beat):
        return model.d_omega * model.delta / model.c
    raise TypeError(f"not a phase model: {model!r}")


@dataclass(frozen=True)
class InterferenceTerms:
    """Transmitted (A) and reflected (B) amplitude products and the phase."""

    A: float
    B: float
    phi: float = 0.0

    def probability(self, visibility: float = 1.0) -> float:
        return self.A ** 2 + self.B ** 2 - 2 * visibility * self.A * self.B * math.cos(self.phi)


def _angle(value) -> float:
    s = as_setting(value)
    if isinstance(s, Removed):
        raise OpticsError("a prepared polarization needs an angle, not Removed")
    return s.theta


def make_polarized_pair(theta1_0, theta2_0, ports=("1_0", "2_0")) -> FockState:
    a, b = _angle(theta1_0), _angle(theta2_0)
    pa, pb = ports
    ca, sa, cb, sb = math.cos(a), math.sin(a), math.cos(b), math.sin(b)
    return FockState.create(
        {
            (x(pa), x(pb)): ca * cb,
            (x(pa), y(pb)): ca * sb,
            (y(pa), x(pb)): sa * cb,
            (y(pa), y(pb)): sa * sb,
        },
        modes=(x(pa), y(pa), x(pb), y(pb)),
    )


def _distinct(port_a, port_b) -> tuple[str, str]:
    port_a, port_b = str(port_a), str(port_b)
    if port_a == port_b:
        raise OpticsError(f"pair source needs two distinct ports, got {port_a!r} twice")
    return port_a, port_b


def make_singlet(port_a, port_b) -> FockState:
    """(|x>_A|y>_B - |y>_A|x>_B) / sqrt 2."""
    a, b = _distinct(port_a, port_b)
    return FockState.create({(x(a), y(b)): SQRT_HALF, (y(a), x(b)): -SQRT_HALF})


def make_r_state(port_a, port_b, r: float) -> FockState:
    """Unequal superposition (|x>_A|y>_B + r|y>_A|x>_B) / sqrt(1 + r^2)."""
    if not (r >= 0 and math.isfinite(r)):
        raise OpticsError(f"r must be finite and non-negative, got {r}")
    a, b = _distinct(port_a, port_b)
    n = math.sqrt(1 + r * r)
    return FockState.create(
        {(x(a), y(b)): 1 / n, (y(a), x(b)): r / n}, modes=(x(a), y(a), x(b), y(b))
    )


def make_triplet_like(port_a, port_b) -> FockState:
    return make_r_state(port_a, port_b, 1.0)


def beam_splitter_map(
    spec: BeamSplitterSpec, in_a, in_b, out_a, out_b, phase: PhaseModel | float = 0.0
) -> dict[ModeId, dict[ModeId, complex]]:
    """Creation-operator substitution for a polarization-dependent splitter.

    ``in_a`` transmits to ``out_a`` and reflects (factor ``i``) to
    ``out_b``; ``in_b`` the other way round. The fourth-order phase enters
    as ``exp(i phi)`` on the in_a -> out_b reflection, so the
    coincidence cross term is ``-2 A B cos(phi)``.

    Only at phi = 0 (mod 2 pi) is this a unitary two-port: a relative
    phase between the transmitted-transmitted and reflected-reflected
    paths exists only for detection at fixed transverse positions. For
    phi != 0 the map gives the detection-conditioned field amplitudes
    and must be applied with ``check_unitary=False``.
    """
    phi = phase_of(phase)
    e = complex(math.cos(phi), math.sin(phi))
    out: dict[ModeId, dict[ModeId, complex]] = {}
    for axis, t, r in (("x", spec.t_x, spec.r_x), ("y", spec.t_y, spec.r_y)):
        out[ModeId(str(in_a), axis)] = {
            ModeId(str(out_a), axis): t,
            ModeId(str(out_b), axis): 1j * r * e,
        }
        out[ModeId(str(in_b), axis)] = {
            ModeId(str(out_b), axis): t,
            ModeId(str(out_a), axis): 1j * r,
        }
    for row in out.values():
        for k in [k for k, v in row.items() if abs(v) < PRUNE]:
            del row[k]
    return out


def rotation(theta: float) -> tuple[tuple[float, float], tuple[float, float]]:
    """Rows x, y; columns D, D_perp."""
    c, s = math.cos(theta), math.sin(theta)
    return ((c, -s), (s, c))


def perp_label(label: str) -> str:
    return f"{label}_perp"


def analyzer_map(
    setting: AnalyzerSetting, port, label: str
) -> tuple[dict[ModeId, dict[ModeId, complex]], dict[ModeId, str]]:
    """Birefringent analyzer on ``port`` feeding detectors ``label`` and ``label_perp``.

    Returns the mode map and the detector layout of its output modes. A
    removed analyzer leaves the polarization modes alone and sends both to
    ``label``.
    """
    port = str(port)
    setting = as_setting(setting)
    if isinstance(setting, Removed):
        return {}, {x(port): label, y(port): label}
    d, dp = ModeId(label), ModeId(perp_label(label))
    (xd, xdp), (yd, ydp) = rotation(setting.theta)
    mode_map = {x(port): {d: xd, dp: xdp}, y(port): {d: yd, dp: ydp}}
    for row in mode_map.values():
        for k in [k for k, v in row.items() if abs(v) < PRUNE]:
            del row[k]
    return mode_map, {d: label, dp: perp_label(label)}


def merge_maps(*maps: ModeMap) -> dict[ModeId, dict[ModeId, complex]]:
    out: dict[ModeId, dict[ModeId, complex]] = {}
    for m in maps:
        for k, row in m.items():
            if k in out:
                raise FockError(f"mode {k} mapped twice")
            out[k] = dict(row)
    return out
