"""Closed forms checked against the exact Fock pipeline on random parameters.

Each family draws random angles (and splitter, phase, visibility where
the formula allows them), evaluates the closed form and the engine, and
records the largest absolute difference. Finite visibility is realized
on the engine side as the mixture (1+v)/2 at phi and (1-v)/2 at phi+pi,
which reproduces the -2vAB cos(phi) cross term exactly.
"""

from __future__ import annotations

import math
import time
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from . import analytic as an
from .fock import pattern_probability
from .optics import REMOVED, Angle, BeamSplitterSpec, as_setting, make_polarized_pair
from .setups import (
    FIFTY,
    central_splitter,
    four_photon_distribution,
    one_arm_correlation,
    singlet_sources,
    two_photon_distribution,
)

TOL = 1e-10
HALF_PI = math.pi / 2
ORTHO = (0.0, HALF_PI)


@dataclass(frozen=True)
class OracleResult:
    family: str
    n: int
    max_error: float
    seconds: float

    @property
    def passed(self) -> bool:
        return self.max_error <= TOL


def _mix(f: Callable[[float], float], phi: float, v: float) -> float:
    return 0.5 * (1 + v) * f(phi) + 0.5 * (1 - v) * f(phi + math.pi)


def _random_spec(rng) -> BeamSplitterSpec:
    tx, ty = rng.uniform(0.05, 1.0, 2)
    return BeamSplitterSpec(tx, ty, math.sqrt(1 - tx * tx), math.sqrt(1 - ty * ty))


def _maybe_removed(rng, theta):
    return REMOVED if rng.random() < 0.2 else theta


def _engine2(a, b, c, d, spec=FIFTY, phi=0.0):
    """D1-D2 coincidence; removed inputs sum over orthogonal preparations."""
    total = 0.0
    for pa in ORTHO if as_setting(a) == REMOVED else (a,):
        for pb in ORTHO if as_setting(b) == REMOVED else (b,):
            dist = two_photon_distribution(pa, pb, c, d, spec, phi)
            total += pattern_probability(dist, {"D1": 1, "D2": 1})
    return total


def _engine4(p1, p2, c1, c2, spec=FIFTY, phi=0.0, required=None):
    dist = four_photon_distribution(p1, p2, c1, c2, spec, phi)
    req = {"D1'": 1, "D2'": 1, "D1": 1, "D2": 1} if required is None else required
    return pattern_probability(dist, req)


def _fam_prob2(rng):
    spec = _random_spec(rng)
    phi, v = rng.uniform(0, 2 * math.pi), rng.uniform(0, 1)
    a, b = (_maybe_removed(rng, t) for t in rng.uniform(0, math.pi, 2))
    c, d = (_maybe_removed(rng, t) for t in rng.uniform(0, math.pi, 2))
    got = an.prob2(a, b, c, d, spec, phi, v)
    want = _mix(lambda p: _engine2(a, b, c, d, spec, p), phi, v)
    return got, want


def _fam_coinc(rng):
    a, b, c, d = rng.uniform(0, math.pi, 4)
    return an.prob2_coinc(a, b, c, d), _engine2(a, b, c, d)


def _fam_opposite(rng):
    a, b = rng.uniform(0, math.pi, 2)
    return an.prob2_opposite(a, b), _engine2(a, b, REMOVED, REMOVED)


def _fam_same_side(rng):
    a, b = rng.uniform(0, math.pi, 2)
    dist = two_photon_distribution(a, b, REMOVED, REMOVED)
    want = pattern_probability(dist, {"D1": 2}) + pattern_probability(dist, {"D2": 2})
    return an.prob2_same_side(a, b), want


def _fam_unpol_out(rng):
    a, b, c = rng.uniform(0, math.pi, 3)
    return an.prob2_unpolarized_out(a, b, c), _engine2(a, b, c, REMOVED)


def _fam_unpol_in(rng):
    c, d = rng.uniform(0, math.pi, 2)
    return an.prob2_unpolarized_in(c, d), _engine2(REMOVED, REMOVED, c, d)


def _fam_same_side_unpol(rng):
    c, d = rng.uniform(0, math.pi, 2)
    arm, other = ("o1", "o2") if rng.random() < 0.5 else ("o2", "o1")
    total = 0.0
    for pa in ORTHO:
        for pb in ORTHO:
            psi = central_splitter(make_polarized_pair(pa, pb), FIFTY, 0.0, "1_0", "2_0")
            dist = one_arm_correlation(psi, arm, c, d, {other: (REMOVED, "X")})
            total += 4 * pattern_probability(dist, {"L": 1, "R": 1})
    return an.prob2_same_side_unpolarized(c, d), total


def _fam_prob4(rng):
    spec = _random_spec(rng)
    phi, v = rng.uniform(0, 2 * math.pi), rng.uniform(0, 1)
    p1, p2, c1, c2 = (_maybe_removed(rng, t) for t in rng.uniform(0, math.pi, 4))
    got = an.prob4(p1, p2, c1, c2, spec, phi, v)
    want = _mix(lambda p: _engine4(p1, p2, c1, c2, spec, p), phi, v)
    return got, want


def _fam_lr(rng):
    p1, p2, c1, c2 = rng.uniform(0, math.pi, 4)
    return an.prob4_lr(p1, p2, c1, c2), _engine4(p1, p2, c1, c2)


def _fam_bell(rng):
    p1, p2 = rng.uniform(0, math.pi, 2)
    v = rng.uniform(0, 1)
    want = _mix(lambda p: _engine4(p1, p2, REMOVED, REMOVED, FIFTY, p), 0.0, v)
    return an.prob4_bell(p1, p2, v), want


def _fam_one_arm(rng):
    p1, p2, c1, c2 = rng.uniform(0, math.pi, 4)
    arm, other = ("o1", "o2") if rng.random() < 0.5 else ("o2", "o1")
    psi = central_splitter(singlet_sources(), FIFTY, 0.0, "1", "2")
    settings = {other: (REMOVED, "X"), "1'": (Angle(p1), "D1'"), "2'": (Angle(p2), "D2'")}
    dist = one_arm_correlation(psi, arm, c1, c2, settings)
    want = 4 * pattern_probability(dist, {"L": 1, "R": 1, "D1'_perp": 1, "D2'_perp": 1})
    return an.prob4_one_arm(p1, p2, c1, c2), want


def _fam_one_arm_nopol(rng):
    p1, p2 = rng.uniform(0, math.pi, 2)
    dist = four_photon_distribution(p1, p2, REMOVED, REMOVED)
    want = sum(pattern_probability(dist, {"D1'": 1, "D2'": 1, side: 2}) for side in ("D1", "D2"))
    return an.prob4_one_arm_nopol(p1, p2), want


def _fam_triplet(rng):
    p1, p2 = rng.uniform(0, math.pi, 2)
    want = _engine4(p1, p2, REMOVED, REMOVED, required={"D1'": 1, "D2'_perp": 1, "D1": 1, "D2": 1})
    return an.prob4_triplet(p1, p2), want


def _fam_eberhard(rng):
    r = rng.uniform(0.0, 1.5)
    v = rng.uniform(0, 1)
    p1, p2 = rng.uniform(0, math.pi, 2)
    spec = BeamSplitterSpec.from_ratio(r)

    def joint(pattern, phi):
        req = {"D1": 1, "D2": 1, "D1_perp": 0, "D2_perp": 0}
        req.update(pattern)
        dist = four_photon_distribution(p1, p2, HALF_PI, 0.0, spec, phi)
        return pattern_probability(dist, req)

    pats = [{a: 1, b: 1} for a in ("D1'", "D1'_perp") for b in ("D2'", "D2'_perp")]
    num = _mix(lambda p: joint({"D1'": 1, "D2'_perp": 1}, p), 0.0, v)
    den = sum(_mix(lambda p, pat=pat: joint(pat, p), 0.0, v) for pat in pats)
    return an.eberhard_prob(p1, p2, r, v), num / den


FAMILIES: dict[str, Callable] = {
    "prob2": _fam_prob2,
    "prob2_coinc": _fam_coinc,
    "prob2_opposite": _fam_opposite,
    "prob2_same_side": _fam_same_side,
    "prob2_unpolarized_out": _fam_unpol_out,
    "prob2_unpolarized_in": _fam_unpol_in,
    "prob2_same_side_unpolarized": _fam_same_side_unpol,
    "prob4": _fam_prob4,
    "prob4_lr": _fam_lr,
    "prob4_bell": _fam_bell,
    "prob4_one_arm": _fam_one_arm,
    "prob4_one_arm_nopol": _fam_one_arm_nopol,
    "prob4_triplet": _fam_triplet,
    "eberhard_prob": _fam_eberhard,
}


def run_oracles(per_family: int = 40, seed: int = 2024) -> list[OracleResult]:
    rng = np.random.default_rng(seed)
    out = []
    for name, fam in FAMILIES.items():
        t0 = time.perf_counter()
        worst = 0.0
        for _ in range(per_family):
            got, want = fam(rng)
            worst = max(worst, abs(got - want))
        out.append(OracleResult(name, per_family, worst, time.perf_counter() - t0))
    return out
