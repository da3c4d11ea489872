"""Clauser-Horne statistic, angle search and detector-efficiency thresholds.

The CH combination for settings a, a' (left) and b, b' (right) is

    S = P(a,b) - P(a,b') + P(a',b') + P(a',b) - P(a',inf) - P(inf,b)

with S <= 0 for every local model. Joint terms use the Bell-scaled
probability (four times the four-fold rate, i.e. the preselected
frequency). Under detector efficiency eta, joint terms scale as eta**2
and single terms as eta.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Iterable, Mapping
from dataclasses import dataclass, field

import numpy as np

from .analytic import transmittance_x
from .optics import REMOVED, AnalyzerSetting, Angle, Removed, as_setting

DEFAULT_STEP = math.radians(0.5)
REFINE_TOL = 1e-6
ETA_TOL = 1e-6

FRINGE = "fringe"
COS_SQUARED = "cos_squared"
CONVENTIONS = (FRINGE, COS_SQUARED)

TERM_NAMES = ("P(a,b)", "P(a,b')", "P(a',b')", "P(a',b)", "P(a',inf)", "P(inf,b)")


@dataclass(frozen=True)
class AngleQuadruple:
    """Left settings a, a2 and right settings b, b2, in radians on [0, pi)."""

    a: float
    a2: float
    b: float
    b2: float

    def __post_init__(self):
        for name in ("a", "a2", "b", "b2"):
            object.__setattr__(self, name, Angle(getattr(self, name)).theta)

    @classmethod
    def degrees(cls, a, a2, b, b2) -> "AngleQuadruple":
        return cls(*(math.radians(t) for t in (a, a2, b, b2)))

    def as_degrees(self) -> tuple[float, float, float, float]:
        return tuple(math.degrees(t) for t in (self.a, self.a2, self.b, self.b2))


@dataclass(frozen=True)
class BellResult:
    S: float
    quadruple: AngleQuadruple
    terms: Mapping[str, float]
    inputs: Mapping[str, float] = field(default_factory=dict)

    def recombined(self) -> float:
        t = self.terms
        return t["P(a,b)"] - t["P(a,b')"] + t["P(a',b')"] + t["P(a',b)"] - t["P(a',inf)"] - t["P(inf,b)"]


class Predictor:
    """Probability model P(setting_left, setting_right) with explicit eta scaling.

    Subclasses supply :meth:`joint` and the two single rates; a removed
    setting on one side selects the single rate.
    """

    covariant = False

    def __init__(self, eta: float = 1.0):
        if not 0.0 <= eta <= 1.0:
            raise ValueError(f"efficiency must lie in [0, 1], got {eta}")
        self.eta = eta

    def joint(self, a: float, b: float) -> float:
        raise NotImplementedError

    def single_left(self, a: float) -> float:
        raise NotImplementedError

    def single_right(self, b: float) -> float:
        raise NotImplementedError

    def with_eta(self, eta: float) -> "Predictor":
        clone = object.__new__(type(self))
        clone.__dict__.update(self.__dict__)
        clone.eta = eta
        return clone

    @property
    def inputs(self) -> dict[str, float]:
        return {"eta": self.eta}

    def __call__(self, left: AnalyzerSetting, right: AnalyzerSetting) -> float:
        left, right = as_setting(left), as_setting(right)
        if isinstance(left, Removed) and isinstance(right, Removed):
            raise ValueError("at least one analyzer must be set")
        if isinstance(right, Removed):
            return self.eta * self.single_left(left.theta)
        if isinstance(left, Removed):
            return self.eta * self.single_right(right.theta)
        return self.eta ** 2 * self.joint(left.theta, right.theta)


class SingletPredictor(Predictor):
    """Preselected singlet correlations at visibility v.

    ``fringe``: (1 - v cos 2d) / 4, the form behind the quoted efficiency
    bound. ``cos_squared``: (1 - v cos^2 d) / 2, four times the
    visibility-corrected four-fold rate. Singles are 1/2 in both.
    """

    covariant = True

    def __init__(self, v: float = 1.0, convention: str = FRINGE, eta: float = 1.0):
        super().__init__(eta)
        if convention not in CONVENTIONS:
            raise ValueError(f"convention must be one of {CONVENTIONS}")
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"visibility must lie in [0, 1], got {v}")
        self.v = v
        self.convention = convention

    def joint(self, a, b):
        d = np.subtract(a, b)
        if self.convention == FRINGE:
            return 0.25 * (1 - self.v * np.cos(2 * d))
        return 0.5 * (1 - self.v * np.cos(d) ** 2)

    def single_left(self, a):
        return 0.5 + 0 * np.asarray(a, dtype=float)

    single_right = single_left

    @property
    def inputs(self):
        return {"v": self.v, "eta": self.eta}


class EberhardPredictor(Predictor):
    """Unequal-superposition correlations read at D1' and D2'_perp."""

    def __init__(self, r: float, v: float = 1.0, eta: float = 1.0):
        super().__init__(eta)
        self.r = r
        self.v = v
        self.covariant = r == 1.0 and v == 1.0

    def joint(self, a, b):
        c1, s1, c2, s2 = np.cos(a), np.sin(a), np.cos(b), np.sin(b)
        r, v = self.r, self.v
        return ((c1 * c2) ** 2 + (r * s1 * s2) ** 2 + 2 * v * r * c1 * c2 * s1 * s2) / (1 + r * r)

    def single_left(self, a):
        return (np.cos(a) ** 2 + (self.r * np.sin(a)) ** 2) / (1 + self.r ** 2)

    single_right = single_left

    @property
    def inputs(self):
        return {"r": self.r, "v": self.v, "eta": self.eta}


class ProductPredictor(Predictor):
    """Local model P(a,b) = p(a) q(b) with matching singles."""

    def __init__(self, left: Callable, right: Callable, eta: float = 1.0):
        super().__init__(eta)
        self.left = left
        self.right = right

    def joint(self, a, b):
        return self.left(a) * self.right(b)

    def single_left(self, a):
        return self.left(a)

    def single_right(self, b):
        return self.right(b)


def ch_statistic(P: Callable, q: AngleQuadruple, inputs: Mapping[str, float] | None = None) -> BellResult:
    a, a2, b, b2 = (Angle(t) for t in (q.a, q.a2, q.b, q.b2))
    terms = dict(
        zip(
            TERM_NAMES,
            (float(P(a, b)), float(P(a, b2)), float(P(a2, b2)), float(P(a2, b)), float(P(a2, REMOVED)), float(P(REMOVED, b))),
        )
    )
    S = terms["P(a,b)"] - terms["P(a,b')"] + terms["P(a',b')"] + terms["P(a',b)"] - terms["P(a',inf)"] - terms["P(inf,b)"]
    if inputs is None:
        inputs = getattr(P, "inputs", {})
    return BellResult(S, q, terms, dict(inputs))


def _tables(P: Callable, grid: np.ndarray, covariant: bool):
    """Joint table J[i, j] = P(grid_i, grid_j) and the single rates on the grid."""
    if isinstance(P, Predictor):
        eta = P.eta
        if covariant:
            J = eta ** 2 * P.joint(0.0, -grid)
            J = np.broadcast_to(J, (1, len(grid)))
        else:
            J = eta ** 2 * P.joint(grid[:, None], grid[None, :])
        SA = eta * np.broadcast_to(P.single_left(grid), grid.shape)
        SB = eta * np.broadcast_to(P.single_right(grid), grid.shape)
        return np.asarray(J, float), np.asarray(SA, float), np.asarray(SB, float)
    if covariant:
        J = np.array([[P(Angle(0.0), Angle(-t)) for t in grid]])
        SA = np.full(len(grid), P(Angle(0.0), REMOVED))
        SB = np.full(len(grid), P(REMOVED, Angle(0.0)))
    else:
        J = np.array([[P(Angle(s), Angle(t)) for t in grid] for s in grid])
        SA = np.array([P(Angle(s), REMOVED) for s in grid])
        SB = np.array([P(REMOVED, Angle(t)) for t in grid])
    return J, SA, SB


def _grid_search(J, SA, SB, n: int, covariant: bool) -> tuple[float, tuple[int, int, int, int]]:
    """Exhaustive max over index quadruples; first maximum in lexicographic order wins."""
    best, arg = -math.inf, (0, 0, 0, 0)
    idx = np.arange(n)
    if covariant:
        g = J[0]
        gb = g[(-idx) % n]  # joint(0, b) as a function of b
        for i in range(n):  # a'
            gab = g[(i - idx) % n]  # joint(a', b)
            S = gb[:, None] - gb[None, :] + gab[None, :] + gab[:, None] - SA[i] - SB[:, None]
            k = int(np.argmax(S))
            if S.flat[k] > best:
                best, arg = float(S.flat[k]), (0, i, k // n, k % n)
        return best, arg
    for ia in range(n):
        # axes: a' (i), b (j), b' (l)
        S = (
            J[ia][None, :, None]
            - J[ia][None, None, :]
            + J[:, None, :]
            + J[:, :, None]
            - SA[:, None, None]
            - SB[None, :, None]
        )
        k = int(np.argmax(S))
        if S.flat[k] > best:
            i, rem = divmod(k, n * n)
            best, arg = float(S.flat[k]), (ia, i, rem // n, rem % n)
    return best, arg


def _refine(P: Callable, q: list[float], covariant: bool, h: float) -> list[float]:
    free = [1, 2, 3] if covariant else [0, 1, 2, 3]

    def score(v):
        return ch_statistic(P, AngleQuadruple(*v)).S

    best = score(q)
    while h >= REFINE_TOL:
        improved = False
        for i in free:
            for sgn in (1.0, -1.0):
                trial = list(q)
                trial[i] += sgn * h
                s = score(trial)
                if s > best + 1e-15:
                    best, q, improved = s, trial, True
                    break
        if not improved:
            h /= 2
    return q


def optimize_angles(
    P: Callable, grid_step: float = DEFAULT_STEP, refine: bool = True, covariant: bool | None = None
) -> BellResult:
    """Maximize S over angle quadruples.

    Rotationally covariant predictors (depending on angle differences
    only) fix a = 0 and search the three remaining angles; otherwise the
    full four-angle grid is searched, whose cost grows as (pi/step)**4.
    """
    if not grid_step > 0:
        raise ValueError("grid_step must be positive")
    if covariant is None:
        covariant = bool(getattr(P, "covariant", False))
    n = max(1, int(round(math.pi / grid_step)))
    grid = np.arange(n) * (math.pi / n)
    J, SA, SB = _tables(P, grid, covariant)
    _, (ia, i, j, l) = _grid_search(J, SA, SB, n, covariant)
    q = [grid[ia], grid[i], grid[j], grid[l]]
    if refine:
        q = _refine(P, q, covariant, (math.pi / n) / 2)
    return ch_statistic(P, AngleQuadruple(*q))


def efficiency_threshold_paper(v: float) -> float:
    """Smallest efficiency allowing a violation for equal superpositions: 2 / (1 + v sqrt 2)."""
    if not 0.0 < v <= 1.0:
        raise ValueError(f"visibility must lie in (0, 1], got {v}")
    return 2.0 / (1.0 + v * math.sqrt(2.0))


def efficiency_threshold_model(
    predictor: Predictor, grid_step: float | None = None, tol: float = ETA_TOL
) -> float | None:
    """Bisect on eta for the onset of S_max(eta) > 0; ``None`` if no eta in [0, 1] violates."""
    if grid_step is None:
        grid_step = math.radians(1.0) if predictor.covariant else math.radians(5.0)

    def s_max(eta):
        return optimize_angles(predictor.with_eta(eta), grid_step).S

    if s_max(1.0) <= 0:
        return None
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if s_max(mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class EberhardRow:
    r: float
    T_x: float
    S_max: float
    eta_min: float | None


def eberhard_scan(r_values: Iterable[float], v: float = 1.0, grid_step: float = math.radians(5.0)) -> list[EberhardRow]:
    rows = []
    for r in r_values:
        if not r >= 0:
            raise ValueError(f"r must be non-negative, got {r}")
        pred = EberhardPredictor(r, v)
        best = optimize_angles(pred, grid_step)
        rows.append(EberhardRow(r, transmittance_x(r), best.S, efficiency_threshold_model(pred, grid_step)))
    return rows


def ch_from_tallies(tallies: Mapping[tuple[float, float], object], q: AngleQuadruple) -> tuple[BellResult, float]:
    """CH statistic and its standard error from four simulated runs.

    ``tallies`` maps (left angle, right angle) to a montecarlo Tally for the
    four settings of ``q``. Each single rate is read from a run sharing its
    angle, so every run contributes a linear combination of its pattern
    frequencies; the error follows from the multinomial covariance.
    """
    from .montecarlo import PATTERNS, InsufficientStatistics

    a, a2, b, b2 = q.a, q.a2, q.b, q.b2
    # P(a,b) cancels against its share of P(inf,b); likewise P(a',b) and P(a',inf)
    runs = {
        "ab": ((a, b), {"D1'_perp&D2'": -1.0}),
        "ab2": ((a, b2), {"D1'&D2'": -1.0}),
        "a2b2": ((a2, b2), {"D1'&D2'": 1.0}),
        "a2b": ((a2, b), {"D1'&D2'_perp": -1.0}),
    }
    S, var = 0.0, 0.0
    freq = {}
    for name, (key, weights) in runs.items():
        t = tallies[key]
        n = t.n_accepted
        if n == 0:
            raise InsufficientStatistics(f"no accepted events for settings {key}")
        p = np.array([t.counts[pat] / n for pat in PATTERNS])
        w = np.array([weights.get(pat, 0.0) for pat in PATTERNS])
        mean = float(w @ p)
        S += mean
        var += (float((w ** 2) @ p) - mean ** 2) / n
        freq[name] = dict(zip(PATTERNS, map(float, p)))
    terms = {
        "P(a,b)": freq["ab"]["D1'&D2'"],
        "P(a,b')": freq["ab2"]["D1'&D2'"],
        "P(a',b')": freq["a2b2"]["D1'&D2'"],
        "P(a',b)": freq["a2b"]["D1'&D2'"],
        "P(a',inf)": freq["a2b"]["D1'&D2'"] + freq["a2b"]["D1'&D2'_perp"],
        "P(inf,b)": freq["ab"]["D1'&D2'"] + freq["ab"]["D1'_perp&D2'"],
    }
    return BellResult(S, q, terms, {}), math.sqrt(var)


def simulate_ch(base_config, q: AngleQuadruple, trials_per_setting: int, threads: int = 1):
    """Run the four settings of ``q`` and return (BellResult, standard error)."""
    from dataclasses import replace

    from .montecarlo import run_trials

    tallies = {}
    for i, key in enumerate(((q.a, q.b), (q.a, q.b2), (q.a2, q.b2), (q.a2, q.b))):
        cfg = replace(
            base_config,
            prime_analyzers=(Angle(key[0]), Angle(key[1])),
            trials=trials_per_setting,
            seed=(base_config.seed + i) % 2 ** 64,
        )
        tallies[key] = run_trials(cfg, threads=threads)
    return ch_from_tallies(tallies, q)
