"""Event-level simulation of the preselection experiment.

Each trial is one pump pulse. The four-photon state is propagated exactly
with the Fock engine, one detection outcome is drawn, photons become
threshold-detector clicks, and the gate logic decides whether the trial
enters the statistics.

Random numbers come from a counter-based Philox stream keyed by the
seed. Trial ``t`` always consumes the same fixed-size slice of that
stream, so a tally depends only on (config, seed), never on how trials
are split across workers.
"""

from __future__ import annotations

import math
from collections.abc import Mapping
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .analytic import prob4
from .optics import (
    REMOVED,
    AnalyzerSetting,
    Angle,
    BeamSplitterSpec,
    Fixed,
    PhaseModel,
    Removed,
    TransverseFringe,
    as_setting,
    phase_of,
)
from .setups import four_photon_output, singlet_sources, splitter_sources

IDEAL_SINGLETS = "ideal_singlets"
SPLITTER_SOURCES = "beam_splitter_sources"
SOURCE_MODELS = (IDEAL_SINGLETS, SPLITTER_SOURCES)

PATTERNS = ("D1'&D2'", "D1'&D2'_perp", "D1'_perp&D2'", "D1'_perp&D2'_perp")
BLOCK = 1 << 15
MAX_TRIALS = 1 << 62


class ConfigError(ValueError):
    pass


class InsufficientStatistics(RuntimeError):
    pass


@dataclass(frozen=True)
class DetectorSpec:
    efficiency: float = 1.0
    dark_count_prob: float = 0.0

    def __post_init__(self):
        for name in ("efficiency", "dark_count_prob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"detector {name}={v} outside [0, 1]")


@dataclass(frozen=True)
class ExperimentConfig:
    """One simulated run.

    ``preselection_analyzers=None`` is the reduced scheme with bare D1, D2
    detectors; a pair of settings puts birefringent analyzers there.
    ``detectors`` is either one spec for every detector or a per-label map
    (missing labels get the ideal detector).
    """

    source_model: str = IDEAL_SINGLETS
    central_bs: BeamSplitterSpec = field(default_factory=BeamSplitterSpec)
    phase: PhaseModel = field(default_factory=Fixed)
    preselection_analyzers: tuple[AnalyzerSetting, AnalyzerSetting] | None = None
    prime_analyzers: tuple[AnalyzerSetting, AnalyzerSetting] = (Angle(0.0), Angle(math.pi / 2))
    detectors: DetectorSpec | Mapping[str, DetectorSpec] = field(default_factory=DetectorSpec)
    trials: int = 100_000
    seed: int = 0
    pulse_period: float = 50e-9
    window: float = 10e-9

    def __post_init__(self):
        if self.source_model not in SOURCE_MODELS:
            raise ConfigError(f"source_model must be one of {SOURCE_MODELS}, got {self.source_model!r}")
        if not isinstance(self.trials, (int, np.integer)) or self.trials < 1:
            raise ConfigError(f"trials must be a positive integer, got {self.trials!r}")
        if self.trials > MAX_TRIALS:
            raise ConfigError(f"trials={self.trials} would overflow the 64-bit counters")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if not 0 < self.window < self.pulse_period:
            raise ConfigError("coincidence window must be positive and shorter than the pulse period")
        object.__setattr__(self, "prime_analyzers", tuple(as_setting(s) for s in self.prime_analyzers))
        if self.preselection_analyzers is not None:
            pre = tuple(as_setting(s) for s in self.preselection_analyzers)
            if any(isinstance(s, Removed) for s in pre):
                raise ConfigError("use preselection_analyzers=None for removed preselection polarizers")
            object.__setattr__(self, "preselection_analyzers", pre)

    @property
    def central_labels(self) -> tuple[str, ...]:
        if self.preselection_analyzers is None:
            return ("D1", "D2")
        return ("D1", "D1_perp", "D2", "D2_perp")

    @property
    def labels(self) -> tuple[str, ...]:
        return self.central_labels + ("D1'", "D1'_perp", "D2'", "D2'_perp")

    def detector(self, label: str) -> DetectorSpec:
        if isinstance(self.detectors, DetectorSpec):
            return self.detectors
        return self.detectors.get(label, DetectorSpec())


# --- gate logic -------------------------------------------------------------

GATE_CLOSED = "gate_closed"
DISCARDED = "discarded_no_prime_pair"
ACCEPTED = "accepted"


@dataclass(frozen=True)
class GateDecision:
    kind: str
    preselection: str | None = None
    pattern: str | None = None


@dataclass(frozen=True)
class EventRecord:
    trial: int
    clicks: Mapping[str, bool]
    decision: GateDecision


def _one_of(clicks: Mapping[str, bool], a: str, b: str) -> str | None:
    ca, cb = clicks.get(a, False), clicks.get(b, False)
    if ca != cb:
        return a if ca else b
    return None


def gate_event(clicks: Mapping[str, bool], config: ExperimentConfig) -> GateDecision:
    if config.preselection_analyzers is None:
        if not (clicks.get("D1", False) and clicks.get("D2", False)):
            return GateDecision(GATE_CLOSED)
        pre = "D1&D2"
    else:
        s1 = _one_of(clicks, "D1", "D1_perp")
        s2 = _one_of(clicks, "D2", "D2_perp")
        if s1 is None or s2 is None:
            return GateDecision(GATE_CLOSED)
        pre = f"{s1}&{s2}"
    p1 = _one_of(clicks, "D1'", "D1'_perp")
    p2 = _one_of(clicks, "D2'", "D2'_perp")
    if p1 is None or p2 is None:
        return GateDecision(DISCARDED, pre)
    return GateDecision(ACCEPTED, pre, f"{p1}&{p2}")


def preselection_patterns(config: ExperimentConfig) -> tuple[str, ...]:
    if config.preselection_analyzers is None:
        return ("D1&D2",)
    return ("D1&D2", "D1&D2_perp", "D1_perp&D2", "D1_perp&D2_perp")


# --- tallies ----------------------------------------------------------------


@dataclass
class Tally:
    """Accepted counts keyed by (preselection pattern, free-photon pattern)."""

    by_preselection: dict[tuple[str, str], int] = field(default_factory=dict)
    n_gate_opened: int = 0
    n_discarded: int = 0
    n_trials: int = 0

    @property
    def counts(self) -> dict[str, int]:
        out = {p: 0 for p in PATTERNS}
        for (_, pat), n in self.by_preselection.items():
            out[pat] += n
        return out

    @property
    def n_accepted(self) -> int:
        return sum(self.by_preselection.values())

    def count(self, pattern: str, preselection: str | None = None) -> int:
        return sum(
            n
            for (pre, pat), n in self.by_preselection.items()
            if pat == pattern and (preselection is None or pre == preselection)
        )

    def accepted(self, preselection: str | None = None) -> int:
        return sum(n for (pre, _), n in self.by_preselection.items() if preselection is None or pre == preselection)

    def __add__(self, other: "Tally") -> "Tally":
        merged = dict(self.by_preselection)
        for k, n in other.by_preselection.items():
            merged[k] = merged.get(k, 0) + n
        return Tally(
            dict(sorted(merged.items())),
            self.n_gate_opened + other.n_gate_opened,
            self.n_discarded + other.n_discarded,
            self.n_trials + other.n_trials,
        )


def frequency(tally: Tally, pattern: str, preselection: str | None = None) -> float:
    """n(pattern) over all accepted events (optionally for one preselection outcome)."""
    if pattern not in PATTERNS:
        raise KeyError(f"unknown pattern {pattern!r}; expected one of {PATTERNS}")
    denom = tally.accepted(preselection)
    if denom == 0:
        raise InsufficientStatistics("no accepted events")
    return tally.count(pattern, preselection) / denom


def standard_error(tally: Tally, pattern: str, preselection: str | None = None) -> float:
    f = frequency(tally, pattern, preselection)
    return math.sqrt(f * (1 - f) / tally.accepted(preselection))


def estimate_P(tally: Tally, pattern: str = "D1'&D2'", bell_scaled: bool = False) -> float:
    """Frequency over four estimates the four-fold probability; unscaled it is the Bell-form P."""
    f = frequency(tally, pattern)
    return f if bell_scaled else f / 4


# --- phase sampling ---------------------------------------------------------


def phases_from_uniforms(model: PhaseModel, u1: np.ndarray, u2: np.ndarray) -> np.ndarray:
    if isinstance(model, TransverseFringe):
        z1 = model.z1 + (u1 - 0.5) * model.dz
        z2 = model.z2 + (u2 - 0.5) * model.dz
        return 2 * math.pi * (z2 - z1) / model.L
    return np.full(np.shape(u1), phase_of(model))


def sample_phase(model: PhaseModel, rng: np.random.Generator, size: int | None = None):
    """Phase realizations for detector positions drawn uniformly over their width."""
    n = 1 if size is None else size
    u = rng.random((n, 2))
    phi = phases_from_uniforms(model, u[:, 0], u[:, 1])
    return float(phi[0]) if size is None else phi


# --- exact outcome model ----------------------------------------------------


N_PHASES = 4


@dataclass
class OutcomeModel:
    """Occupation-vector probabilities of the final state as functions of phi.

    Only the branch with one photon reaching each free detector side can
    show the phase: its split outcomes (one photon behind each side of the
    central splitter) carry ``|c0 + c1 exp(i phi)|^2`` and the same-side
    outcomes absorb the remainder in fixed proportions. Every other branch
    is propagated at phi = 0.
    """

    labels: tuple[str, ...]
    photon_counts: np.ndarray  # (n_occ, n_labels)
    base: np.ndarray  # |amplitude|^2 at phi = 0
    split_idx: np.ndarray
    split_coef: np.ndarray  # (n_split, 2) complex
    same_idx: np.ndarray
    same_weight: float
    branch_weight: float

    def probabilities(self, phi: np.ndarray) -> np.ndarray:
        p = np.broadcast_to(self.base, (len(phi), len(self.base))).copy()
        if len(self.split_idx):
            e = np.exp(1j * phi)[:, None]
            ps = np.abs(self.split_coef[:, 0][None, :] + self.split_coef[:, 1][None, :] * e) ** 2
            p[:, self.split_idx] = ps
            if len(self.same_idx) and self.same_weight > 0:
                rest = np.clip(self.branch_weight - ps.sum(axis=1), 0.0, None) / self.same_weight
                p[:, self.same_idx] = self.base[self.same_idx][None, :] * rest[:, None]
        return p


def build_outcome_model(config: ExperimentConfig) -> OutcomeModel:
    if config.source_model == IDEAL_SINGLETS:
        sources = singlet_sources()
    else:
        sources = splitter_sources()
    if config.preselection_analyzers is None:
        c1, c2 = REMOVED, REMOVED
    else:
        c1, c2 = config.preselection_analyzers
    p1, p2 = config.prime_analyzers
    states = []
    layout = None
    for j in range(N_PHASES):
        st, layout = four_photon_output(p1, p2, c1, c2, config.central_bs, 2 * math.pi * j / N_PHASES, sources)
        states.append(st)
    modes = states[0].modes
    occs = sorted(set().union(*(s.terms for s in states)))
    amps = np.array([[s.terms.get(o, 0j) for o in occs] for s in states])  # (N_PHASES, n_occ)
    coef = np.fft.fft(amps, axis=0) / N_PHASES  # c_k multiplies exp(i k phi)

    labels = config.labels
    lab_index = {lab: i for i, lab in enumerate(labels)}
    incidence = np.zeros((len(modes), len(labels)), dtype=np.int64)
    for i, m in enumerate(modes):
        incidence[i, lab_index[layout[m]]] = 1
    counts = np.asarray(occs, dtype=np.int64) @ incidence

    col = {lab: counts[:, i] for lab, i in lab_index.items()}
    prime1 = col["D1'"] + col["D1'_perp"]
    prime2 = col["D2'"] + col["D2'_perp"]
    side1 = sum(col[l] for l in labels if l in ("D1", "D1_perp"))
    side2 = sum(col[l] for l in labels if l in ("D2", "D2_perp"))
    branch = (prime1 == 1) & (prime2 == 1)
    split = branch & (side1 >= 1) & (side2 >= 1)
    same = branch & ~split

    if np.abs(coef[2:, split]).max(initial=0.0) > 1e-12:
        raise RuntimeError("phase dependence beyond first harmonic in the one-photon-per-side branch")
    amp0 = coef.sum(axis=0)  # phi = 0
    base = np.abs(amp0) ** 2
    split_idx = np.flatnonzero(split)
    split_coef = np.stack([coef[0, split], coef[1, split]], axis=1) if len(split_idx) else np.zeros((0, 2), complex)
    same_idx = np.flatnonzero(same)
    return OutcomeModel(
        labels=labels,
        photon_counts=counts,
        base=base,
        split_idx=split_idx,
        split_coef=split_coef,
        same_idx=same_idx,
        same_weight=float((np.abs(amp0[same]) ** 2).sum()),
        branch_weight=float((np.abs(amp0[branch]) ** 2).sum()),
    )


# --- running ----------------------------------------------------------------


def draws_per_trial(config: ExperimentConfig) -> int:
    n = 3 + 2 * len(config.labels)
    return 4 * math.ceil(n / 4)


def trial_uniforms(config: ExperimentConfig, start: int, stop: int) -> np.ndarray:
    """Uniforms for trials [start, stop); row t is a pure function of (seed, t)."""
    k = draws_per_trial(config)
    bitgen = np.random.Philox(key=config.seed).advance(start * (k // 4))
    return np.random.Generator(bitgen).random((stop - start, k))


def _simulate_block(config: ExperimentConfig, model: OutcomeModel, start: int, stop: int):
    u = trial_uniforms(config, start, stop)
    n_lab = len(model.labels)
    phi = phases_from_uniforms(config.phase, u[:, 0], u[:, 1])
    probs = model.probabilities(phi)
    cum = np.cumsum(probs, axis=1)
    pick = (cum < (u[:, 2] * cum[:, -1])[:, None]).sum(axis=1)
    pick = np.minimum(pick, probs.shape[1] - 1)
    photons = model.photon_counts[pick]
    eta = np.array([config.detector(l).efficiency for l in model.labels])
    dark = np.array([config.detector(l).dark_count_prob for l in model.labels])
    p_click = 1.0 - (1.0 - eta)[None, :] ** photons
    clicks = (u[:, 3 : 3 + n_lab] < p_click) | (u[:, 3 + n_lab : 3 + 2 * n_lab] < dark[None, :])
    return clicks


def _decisions(config: ExperimentConfig, labels: tuple[str, ...], clicks: np.ndarray):
    """Vectorized gate: (gate open mask, accepted mask, preselection code, pattern code)."""
    c = {lab: clicks[:, i] for i, lab in enumerate(labels)}
    if config.preselection_analyzers is None:
        gate = c["D1"] & c["D2"]
        pre = np.zeros(len(clicks), dtype=np.int64)
    else:
        gate = (c["D1"] ^ c["D1_perp"]) & (c["D2"] ^ c["D2_perp"])
        pre = 2 * c["D1_perp"].astype(np.int64) + c["D2_perp"].astype(np.int64)
    prime_ok = (c["D1'"] ^ c["D1'_perp"]) & (c["D2'"] ^ c["D2'_perp"])
    accepted = gate & prime_ok
    pat = 2 * c["D1'_perp"].astype(np.int64) + c["D2'_perp"].astype(np.int64)
    return gate, accepted, pre, pat


def _tally_block(config: ExperimentConfig, model: OutcomeModel, start: int, stop: int) -> Tally:
    clicks = _simulate_block(config, model, start, stop)
    gate, accepted, pre, pat = _decisions(config, model.labels, clicks)
    pres = preselection_patterns(config)
    code = (pre * 4 + pat)[accepted]
    hist = np.bincount(code, minlength=16)
    by = {}
    for i, pre_name in enumerate(pres):
        for j, pat_name in enumerate(PATTERNS):
            n = int(hist[i * 4 + j])
            if n:
                by[(pre_name, pat_name)] = n
    n_gate = int(gate.sum())
    return Tally(by, n_gate, n_gate - int(accepted.sum()), stop - start)


def run_trials(config: ExperimentConfig, threads: int = 1, model: OutcomeModel | None = None) -> Tally:
    """Simulate ``config.trials`` pulses; the result is independent of ``threads``."""
    if threads < 1:
        raise ConfigError("threads must be at least 1")
    model = model or build_outcome_model(config)
    blocks = [(s, min(s + BLOCK, config.trials)) for s in range(0, config.trials, BLOCK)]
    if threads == 1:
        parts = [_tally_block(config, model, a, b) for a, b in blocks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda ab: _tally_block(config, model, *ab), blocks))
    total = Tally()
    for part in parts:
        total = total + part
    return total


def simulate_events(config: ExperimentConfig, start: int = 0, stop: int | None = None) -> list[EventRecord]:
    """Per-trial records for inspection; uses the same streams as :func:`run_trials`."""
    stop = config.trials if stop is None else stop
    model = build_outcome_model(config)
    clicks = _simulate_block(config, model, start, stop)
    records = []
    for i, row in enumerate(clicks):
        cl = {lab: bool(v) for lab, v in zip(model.labels, row)}
        records.append(EventRecord(start + i, cl, gate_event(cl, config)))
    return records


# --- analytic expectations --------------------------------------------------


def _pattern_angles(config: ExperimentConfig):
    out = {}
    for pat in PATTERNS:
        left, right = pat.split("&")
        a = _channel(config.prime_analyzers[0], left.endswith("_perp"))
        b = _channel(config.prime_analyzers[1], right.endswith("_perp"))
        out[pat] = (a, b)
    return out


def _channel(setting: AnalyzerSetting, perp: bool) -> float:
    if isinstance(setting, Removed):
        raise ConfigError("free-photon analyzers must be set for pattern statistics")
    return setting.theta + (math.pi / 2 if perp else 0.0)


def effective_visibility(config: ExperimentConfig) -> tuple[float, float]:
    """(mean phase, visibility) implied by the phase model."""
    from .analytic import visibility_from_geometry

    if isinstance(config.phase, TransverseFringe):
        return phase_of(config.phase), float(visibility_from_geometry(config.phase.dz, config.phase.L))
    return phase_of(config.phase), 1.0


def expected_frequencies(config: ExperimentConfig, preselection: str | None = None) -> dict[str, float]:
    """Closed-form conditional pattern frequencies (ideal gating, no dark counts)."""
    phi, v = effective_visibility(config)
    if config.preselection_analyzers is None:
        central = [(REMOVED, REMOVED)]
    else:
        # no preselection outcome given: pool all four
        chosen = preselection_patterns(config) if preselection is None else (preselection,)
        central = []
        for pre in chosen:
            s1, s2 = pre.split("&")
            central.append(
                (
                    _channel(config.preselection_analyzers[0], s1.endswith("_perp")),
                    _channel(config.preselection_analyzers[1], s2.endswith("_perp")),
                )
            )
    raw = {
        pat: sum(prob4(a, b, c1, c2, config.central_bs, phi, v) for c1, c2 in central)
        for pat, (a, b) in _pattern_angles(config).items()
    }
    total = sum(raw.values())
    return {k: p / total for k, p in raw.items()}


def expected_gate_rate(config: ExperimentConfig) -> float:
    """Gate-open probability per pulse for ideal singlets and threshold detectors, no dark counts."""
    phi, v = effective_visibility(config)
    if config.source_model != IDEAL_SINGLETS:
        raise ConfigError("closed-form gate rate is for ideal singlet sources")
    opp = sum(
        prob4(a, b, REMOVED, REMOVED, config.central_bs, phi, v) for a, b in _pattern_angles(config).values()
    )
    eta = [config.detector(l).efficiency for l in ("D1", "D2")]
    return opp * eta[0] * eta[1]


def with_overrides(config: ExperimentConfig, **changes) -> ExperimentConfig:
    return replace(config, **changes)
