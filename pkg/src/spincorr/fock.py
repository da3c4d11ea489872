"""Exact few-photon Fock states over (port, polarization) modes.

States are sparse maps from occupation vectors to complex amplitudes.
Linear optics acts by substituting creation operators, so every
probability in the package can be recomputed from first principles here.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field

import numpy as np

PRUNE = 1e-15
MAX_PHOTONS = 8
UNITARITY_TOL = 1e-9

AXES = ("x", "y", "-")


class FockError(ValueError):
    """Invalid state construction or mode transformation."""


@dataclass(frozen=True, order=True)
class ModeId:
    """A single bosonic mode: spatial port plus polarization axis.

    ``axis`` is ``"x"`` or ``"y"`` for polarization modes and ``"-"`` for a
    detector channel behind an analyzer, which carries no further label.
    """

    port: str
    axis: str = "-"

    def __post_init__(self):
        if self.axis not in AXES:
            raise FockError(f"unknown axis {self.axis!r} for port {self.port!r}")

    def __str__(self):
        return self.port if self.axis == "-" else f"{self.port}:{self.axis}"


def x(port: str) -> ModeId:
    return ModeId(str(port), "x")


def y(port: str) -> ModeId:
    return ModeId(str(port), "y")


# creation operator of an input mode -> {output mode: coefficient}
ModeMap = Mapping[ModeId, Mapping[ModeId, complex]]


@dataclass(frozen=True)
class FockState:
    """Superposition of occupation vectors over an ordered, sorted mode list."""

    modes: tuple[ModeId, ...]
    terms: Mapping[tuple[int, ...], complex] = field(default_factory=dict)

    def __post_init__(self):
        if len(set(self.modes)) != len(self.modes):
            dup = [m for m in self.modes if self.modes.count(m) > 1][0]
            raise FockError(f"duplicate mode {dup}")
        if list(self.modes) != sorted(self.modes):
            raise FockError("modes must be sorted; build states with FockState.create")
        for occ in self.terms:
            if len(occ) != len(self.modes):
                raise FockError("occupation vector length does not match mode list")

    @classmethod
    def vacuum(cls, modes: Iterable[ModeId] = ()) -> "FockState":
        modes = tuple(sorted(set(modes)))
        return cls(modes, {(0,) * len(modes): 1.0 + 0j})

    @classmethod
    def create(
        cls,
        products: Mapping[tuple[ModeId, ...], complex],
        modes: Iterable[ModeId] = (),
        normalize: bool = True,
    ) -> "FockState":
        """Build sum_k c_k a†_{m1} a†_{m2} ... |0> from creation-operator words.

        Words may repeat a mode; a†^n|0> = sqrt(n!)|n> is applied.
        """
        all_modes = set(modes)
        for word in products:
            all_modes.update(word)
        ordered = tuple(sorted(all_modes))
        index = {m: i for i, m in enumerate(ordered)}
        terms: dict[tuple[int, ...], complex] = {}
        n_photons = None
        for word, coef in products.items():
            if n_photons is None:
                n_photons = len(word)
            elif len(word) != n_photons:
                raise FockError("source words must share one photon number")
            occ = [0] * len(ordered)
            for m in word:
                occ[index[m]] += 1
            key = tuple(occ)
            weight = math.sqrt(math.prod(math.factorial(n) for n in occ))
            terms[key] = terms.get(key, 0j) + complex(coef) * weight
        state = cls(ordered, _prune(terms))
        _check_photon_number(state)
        return state.normalized() if normalize else state

    @property
    def photon_number(self) -> int:
        totals = {sum(occ) for occ in self.terms}
        if len(totals) != 1:
            raise FockError(f"state mixes photon numbers {sorted(totals)}")
        return totals.pop()

    def norm(self) -> float:
        return math.sqrt(sum(abs(a) ** 2 for a in self.terms.values()))

    def normalized(self) -> "FockState":
        n = self.norm()
        if n == 0:
            raise FockError("cannot normalize the zero vector")
        return FockState(self.modes, {k: a / n for k, a in self.terms.items()})

    def amplitude(self, occupation: Mapping[ModeId, int]) -> complex:
        unknown = set(occupation) - set(self.modes)
        if unknown:
            raise FockError(f"modes not in state: {sorted(map(str, unknown))}")
        key = tuple(occupation.get(m, 0) for m in self.modes)
        return self.terms.get(key, 0j)

    def items(self):
        """Terms in lexicographic order of occupation vectors."""
        return sorted(self.terms.items())

    def as_dict(self) -> dict[tuple[tuple[str, int], ...], complex]:
        out = {}
        for occ, amp in self.items():
            out[tuple((str(m), n) for m, n in zip(self.modes, occ) if n)] = amp
        return out


def _prune(terms: Mapping[tuple[int, ...], complex]) -> dict[tuple[int, ...], complex]:
    return {k: complex(a) for k, a in terms.items() if abs(a) >= PRUNE}


def _check_photon_number(state: FockState) -> None:
    for occ in state.terms:
        if sum(occ) > MAX_PHOTONS:
            raise FockError(f"{sum(occ)} photons exceeds the supported maximum of {MAX_PHOTONS}")


def tensor_product(a: FockState, b: FockState) -> FockState:
    overlap = set(a.modes) & set(b.modes)
    if overlap:
        raise FockError(f"modes shared by both factors: {sorted(map(str, overlap))}")
    modes = tuple(sorted(a.modes + b.modes))
    pos_a = [modes.index(m) for m in a.modes]
    pos_b = [modes.index(m) for m in b.modes]
    terms: dict[tuple[int, ...], complex] = {}
    for occ_a, amp_a in a.terms.items():
        for occ_b, amp_b in b.terms.items():
            occ = [0] * len(modes)
            for i, n in zip(pos_a, occ_a):
                occ[i] = n
            for i, n in zip(pos_b, occ_b):
                occ[i] = n
            terms[tuple(occ)] = amp_a * amp_b
    state = FockState(modes, _prune(terms))
    _check_photon_number(state)
    return state


def map_matrix(mode_map: ModeMap, inputs: Iterable[ModeId]) -> tuple[np.ndarray, list[ModeId]]:
    """Rows: inputs; columns: sorted union of outputs. Unmapped inputs are identity."""
    inputs = list(inputs)
    rows = [dict(mode_map.get(m, {m: 1.0})) for m in inputs]
    cols = sorted({o for row in rows for o in row})
    col = {o: j for j, o in enumerate(cols)}
    mat = np.zeros((len(inputs), len(cols)), dtype=complex)
    for i, row in enumerate(rows):
        for o, c in row.items():
            mat[i, col[o]] += c
    return mat, cols


def unitarity_deviation(mode_map: ModeMap, inputs: Iterable[ModeId]) -> float:
    """Frobenius norm of U U† - 1 over the given input modes (isometry check)."""
    mat, _ = map_matrix(mode_map, inputs)
    return float(np.linalg.norm(mat @ mat.conj().T - np.eye(mat.shape[0])))


def apply_mode_map(state: FockState, mode_map: ModeMap, check_unitary: bool = True) -> FockState:
    """Substitute a†_in -> sum_out c a†_out in every term and re-expand.

    Modes absent from ``mode_map`` pass through unchanged. With
    ``check_unitary`` the map restricted to the state's modes must be an
    isometry; detection-conditioned field maps (see
    :func:`spincorr.optics.beam_splitter_map` with a nonzero phase) need
    ``check_unitary=False``.
    """
    if check_unitary:
        dev = unitarity_deviation(mode_map, state.modes)
        if dev > UNITARITY_TOL:
            raise FockError(f"mode map is not unitary: |U U^dag - 1| = {dev:.3e}")
    rows = {m: list(mode_map.get(m, {m: 1.0}).items()) for m in state.modes}
    out_modes = tuple(sorted({o for r in rows.values() for o, _ in r}))
    col = {o: j for j, o in enumerate(out_modes)}

    terms: dict[tuple[int, ...], complex] = {}
    for occ, amp in state.terms.items():
        photons = [m for m, n in zip(state.modes, occ) for _ in range(n)]
        pre = amp / math.sqrt(math.prod(math.factorial(n) for n in occ))
        for choice in itertools.product(*(rows[m] for m in photons)):
            out = [0] * len(out_modes)
            c = pre
            for o, coef in choice:
                out[col[o]] += 1
                c *= coef
            if c == 0:
                continue
            key = tuple(out)
            terms[key] = terms.get(key, 0j) + c
    for key in terms:
        terms[key] *= math.sqrt(math.prod(math.factorial(n) for n in key))
    return FockState(out_modes, _prune(terms))


@dataclass(frozen=True)
class DetectionPattern:
    """Photon counts delivered to each detector label in one outcome."""

    counts: tuple[tuple[str, int], ...]

    @classmethod
    def from_mapping(cls, counts: Mapping[str, int]) -> "DetectionPattern":
        return cls(tuple(sorted(counts.items())))

    def __getitem__(self, label: str) -> int:
        for k, n in self.counts:
            if k == label:
                return n
        raise KeyError(label)

    def get(self, label: str, default: int = 0) -> int:
        try:
            return self[label]
        except KeyError:
            return default

    @property
    def total(self) -> int:
        return sum(n for _, n in self.counts)

    def __str__(self):
        return " ".join(f"{k}={n}" for k, n in self.counts)


def occupation_labels(state: FockState, layout: Mapping[ModeId, str]) -> tuple[list[str], np.ndarray]:
    """Detector labels (sorted) and the mode-to-label incidence used for binning."""
    missing = [m for m in state.modes if m not in layout]
    if missing:
        raise FockError(f"mode {missing[0]} has no detector assignment")
    labels = sorted({layout[m] for m in state.modes})
    idx = {lab: j for j, lab in enumerate(labels)}
    incidence = np.zeros((len(state.modes), len(labels)), dtype=int)
    for i, m in enumerate(state.modes):
        incidence[i, idx[layout[m]]] = 1
    return labels, incidence


def detection_distribution(
    state: FockState, layout: Mapping[ModeId, str]
) -> dict[DetectionPattern, float]:
    """Born-rule probabilities of detector photon-count patterns.

    Modes sharing a label add their photon numbers; distinct occupation
    vectors add incoherently.
    """
    labels, incidence = occupation_labels(state, layout)
    out: dict[DetectionPattern, float] = {}
    for occ, amp in state.items():
        counts = np.asarray(occ) @ incidence
        pat = DetectionPattern(tuple(zip(labels, (int(c) for c in counts))))
        out[pat] = out.get(pat, 0.0) + abs(amp) ** 2
    return out


def pattern_probability(dist: Mapping[DetectionPattern, float], required: Mapping[str, int]) -> float:
    """Total probability of patterns whose counts match ``required``."""
    return sum(p for pat, p in dist.items() if all(pat.get(k) == v for k, v in required.items()))
