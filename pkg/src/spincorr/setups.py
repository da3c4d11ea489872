"""Exact Fock-space pipelines for the two- and four-photon set-ups.

Port names: prepared inputs ``1_0``/``2_0``; pair-source outputs ``1'``,
``1``, ``2'``, ``2``; central splitter outputs ``o1`` (towards D1) and
``o2`` (towards D2). Detector labels are ``D1``, ``D2``, ``D1'``, ``D2'``
and their ``_perp`` partners.
"""

from __future__ import annotations

from collections.abc import Mapping

from .fock import (
    DetectionPattern,
    FockState,
    ModeId,
    apply_mode_map,
    detection_distribution,
    tensor_product,
    x,
    y,
)
from .optics import (
    AnalyzerSetting,
    Angle,
    BeamSplitterSpec,
    PhaseModel,
    analyzer_map,
    as_setting,
    beam_splitter_map,
    make_polarized_pair,
    make_singlet,
    merge_maps,
    phase_of,
)

FIFTY = BeamSplitterSpec()

PRIME_LABELS = ("D1'", "D1'_perp", "D2'", "D2'_perp")
SIDE1 = ("D1", "D1_perp")
SIDE2 = ("D2", "D2_perp")
PRIME1 = ("D1'", "D1'_perp")
PRIME2 = ("D2'", "D2'_perp")


def central_splitter(state: FockState, spec: BeamSplitterSpec, phase, in_a: str, in_b: str) -> FockState:
    phi = phase_of(phase)
    bs = beam_splitter_map(spec, in_a, in_b, "o1", "o2", phi)
    return apply_mode_map(state, bs, check_unitary=phi == 0.0)


def analyze(state: FockState, settings: Mapping[str, tuple[AnalyzerSetting, str]]):
    """Apply analyzers ``{port: (setting, label)}``; returns state and full layout."""
    maps, layout = [], {}
    for port, (setting, label) in settings.items():
        m, lay = analyzer_map(setting, port, label)
        maps.append(m)
        layout.update(lay)
    out = apply_mode_map(state, merge_maps(*maps))
    missing = [m for m in out.modes if m not in layout]
    if missing:
        raise ValueError(f"no analyzer covers mode {missing[0]}")
    return out, layout


def two_photon_output(theta1_0, theta2_0, theta1, theta2, spec=FIFTY, phase: PhaseModel | float = 0.0):
    """State and layout after splitter and analyzers for prepared input angles."""
    psi = make_polarized_pair(theta1_0, theta2_0)
    psi = central_splitter(psi, spec, phase, "1_0", "2_0")
    return analyze(psi, {"o1": (as_setting(theta1), "D1"), "o2": (as_setting(theta2), "D2")})


def two_photon_distribution(theta1_0, theta2_0, theta1, theta2, spec=FIFTY, phase=0.0):
    return detection_distribution(*two_photon_output(theta1_0, theta2_0, theta1, theta2, spec, phase))


def singlet_sources() -> FockState:
    return tensor_product(make_singlet("1'", "1"), make_singlet("2'", "2"))


def splitter_sources(spec: BeamSplitterSpec = FIFTY) -> FockState:
    """Orthogonally polarized pairs through BS1 and BS2, keeping same-side emissions."""
    states = []
    for k in ("1", "2"):
        pair = FockState.create({(x(f"s{k}a"), y(f"s{k}b")): 1.0})
        bs = beam_splitter_map(spec, f"s{k}a", f"s{k}b", f"{k}'", k)
        states.append(apply_mode_map(pair, bs))
    return tensor_product(*states)


def four_photon_output(
    theta1p,
    theta2p,
    theta1,
    theta2,
    spec=FIFTY,
    phase: PhaseModel | float = 0.0,
    sources: FockState | None = None,
):
    psi = singlet_sources() if sources is None else sources
    psi = central_splitter(psi, spec, phase, "1", "2")
    return analyze(
        psi,
        {
            "o1": (as_setting(theta1), "D1"),
            "o2": (as_setting(theta2), "D2"),
            "1'": (as_setting(theta1p), "D1'"),
            "2'": (as_setting(theta2p), "D2'"),
        },
    )


def four_photon_distribution(theta1p, theta2p, theta1, theta2, spec=FIFTY, phase=0.0, sources=None):
    return detection_distribution(*four_photon_output(theta1p, theta2p, theta1, theta2, spec, phase, sources))


def side_counts(pattern: DetectionPattern, labels) -> int:
    return sum(pattern.get(lab) for lab in labels)


def one_arm_correlation(state: FockState, port: str, theta_a: float, theta_b: float, other: Mapping[str, tuple]):
    """Two-photon intensity correlation inside one arm, read by splitting the arm.

    The arm ``port`` is divided by an ideal 50:50 splitter into two
    analyzed sub-arms at ``theta_a`` and ``theta_b``; the returned
    distribution times four equals |<0| a_a a_b |psi>|^2 for the arm,
    where ``a_theta = cos(theta) a_x + sin(theta) a_y``.
    """
    split = beam_splitter_map(FIFTY, port, f"{port}#vac", f"{port}#L", f"{port}#R")
    # only the occupied input rows are needed; the vacuum port carries nothing
    split = {k: v for k, v in split.items() if k.port == port}
    psi = apply_mode_map(state, split)
    settings = dict(other)
    settings[f"{port}#L"] = (Angle(theta_a), "L")
    settings[f"{port}#R"] = (Angle(theta_b), "R")
    return detection_distribution(*analyze(psi, settings))


def prime_modes() -> tuple[ModeId, ...]:
    return (x("1'"), y("1'"), x("2'"), y("2'"))
