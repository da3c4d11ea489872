import math

import numpy as np
import pytest

from spincorr.fock import map_matrix, pattern_probability, unitarity_deviation, x, y
from spincorr.optics import (
    REMOVED,
    Angle,
    Beat,
    BeamSplitterSpec,
    Fixed,
    InterferenceTerms,
    OpticsError,
    TransverseFringe,
    analyzer_map,
    as_setting,
    beam_splitter_map,
    make_polarized_pair,
    make_r_state,
    make_singlet,
    make_triplet_like,
    phase_of,
)
from spincorr.setups import analyze, two_photon_distribution

H = 2 ** -0.5


def amps(state):
    return {k: v for k, v in state.as_dict().items()}


def test_fifty_fifty_defaults():
    s = BeamSplitterSpec.fifty_fifty()
    assert (s.t_x, s.t_y, s.r_x, s.r_y) == (H, H, H, H)
    assert s.is_fifty_fifty


def test_lossy_spec_rejected():
    with pytest.raises(OpticsError, match="lossy"):
        BeamSplitterSpec(0.5, H, 0.5, H)


def test_polarizing_spec_from_ratio():
    s = BeamSplitterSpec.from_ratio(0.31)
    assert s.t_x ** 2 == pytest.approx(1 / (1 + 0.31 ** 2))
    assert s.ratio == pytest.approx(0.31)
    inputs = [x("a"), y("a"), x("b"), y("b")]
    assert unitarity_deviation(beam_splitter_map(s, "a", "b", "c", "d"), inputs) < 1e-12


def test_angle_reduced_mod_pi():
    assert Angle(math.pi + 0.1).theta == pytest.approx(0.1)
    assert Angle(-0.1).theta == pytest.approx(math.pi - 0.1)
    assert Angle(math.pi).theta == 0.0
    assert Angle.degrees(90).perp().theta == pytest.approx(0.0, abs=1e-15)


def test_setting_coercion():
    assert as_setting(None) is REMOVED
    assert as_setting("removed") is REMOVED
    assert as_setting(math.inf) is REMOVED
    assert as_setting(0.5) == Angle(0.5)


def test_polarized_pair_amplitudes():
    assert amps(make_polarized_pair(0, math.pi / 2)) == {(("1_0:x", 1), ("2_0:y", 1)): pytest.approx(1.0)}
    quarter = make_polarized_pair(math.pi / 4, math.pi / 4)
    assert all(abs(a - 0.5) < 1e-12 for a in quarter.terms.values())
    sixth = make_polarized_pair(math.pi / 6, 0.0)
    assert sixth.amplitude({x("1_0"): 1, x("2_0"): 1}) == pytest.approx(math.sqrt(3) / 2)
    assert sixth.amplitude({y("1_0"): 1, x("2_0"): 1}) == pytest.approx(0.5)


def test_prepared_pair_needs_angles():
    with pytest.raises(OpticsError):
        make_polarized_pair(REMOVED, 0.0)


def test_singlet_amplitudes_and_same_port():
    s = make_singlet("1'", "1")
    assert s.amplitude({x("1'"): 1, y("1"): 1}) == pytest.approx(H)
    assert s.amplitude({y("1'"): 1, x("1"): 1}) == pytest.approx(-H)
    with pytest.raises(OpticsError):
        make_singlet("1", "1")


def test_singlet_analyzed_both_sides():
    s = make_singlet("A", "B")
    th = 0.37
    out, layout = analyze(s, {"A": (Angle(th), "DA"), "B": (Angle(th), "DB")})
    from spincorr.fock import detection_distribution

    dist = detection_distribution(out, layout)
    assert pattern_probability(dist, {"DA": 1, "DB": 1}) < 1e-30
    assert pattern_probability(dist, {"DA": 1, "DB_perp": 1}) == pytest.approx(0.5)
    out, layout = analyze(s, {"A": (Angle(0.0), "DA"), "B": (Angle(math.pi / 2), "DB")})
    assert pattern_probability(detection_distribution(out, layout), {"DA": 1, "DB": 1}) == pytest.approx(0.5)


def test_r_states():
    t = make_triplet_like("A", "B")
    assert t.amplitude({x("A"): 1, y("B"): 1}) == pytest.approx(H)
    assert t.amplitude({y("A"): 1, x("B"): 1}) == pytest.approx(H)
    z = make_r_state("A", "B", 0.0)
    assert len(z.terms) == 1
    r = make_r_state("A", "B", 0.31)
    assert r.amplitude({x("A"): 1, y("B"): 1}) == pytest.approx(1 / math.sqrt(1 + 0.31 ** 2), abs=1e-12)
    assert r.amplitude({y("A"): 1, x("B"): 1}) == pytest.approx(0.31 / math.sqrt(1 + 0.31 ** 2), abs=1e-12)
    with pytest.raises(OpticsError):
        make_r_state("A", "B", -1.0)


def test_eq10_value_through_pipeline():
    dist = two_photon_distribution(0.0, math.pi / 2, 0.0, math.pi / 2)
    assert pattern_probability(dist, {"D1": 1, "D2": 1}) == pytest.approx(0.25, abs=1e-12)


def test_phase_pi_kills_coincidence():
    dist = two_photon_distribution(0.0, math.pi / 2, math.pi / 4, -math.pi / 4, phase=Fixed(math.pi))
    assert pattern_probability(dist, {"D1": 1, "D2": 1}) == pytest.approx(0.0, abs=1e-15)
    terms = InterferenceTerms(-0.25, 0.25, math.pi)
    assert terms.probability() == pytest.approx(0.0)


def test_analyzer_maps():
    m, layout = analyzer_map(Angle(0.0), "p", "D")
    assert {str(k): v for k, v in m[x("p")].items()} == {"D": 1.0}
    m, _ = analyzer_map(Angle(math.pi / 2), "p", "D")
    assert list(m[x("p")].values()) == [pytest.approx(-1.0)]
    m, layout = analyzer_map(REMOVED, "p", "D")
    assert m == {} and set(layout.values()) == {"D"}


def test_analyzer_maps_unitary_and_invertible():
    for th in np.linspace(0, math.pi, 13):
        m, _ = analyzer_map(Angle(th), "p", "D")
        mat, _ = map_matrix(m, [x("p"), y("p")])
        assert np.allclose(mat @ mat.conj().T, np.eye(2), atol=1e-12)
        inv, _ = map_matrix(analyzer_map(Angle(-th), "p", "D")[0], [x("p"), y("p")])
        # -th is reduced mod pi, which can flip the overall sign
        prod = mat @ inv
        assert np.allclose(prod, np.eye(2), atol=1e-12) or np.allclose(prod, -np.eye(2), atol=1e-12)


def test_phase_models():
    assert phase_of(TransverseFringe(1.0, 1.0, 2.0)) == 0.0
    assert phase_of(TransverseFringe(0.0, 1.0, 2.0)) == pytest.approx(math.pi)
    beat = Beat(2 * math.pi * 1e13, 15e-6, 3e8)
    assert phase_of(beat) == pytest.approx(2 * math.pi * 1e13 * 15e-6 / 3e8)
    assert phase_of(Fixed(0.3)) == 0.3
    with pytest.raises(OpticsError):
        TransverseFringe(0, 0, 0.0)
    with pytest.raises(OpticsError):
        TransverseFringe(0, 0, 1.0, -0.1)
