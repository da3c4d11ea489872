import itertools
import math

import numpy as np
import pytest

from spincorr.fock import (
    DetectionPattern,
    FockError,
    FockState,
    ModeId,
    apply_mode_map,
    detection_distribution,
    pattern_probability,
    tensor_product,
    unitarity_deviation,
    x,
    y,
)
from spincorr.optics import BeamSplitterSpec, Fixed, beam_splitter_map, make_polarized_pair, make_singlet
from spincorr.setups import (
    four_photon_distribution,
    singlet_sources,
    two_photon_distribution,
)

H = 2 ** -0.5


def test_mode_ordering_and_axes():
    assert x("1") < y("1") < x("2")
    assert str(x("1'")) == "1':x"
    with pytest.raises(FockError):
        ModeId("1", "z")


def test_create_applies_bosonic_factor():
    psi = FockState.create({(x("a"), x("a")): 1.0}, normalize=False)
    assert psi.amplitude({x("a"): 2}) == pytest.approx(math.sqrt(2))
    assert psi.normalized().norm() == pytest.approx(1.0)


def test_create_rejects_mixed_photon_number():
    with pytest.raises(FockError):
        FockState.create({(x("a"),): 1.0, (x("a"), x("b")): 1.0})


def test_photon_cap():
    with pytest.raises(FockError, match="maximum"):
        FockState.create({tuple(x(str(i)) for i in range(9)): 1.0})


def test_zero_amplitudes_pruned():
    psi = FockState.create({(x("a"),): 1.0, (y("a"),): 1e-17})
    assert len(psi.terms) == 1


def test_duplicate_modes_rejected():
    with pytest.raises(FockError, match="duplicate"):
        FockState((x("a"), x("a")), {})


def test_tensor_of_two_singlets():
    psi = singlet_sources()
    amps = sorted(round(a.real, 12) for a in psi.terms.values())
    assert amps == [-0.5, -0.5, 0.5, 0.5]
    assert psi.norm() == pytest.approx(1.0, abs=1e-12)
    assert psi.photon_number == 4


def test_tensor_with_vacuum_extends_modes():
    s = make_singlet("1'", "1")
    out = tensor_product(FockState.vacuum([x("z")]), s)
    assert x("z") in out.modes
    assert out.amplitude({x("1'"): 1, y("1"): 1}) == pytest.approx(H)


def test_tensor_overlap_names_mode():
    with pytest.raises(FockError, match="1':x"):
        tensor_product(make_singlet("1'", "1"), make_singlet("1'", "2"))


def test_tensor_of_prepared_photons():
    a = FockState.create({(x("1_0"),): 1.0})
    b = FockState.create({(y("2_0"),): 1.0})
    assert tensor_product(a, b).as_dict() == make_polarized_pair(0, math.pi / 2).as_dict()


def test_hong_ou_mandel_null():
    psi = FockState.create({(x("a"), x("b")): 1.0})
    out = apply_mode_map(psi, beam_splitter_map(BeamSplitterSpec(), "a", "b", "c", "d"))
    assert abs(out.amplitude({x("c"): 1, x("d"): 1})) < 1e-15
    assert out.norm() == pytest.approx(1.0, abs=1e-12)


def test_identity_map_is_noop():
    psi = singlet_sources()
    assert apply_mode_map(psi, {}).as_dict() == psi.as_dict()


def test_orthogonal_photons_split_half_the_time():
    dist = two_photon_distribution(0.0, math.pi / 2, "removed", "removed")
    assert pattern_probability(dist, {"D1": 1, "D2": 1}) == pytest.approx(0.5, abs=1e-12)


def test_non_unitary_map_reports_deviation():
    psi = FockState.create({(x("a"),): 1.0})
    with pytest.raises(FockError, match="not unitary"):
        apply_mode_map(psi, {x("a"): {x("b"): 0.5}})


def test_phase_map_unitary_only_at_zero():
    spec = BeamSplitterSpec()
    inputs = [x("a"), y("a"), x("b"), y("b")]
    assert unitarity_deviation(beam_splitter_map(spec, "a", "b", "c", "d"), inputs) < 1e-12
    assert unitarity_deviation(beam_splitter_map(spec, "a", "b", "c", "d", Fixed(1.0)), inputs) > 1e-3


def test_distribution_sums_to_one():
    rng = np.random.default_rng(3)
    for _ in range(20):
        angles = rng.uniform(0, math.pi, 4)
        dist = four_photon_distribution(*angles)
        assert sum(dist.values()) == pytest.approx(1.0, abs=1e-12)
        assert all(p.total == 4 for p in dist)


def test_single_detector_layout():
    psi = singlet_sources()
    dist = detection_distribution(psi, {m: "D" for m in psi.modes})
    assert dist == {DetectionPattern.from_mapping({"D": 4}): pytest.approx(1.0)}


def test_unassigned_mode_named():
    with pytest.raises(FockError, match="1:y"):
        detection_distribution(make_singlet("1'", "1"), {x("1'"): "A", y("1'"): "A", x("1"): "B"})


def test_four_photon_left_right_value():
    dist = four_photon_distribution(0.0, math.pi / 2, 0.0, math.pi / 2)
    p = pattern_probability(dist, {"D1'": 1, "D2'": 1, "D1": 1, "D2": 1})
    assert p == pytest.approx(1 / 16, abs=1e-12)


def test_four_photon_equal_angles_never_coincide():
    dist = four_photon_distribution(0.7, 0.7, "removed", "removed")
    assert pattern_probability(dist, {"D1'": 1, "D2'": 1, "D1": 1, "D2": 1}) < 1e-30


def test_exchange_symmetry():
    rng = np.random.default_rng(5)
    for _ in range(10):
        a, b, c, d = rng.uniform(0, math.pi, 4)
        lhs = pattern_probability(four_photon_distribution(a, b, c, d), {"D1'": 1, "D2'": 1, "D1": 1, "D2": 1})
        rhs = pattern_probability(four_photon_distribution(b, a, d, c), {"D1'": 1, "D2'": 1, "D1": 1, "D2": 1})
        assert lhs == pytest.approx(rhs, abs=1e-12)


def test_items_are_lexicographic():
    keys = [k for k, _ in singlet_sources().items()]
    assert keys == sorted(keys)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_norm_preserved_multi_occupation(n):
    word = tuple(itertools.chain([x("a")] * n, [y("b")] * (3 - n)))
    psi = FockState.create({word: 1.0})
    out = apply_mode_map(psi, beam_splitter_map(BeamSplitterSpec.from_ratio(0.4), "a", "b", "c", "d"))
    assert out.norm() == pytest.approx(1.0, abs=1e-12)
