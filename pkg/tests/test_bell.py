import math

import numpy as np
import pytest

from spincorr.bell import (
    COS_SQUARED,
    FRINGE,
    AngleQuadruple,
    EberhardPredictor,
    ProductPredictor,
    SingletPredictor,
    ch_from_tallies,
    ch_statistic,
    eberhard_scan,
    efficiency_threshold_model,
    efficiency_threshold_paper,
    optimize_angles,
    simulate_ch,
)
from spincorr.montecarlo import PATTERNS, ExperimentConfig, Tally
from spincorr.optics import REMOVED, Angle

QUANTUM_MAX = (math.sqrt(2) - 1) / 2
BEST = AngleQuadruple.degrees(0, 135, 67.5, 22.5)


def test_quadruple_normalized():
    q = AngleQuadruple.degrees(0, 200, -10, 90)
    assert q.as_degrees() == pytest.approx((0, 20, 170, 90))


def test_terms_recombine():
    res = ch_statistic(SingletPredictor(), BEST)
    assert res.recombined() == pytest.approx(res.S)
    assert res.S == pytest.approx(QUANTUM_MAX, abs=1e-12)
    assert res.terms["P(a',inf)"] == 0.5


def test_removed_setting_gives_singles():
    p = SingletPredictor(eta=0.8)
    assert p(Angle(0.3), REMOVED) == pytest.approx(0.4)
    assert p(Angle(0.0), Angle(math.pi / 2)) == pytest.approx(0.64 * 0.5)
    with pytest.raises(ValueError):
        p(REMOVED, REMOVED)


def test_conventions_differ_below_full_visibility():
    f, e = SingletPredictor(0.87, FRINGE), SingletPredictor(0.87, COS_SQUARED)
    assert f.joint(0, 0.4) != pytest.approx(e.joint(0, 0.4))
    assert SingletPredictor(1, FRINGE).joint(0, 0.4) == pytest.approx(SingletPredictor(1, COS_SQUARED).joint(0, 0.4))
    with pytest.raises(ValueError):
        SingletPredictor(0.9, "other")


@pytest.mark.parametrize("v", [1.0, 0.9, 0.8])
def test_fringe_optimum_closed_form(v):
    res = optimize_angles(SingletPredictor(v, FRINGE))
    assert res.S == pytest.approx(-0.5 + v * math.sqrt(2) / 2, abs=1e-9)


def test_optimizer_is_deterministic():
    a = optimize_angles(SingletPredictor(0.95))
    b = optimize_angles(SingletPredictor(0.95))
    assert a.quadruple == b.quadruple


def test_generic_callable_matches_predictor():
    pred = SingletPredictor()
    res = optimize_angles(lambda s1, s2: pred(s1, s2), grid_step=math.radians(2.5), covariant=True)
    assert res.S == pytest.approx(QUANTUM_MAX, abs=1e-9)


def test_product_models_never_violate():
    rng = np.random.default_rng(0)
    for _ in range(4):
        (a1, b1, g1), (a2, b2, g2) = rng.uniform(0, 1, (2, 3))

        def left(t, a1=a1, b1=b1, g1=g1):
            return a1 * (1 - b1) + a1 * b1 * np.cos(t - g1 * math.pi) ** 2

        def right(t, a2=a2, b2=b2, g2=g2):
            return a2 * (1 - b2) + a2 * b2 * np.cos(t - g2 * math.pi) ** 2

        res = optimize_angles(ProductPredictor(left, right), grid_step=math.radians(6))
        assert res.S <= 1e-12


def test_closed_form_threshold():
    assert efficiency_threshold_paper(1.0) == pytest.approx(2 * (math.sqrt(2) - 1))
    with pytest.raises(ValueError):
        efficiency_threshold_paper(0.0)


@pytest.mark.parametrize("v", [1.0, 0.87, 0.8])
def test_numerical_threshold_matches_closed_form(v):
    assert efficiency_threshold_model(SingletPredictor(v, FRINGE)) == pytest.approx(efficiency_threshold_paper(v), abs=1e-5)


def test_no_violation_reported():
    assert efficiency_threshold_model(SingletPredictor(0.7, FRINGE)) is None


def test_cos_squared_threshold_value():
    assert efficiency_threshold_model(SingletPredictor(0.87, COS_SQUARED)) == pytest.approx(0.847326, abs=1e-5)


def test_eberhard_reduces_to_singlet_form():
    e = EberhardPredictor(1.0)
    for a, b in np.random.default_rng(1).uniform(0, math.pi, (10, 2)):
        assert e.joint(a, b) == pytest.approx(0.5 * math.cos(a - b) ** 2)
        assert e.single_left(a) == pytest.approx(0.5)


def test_eberhard_scan_monotone():
    rows = eberhard_scan([1.0, 0.6, 0.31, 0.2])
    etas = [r.eta_min for r in rows]
    assert all(b <= a + 1e-6 for a, b in zip(etas, etas[1:]))
    assert rows[0].eta_min == pytest.approx(2 * (math.sqrt(2) - 1), abs=1e-5)
    assert rows[2].T_x == pytest.approx(0.912326, abs=1e-6)
    assert all(r.eta_min > 2 / 3 for r in rows)
    assert rows[2].eta_min <= 0.72


def test_ch_from_tallies_error_propagation():
    q = BEST
    t = Tally({("D1&D2", p): 250 for p in PATTERNS}, 1000, 0, 4000)
    tallies = {k: t for k in ((q.a, q.b), (q.a, q.b2), (q.a2, q.b2), (q.a2, q.b))}
    res, se = ch_from_tallies(tallies, q)
    assert res.S == pytest.approx(-0.5)
    assert res.recombined() == pytest.approx(res.S)
    # each run contributes a single pattern with weight -1 or +1: variance p(1-p)/n
    assert se == pytest.approx(math.sqrt(4 * 0.25 * 0.75 / 1000))


def test_simulated_violation_small_run():
    res, se = simulate_ch(ExperimentConfig(seed=1), BEST, 200_000)
    assert abs(res.S - QUANTUM_MAX) < 5 * se


def test_eberhard_predictor_matches_analytic_form():
    from spincorr.analytic import eberhard_prob, eberhard_single

    e = EberhardPredictor(0.31, v=0.87)
    for a, b in np.random.default_rng(3).uniform(0, math.pi, (10, 2)):
        assert e.joint(a, b) == pytest.approx(eberhard_prob(a, b, 0.31, 0.87), abs=1e-15)
        assert e.single_left(a) == pytest.approx(eberhard_single(a, 0.31), abs=1e-15)
