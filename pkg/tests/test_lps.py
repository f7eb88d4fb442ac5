import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drheat.geometry import SpaceParams
from drheat.lps import (
    Flag, analytic_exponent, analytic_flag, global_lemma_bound, k_sigma, k_sigma_profile, lp_integral,
    profile_csv, sigma_threshold, spherical_asymptote, spherical_band, t_max,
)


def test_threshold_examples():
    assert sigma_threshold(1.0, 2) == 0.25
    assert sigma_threshold(3.0, 2) == pytest.approx(9 / 4)
    assert sigma_threshold(2.0, 4 / 3) == pytest.approx(sigma_threshold(2.0, 4)) == pytest.approx(3 * 4 / 16)
    with pytest.raises(ValueError):
        sigma_threshold(1.0, 1.0)


@given(Q=st.floats(0.5, 20), p=st.floats(1.01, 50))
def test_threshold_symmetric_and_maximal_at_two(Q, p):
    q = p / (p - 1)
    assert sigma_threshold(Q, p) == pytest.approx(sigma_threshold(Q, q), rel=1e-12)
    assert sigma_threshold(Q, p) <= Q * Q / 4 * (1 + 1e-12)


def test_analytic_sign_matches_threshold():
    for p in (1.2, 4 / 3, 1.7, 2.0):
        thr = sigma_threshold(1.0, p)
        assert analytic_exponent(1.0, p, 0.99 * thr) < 0 < analytic_exponent(1.0, p, 1.01 * thr)
        assert analytic_flag(1.0, p, 0.5 * thr) is Flag.CONVERGENT
    assert analytic_flag(1.0, 4.0, 0.8 * sigma_threshold(1.0, 4.0)) is Flag.CONVERGENT
    assert math.isinf(analytic_exponent(1.0, 2.0, 0.3))


def test_global_lemma_bound(h3):
    r = np.linspace(0, 10, 11)
    np.testing.assert_allclose(global_lemma_bound(h3, r, 0.0, 0.2), np.exp(-0.8 * r))
    np.testing.assert_allclose(global_lemma_bound(h3, r, 3 / 16, 0.25), np.exp(-3 * r / 8))
    assert np.all(np.diff(global_lemma_bound(h3, r, 0.1, 0.1)) < 0)
    with pytest.raises(ValueError):
        global_lemma_bound(h3, r, 0.24, 0.1)


def test_spherical_asymptote(h3):
    np.testing.assert_array_equal(spherical_asymptote(h3, 1.0, [0.0, 5.0]), [1.0, 1.0])
    assert spherical_asymptote(h3, 2.0, 0.0) == 1
    with pytest.raises(ValueError):
        spherical_asymptote(h3, 2.5, 1.0)


@pytest.mark.parametrize("p", [1.2, 1.5, 2.0])
def test_spherical_band(heis, p):
    rep = spherical_band(heis, p, np.linspace(1, 30, 200))
    assert 0 < rep.low and rep.band_ratio <= 20


def test_on_diagonal_blowup(h3):
    ev = k_sigma(h3, 0.0, 0.0, 0, "local")
    assert ev.divergent and math.isinf(ev.value)


def test_finite_maximal_value_is_stable(h3):
    ev = k_sigma(h3, 2.0, 0.0, 1)
    fine = k_sigma_profile(h3, [2.0], 0.0, 1, "full", per_decade=128)[0]
    assert not ev.divergent and math.isfinite(ev.value)
    assert abs(fine.value / ev.value - 1) < 0.01
    assert ev.piece == "full" and 0 < ev.t_star < t_max(2.0)


def test_piece_consistency(heis):
    rng = np.random.default_rng(4)
    for _ in range(20):
        r, sigma, i = rng.uniform(0.3, 8), rng.uniform(0, 0.8), int(rng.integers(0, 3))
        full = k_sigma(heis, r, sigma, i, "full")
        loc = k_sigma(heis, r, sigma, i, "local")
        glo = k_sigma(heis, r, sigma, i, "global")
        assert full.value == max(loc.value, glo.value)
        assert glo.t_star >= 1 and loc.t_star <= 1


def test_global_piece_decreasing_and_interior(h3):
    r = np.linspace(1, 20, 20)
    ev = k_sigma_profile(h3, r, 0.15, 0, "global")
    vals = np.array([e.value for e in ev])
    assert np.all(np.diff(vals) <= 0)
    assert all(e.t_star < t_max(e.r) and not e.divergent for e in ev)


def test_lemma_dominates_global_piece(h3):
    sigma, eps = h3.Q**2 / 8, 0.1

    def constant(n):
        r = np.linspace(0, 20, n)
        k = np.array([e.value for e in k_sigma_profile(h3, r, sigma, 0, "global")])
        return np.max(k / global_lemma_bound(h3, r, sigma, eps))

    c1, c2 = constant(21), constant(41)
    assert math.isfinite(c1) and abs(c2 / c1 - 1) < 0.05


def test_nondecaying_tail_is_divergent(h3):
    ev = k_sigma(h3, 3.0, 0.3, 0, "global")
    assert ev.divergent and math.isinf(ev.value)


def test_lp_probe_lemma_flags(h3):
    for p in (4 / 3, 1.6, 2.0):
        thr = sigma_threshold(h3.Q, p)
        assert lp_integral(h3, p, 0.5 * thr, integrand="lemma").flag == Flag.CONVERGENT.value
    assert lp_integral(h3, 4 / 3, 1.5 * sigma_threshold(h3.Q, 4 / 3), integrand="lemma").flag == "DIVERGENT"


def test_lp_probe_duality(h3):
    a = lp_integral(h3, 4.0, 0.1, integrand="lemma")
    b = lp_integral(h3, 4 / 3, 0.1, integrand="lemma")
    assert a.p == pytest.approx(4 / 3) and a.value == pytest.approx(b.value)


def test_lp_probe_oracle_report(h3):
    rep = lp_integral(h3, 2.0, 0.5 * sigma_threshold(h3.Q, 2.0), r_max=20.0)
    assert rep.flag == "CONVERGENT" == rep.analytic_flag
    doc = json.loads(rep.to_json())
    assert {"p", "sigma", "threshold", "flag", "partial_values", "t_star_profile"} <= set(doc)
    inner = rep.partial_values["5.0"]
    assert 0 < inner < math.inf


def test_profile_csv(h3):
    text = profile_csv(k_sigma_profile(h3, [1.0, 2.0], 0.1, 0, "global"))
    rows = text.strip().split("\n")
    assert rows[0] == "r,sigma,i,piece,value,t_star,divergent"
    assert len(rows) == 3 and rows[1].startswith("1,0.10000000000000001,0,global,")
