"""Coefficient families, bound rows, and the order-constant machinery."""

import math

import numpy as np
import pytest

from cpbounds import (
    Coefficients,
    ModelSpec,
    ORDER_CAPS,
    coarse_geometric_coefficient,
    coarse_linear_coefficient,
    coefficients,
    geometric_coefficient,
    linear_coefficient,
    lower_bounds,
    order_constants,
    series_weight,
    upper_bounds,
)


def _model(rng, n, d, p_hi=0.3):
    p = rng.uniform(0.02, p_hi, size=n)
    q = rng.uniform(0.05, 1.0, size=(n, d))
    q /= q.sum(axis=1, keepdims=True)
    return ModelSpec(p=p, q=q)


def _weight_series_oracle(x, terms=80):
    # plain partial sum of 2 (k+1) x^k / (k+2)!, compensated
    return math.fsum(2.0 * (k + 1) / math.factorial(k + 2) * x**k
                     for k in range(terms))


def test_series_weight_against_partial_sums():
    for x in np.linspace(-1.5, 2.5, 41):
        got = series_weight(float(x))
        want = _weight_series_oracle(float(x))
        assert got == pytest.approx(want, rel=1e-13, abs=1e-15), x


def test_series_weight_branch_seam():
    # closed form above 1/2, series below; both must agree around the cut
    for x in np.linspace(0.4, 0.6, 21):
        got = series_weight(float(x))
        want = _weight_series_oracle(float(x))
        assert got == pytest.approx(want, rel=1e-14), x


def test_series_weight_special_values():
    assert series_weight(0.0) == pytest.approx(1.0, abs=1e-16)
    assert series_weight(2.0) == pytest.approx((1.0 + math.e**2) / 2.0, rel=1e-15)
    arr = series_weight(np.array([0.0, 2.0, -0.3]))
    assert arr.shape == (3,)
    assert arr[1] == pytest.approx((1.0 + math.e**2) / 2.0, rel=1e-15)
    for x in (0.0, 0.1, 1.0, 3.0):
        g = series_weight(x)
        assert 1.0 <= g <= math.exp(x) + 1e-15


def test_equal_rows_reduce_to_single_category():
    # all rows identical over one category: the refined and coarse
    # linear coefficients coincide at sum p^2 min{1/lam, 1}
    rng = np.random.default_rng(21)
    p = rng.uniform(0.02, 0.4, size=7)
    spec = ModelSpec(p=p, q=np.ones((7, 1)))
    lam = float(p.sum())
    want_lin = math.fsum(p**2) * min(1.0 / lam, 1.0)
    assert linear_coefficient(spec) == pytest.approx(want_lin, rel=1e-13)
    assert coarse_linear_coefficient(spec) == pytest.approx(want_lin, rel=1e-13)
    want_geo = math.fsum(series_weight(2.0 * p) * p**2) * min(
        1.0 / (2.0**1.5 * lam), 2.0)
    assert geometric_coefficient(spec) == pytest.approx(want_geo, rel=1e-13)


def test_refined_never_exceeds_coarse_linear():
    rng = np.random.default_rng(22)
    for _ in range(100):
        spec = _model(rng, int(rng.integers(1, 9)), int(rng.integers(1, 4)),
                      p_hi=0.9)
        b1 = linear_coefficient(spec)
        b0 = coarse_linear_coefficient(spec)
        assert b1 <= b0 * (1.0 + 1e-13)
        # geometric caps differ (2 inside vs 1 outside), so only the
        # factor-2 comparison is structural
        a1 = geometric_coefficient(spec)
        a0 = coarse_geometric_coefficient(spec)
        assert a1 <= 2.0 * a0 * (1.0 + 1e-13)


def test_coefficients_bundle_consistency():
    rng = np.random.default_rng(23)
    spec = _model(rng, 6, 2)
    co = coefficients(spec)
    assert isinstance(co, Coefficients)
    assert co.geometric == geometric_coefficient(spec)
    assert co.linear == linear_coefficient(spec)
    assert co.lam == pytest.approx(float(spec.p.sum()), rel=1e-15)
    assert co.sum_p_sq == pytest.approx(float((spec.p**2).sum()), rel=1e-13)
    assert co.theta == pytest.approx(co.sum_p_sq / co.lam, rel=1e-15)
    assert co.max_p == float(spec.p.max())


def test_parallel_reduction_close_to_sequential():
    spec = ModelSpec(p=np.linspace(0.001, 0.01, 300),
                     q=np.tile([0.25, 0.75], (300, 1)))
    seq = coefficients(spec, parallel=False)
    par = coefficients(spec, parallel=True)
    for name in ("geometric", "linear", "coarse_geometric", "coarse_linear",
                 "sum_p_sq"):
        a, b = getattr(seq, name), getattr(par, name)
        assert a == pytest.approx(b, rel=1e-12), name


def test_order_constants_monotone_and_capped():
    prev_x, prev_c = 0.0, 0.0
    for ell in range(5):
        oc = order_constants(ell)
        assert oc.crossover > prev_x
        assert oc.coefficient > prev_c
        assert oc.coefficient <= ORDER_CAPS[ell]
        prev_x, prev_c = oc.crossover, oc.coefficient
    with pytest.raises(ValueError):
        order_constants(-1)


def test_order_zero_rows_match_first_order_families():
    # ell = 0 order rows must collapse to the plain refined bounds
    rng = np.random.default_rng(24)
    spec = _model(rng, 5, 2, p_hi=0.1)
    rows = {(r.name, r.ell): r for r in upper_bounds(spec, lmax=0)}
    refined_geo = rows[("refined_geometric", None)].value
    refined_lin = rows[("refined_linear", None)].value
    assert rows[("order_geometric", 0)].value == pytest.approx(refined_geo, rel=1e-12)
    assert rows[("order_linear", 0)].value == pytest.approx(refined_lin, rel=1e-12)


def test_gating_large_coefficients():
    # hot model: p near 1, one category; every gated row must turn off
    spec = ModelSpec(p=np.array([0.9, 0.9]), q=np.ones((2, 1)))
    rows = {(r.name, r.ell): r for r in upper_bounds(spec, lmax=1)}
    for key in (("refined_geometric", None), ("coarse_geometric", None),
                ("magic_factor", None), ("order_geometric", 0),
                ("order_geometric", 1)):
        rep = rows[key]
        assert not rep.applicable, key
        assert rep.value is None, key
    # ungated rows still report numbers
    for key in (("lecam", None), ("stein_log", None), ("coarse_linear", None),
                ("refined_linear", None), ("order_linear", 1)):
        assert rows[key].value is not None, key


def test_order_rows_beyond_factor_count_are_flagged():
    spec = ModelSpec(p=np.array([0.1]), q=np.array([[1.0]]))
    rows = {(r.name, r.ell): r for r in upper_bounds(spec, lmax=3)}
    for ell in (2, 3):
        for name in ("order_geometric", "order_linear", "order_linear_tight"):
            rep = rows[(name, ell)]
            assert not rep.applicable
            assert rep.value is None
            assert "factor count" in rep.condition
    assert rows[("order_linear", 1)].applicable


def test_d1_only_rows():
    rng = np.random.default_rng(25)
    d1 = _model(rng, 5, 1, p_hi=0.1)
    d2 = _model(rng, 5, 2, p_hi=0.1)
    rows1 = {r.name: r for r in upper_bounds(d1, lmax=0)}
    rows2 = {r.name: r for r in upper_bounds(d2, lmax=0)}
    co = coefficients(d1)
    want = 2.0 * (1.0 - math.exp(-co.lam)) / co.lam * co.sum_p_sq
    assert rows1["binomial_poisson_d1"].value == pytest.approx(want, rel=1e-13)
    assert rows1["theta_sharp_d1"].applicable == (co.theta < 1.0)
    assert not rows2["binomial_poisson_d1"].applicable
    assert not rows2["theta_sharp_d1"].applicable
    assert rows2["binomial_poisson_d1"].value is None


def test_order_linear_published_vs_tight():
    # published caps round the recomputed constants up, so the tight
    # row can only improve on the published row
    rng = np.random.default_rng(26)
    spec = _model(rng, 6, 2, p_hi=0.1)
    rows = {(r.name, r.ell): r for r in upper_bounds(spec, lmax=4)}
    for ell in range(5):
        pub = rows[("order_linear", ell)]
        tight = rows[("order_linear_tight", ell)]
        assert pub.source == "published constant"
        assert tight.source == "recomputed constant"
        assert tight.value <= pub.value
        assert tight.value >= 0.99 * pub.value


def test_lower_bounds_structure():
    rng = np.random.default_rng(27)
    spec = _model(rng, 5, 3)
    lows = lower_bounds(spec)
    assert [r.name for r in lows] == ["lower_total", "lower_coordinate"]
    for r in lows:
        assert r.kind == "lower"
        assert r.applicable and r.value > 0.0
    co = coefficients(spec)
    want_total = min(1.0 / co.lam, 1.0) * co.sum_p_sq / 7.0
    assert lows[0].value == pytest.approx(want_total, rel=1e-13)
    # the per-category row picks the best coordinate
    lam_r = spec.p @ spec.q
    per = [min(1.0 / lam_r[r], 1.0) / 7.0
           * float(np.sum(spec.p**2 * spec.q[:, r] ** 2))
           for r in range(spec.d)]
    assert lows[1].value == pytest.approx(max(per), rel=1e-12)
    assert f"r={int(np.argmax(per))}" in lows[1].condition


def test_report_serialization():
    spec = ModelSpec(p=np.array([0.1]), q=np.array([[1.0]]))
    rep = upper_bounds(spec, lmax=0)[0]
    d = rep.as_dict()
    assert set(d) == {"name", "kind", "value", "applicable", "condition",
                      "ell", "source"}
    with pytest.raises(ValueError):
        upper_bounds(spec, lmax=-1)
