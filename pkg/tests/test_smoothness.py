"""Poisson smoothing toolbox: pmf windows, Charlier polynomials,
factorial constants, and the product-norm bound ladder.

The Charlier oracle is exact rational arithmetic built from the shift
expansion of the backward difference, independent of the recurrence
used in the implementation.
"""

import math
from fractions import Fraction

import numpy as np
import pytest

from cpbounds import (
    PUBLISHED_DK,
    ResourceCapError,
    SmoothnessInstance,
    SplitParams,
    charlier,
    compensated_constants,
    compensated_residual_norm,
    convolve,
    dirac,
    exp_measure,
    linear_combine,
    norm_bounds,
    norm_product_exact,
    poisson_pmf,
    poisson_product_measure,
    tabulated_constant,
    total_mass,
    tv_norm,
    verify_orthogonality,
)
from cpbounds.smoothness import (
    UV_TABLE,
    depletion_integral,
    even_factorial_root,
    odd_factorial_root,
    pair_symmetrized_bound,
    published_dk,
    row_factored_bound,
    split_bound,
    split_constant,
    tabulated_bound,
    truncated_poisson,
)


def test_poisson_pmf_closed_form():
    for t in (0.3, 1.0, 4.5, 20.0):
        for m in (0, 1, 2, 7, 30):
            want = math.exp(-t) * t**m / math.factorial(m)
            assert poisson_pmf(m, t) == pytest.approx(want, rel=1e-13)


def test_truncated_poisson_window():
    weights, tail = truncated_poisson(3.0, tail_tol=1e-10)
    assert tail <= 1e-10
    assert math.fsum(weights) == pytest.approx(1.0, abs=2e-10)
    for m, w in enumerate(weights):
        assert w == pytest.approx(poisson_pmf(m, 3.0), rel=1e-13)


def test_poisson_product_equals_exponential_of_steps():
    lams = (0.7, 1.9)
    prod = poisson_product_measure(lams, tol=1e-13)
    step = linear_combine([
        (lams[0], dirac((1, 0))), (lams[1], dirac((0, 1))),
        (-(lams[0] + lams[1]), dirac((0, 0))),
    ])
    want = exp_measure(step, tol=1e-13)
    gap = tv_norm(linear_combine([(1.0, prod), (-1.0, want)]))
    assert gap <= prod.trunc_budget + want.trunc_budget + 1e-12
    assert abs(total_mass(prod) - 1.0) <= prod.trunc_budget
    assert prod.trunc_budget <= 1e-13


def _charlier_oracle(j: int, m: int, t: Fraction) -> Fraction:
    # backward difference as a shift-operator power:
    # Ch(j, m, t) = sum_k C(j,k) (-1)^(j-k) m!/(m-k)! t^(j-k)
    total = Fraction(0)
    for k in range(j + 1):
        if k > m:
            break
        fall = 1
        for i in range(k):
            fall *= m - i
        total += math.comb(j, k) * (-1) ** (j - k) * fall * t ** (j - k)
    return total


def test_charlier_against_rational_oracle():
    for t in (Fraction(1, 2), Fraction(2), Fraction(7), Fraction(13, 4)):
        for j in range(7):
            for m in (0, 1, 2, 3, 5, 11, 25):
                want = _charlier_oracle(j, m, t)
                got = charlier(j, m, float(t))
                if want == 0:
                    assert abs(got) <= 1e-9 * (m + float(t)) ** j
                else:
                    assert got == pytest.approx(float(want), rel=1e-11)


def test_charlier_first_two_degrees():
    assert charlier(0, 5, 2.0) == 1.0
    for m in range(6):
        assert charlier(1, m, 2.0) == pytest.approx(m - 2.0, abs=1e-14)


def test_orthogonality_certified_spot_checks():
    for t in (0.5, 2.0, 7.0):
        for i in range(5):
            for j in range(i, 5):
                chk = verify_orthogonality(i, j, t)
                assert chk.ok, (i, j, t, chk.residual, chk.certificate)
                assert chk.residual <= chk.certificate
                if i == j:
                    assert chk.target == pytest.approx(
                        math.factorial(i) * t**i, rel=1e-15)
                else:
                    assert chk.target == 0.0


def test_factorial_inequality_small_exact():
    # ((2 m1 + m2)!)^(2k) <= ((2k)!)^(2 m1) ((2k-1)!)^m2 over the simplex
    # m1 + m2 <= k, in exact integer arithmetic
    for k in range(1, 7):
        for m1 in range(k + 1):
            for m2 in range(k - m1 + 1):
                lhs = math.factorial(2 * m1 + m2) ** (2 * k)
                rhs = (math.factorial(2 * k) ** (2 * m1)
                       * math.factorial(2 * k - 1) ** m2)
                assert lhs <= rhs, (k, m1, m2)
                if k == 1:
                    assert lhs == rhs
    # strictness appears as soon as the split is uneven
    assert math.factorial(2) ** 4 < math.factorial(4) ** 2


def test_factorial_roots():
    assert even_factorial_root(3) == pytest.approx(720.0 ** (1.0 / 6.0), rel=1e-14)
    assert odd_factorial_root(3) == pytest.approx(120.0 ** (1.0 / 12.0), rel=1e-14)


def test_split_constant_formula():
    k, u, v, w = 2, 0.4, 0.9, 4.0
    ck = 24.0 ** 0.25
    ckp = 6.0 ** 0.125
    want = max(ck + ckp * u / v, (2.0 * (1.0 - u) + ckp * u * v) * w)
    assert split_constant(k, u, v, w) == pytest.approx(want, rel=1e-14)


def test_tabulated_constant_published_and_closed_form():
    for k in range(1, 10):
        assert abs(tabulated_constant(k) - PUBLISHED_DK[k]) <= 1e-3
        assert published_dk(k) == PUBLISHED_DK[k]
    # k >= 10: exactly sqrt(binomial(2k, k)) since (2k)!/(k!)^2 = C(2k,k)
    for k in (10, 12, 20):
        want = math.sqrt(math.comb(2 * k, k))
        assert tabulated_constant(k) == pytest.approx(want, rel=1e-12)
        assert published_dk(k) == pytest.approx(want, rel=1e-12)
    # branch jump is upward, so both branches stay valid caps
    assert tabulated_constant(10) > tabulated_constant(9)
    with pytest.raises(ValueError):
        tabulated_constant(0)


def test_depletion_integral_against_quadrature():
    ts = (np.arange(1_000_000) + 0.5) / 1_000_000
    for x in (1.2, 1.5, 2.0, 10.0, 1e3):
        want = float(np.mean(ts / (x - ts)))
        assert depletion_integral(x) == pytest.approx(want, rel=1e-9, abs=1e-12)
    with pytest.raises(ValueError):
        depletion_integral(1.0)
    assert depletion_integral(1.0001) > depletion_integral(1.001)


def test_compensated_constants_solve_their_equation():
    cc = compensated_constants()
    assert depletion_integral(cc.w0) == pytest.approx(1.0, abs=1e-11)
    assert cc.c <= 2.473
    assert cc.w0 <= 1.256
    assert cc.coefficient <= 3.11  # the published display constant
    with pytest.raises(ValueError):
        compensated_constants(u=0.7)
    with pytest.raises(ValueError):
        compensated_constants(w=-1.0)


def test_instance_validation():
    with pytest.raises(ValueError):
        SmoothnessInstance(rows=np.ones((1, 2)), lam=np.array([1.0]))
    with pytest.raises(ValueError):
        SmoothnessInstance(rows=np.ones((1, 1)), lam=np.array([0.0]))
    with pytest.raises(ValueError):
        SplitParams(u=np.array([0.6]), v=np.array([1.0]), w=np.array([1.0]))


def test_single_row_chain_closed_form():
    # one row, no squares: both intermediate bounds collapse to
    # sqrt(sum p_r^2 / lam_r) and must dominate the exact norm
    inst = SmoothnessInstance(rows=np.array([[0.12, -0.05]]),
                              lam=np.array([0.8, 1.6]))
    want = math.sqrt(0.12**2 / 0.8 + 0.05**2 / 1.6)
    assert pair_symmetrized_bound(inst) == pytest.approx(want, rel=1e-13)
    assert row_factored_bound(inst) == pytest.approx(want, rel=1e-13)
    exact, budget = norm_product_exact(inst, squares=False)
    assert exact <= want + budget + 1e-12


def test_bound_ladder_on_seeded_instances():
    rng = np.random.default_rng(31)
    for _ in range(25):
        k = int(rng.integers(1, 4))
        d = int(rng.integers(1, 3))
        rows = rng.uniform(-0.25, 0.25, size=(k, d))
        inst = SmoothnessInstance(rows=rows, lam=rng.uniform(0.5, 3.0, size=d))
        exact, budget = norm_product_exact(inst, squares=False)
        pair = pair_symmetrized_bound(inst)
        rowf = row_factored_bound(inst)
        assert exact <= pair + budget + 1e-10
        assert pair <= rowf * (1.0 + 1e-12)


def test_squared_ladder_and_split_params():
    rng = np.random.default_rng(32)
    for _ in range(15):
        k = int(rng.integers(1, 4))
        d = int(rng.integers(1, 3))
        rows = np.abs(rng.uniform(-0.25, 0.25, size=(k, d)))
        inst = SmoothnessInstance(rows=rows, lam=rng.uniform(0.5, 3.0, size=d))
        exact, budget = norm_product_exact(inst, squares=True)
        params = SplitParams(u=np.full(k, UV_TABLE[k][0]),
                             v=np.full(k, UV_TABLE[k][1]),
                             w=np.full(k, 4.0))
        spl = split_bound(inst, params)
        tab = tabulated_bound(inst)
        assert exact <= spl + budget + 1e-10
        assert exact <= tab + budget + 1e-10
    with pytest.raises(ValueError):
        split_bound(inst, SplitParams(u=np.zeros(k + 1), v=np.ones(k + 1),
                                      w=np.ones(k + 1)))


def test_pair_form_cap():
    inst = SmoothnessInstance(rows=np.full((7, 1), 0.1),
                              lam=np.array([1.0]))
    with pytest.raises(ResourceCapError):
        pair_symmetrized_bound(inst)
    nb = norm_bounds(inst)
    assert nb.pair_symmetrized is None
    assert nb.row_factored > 0.0
    assert nb.split is None  # no params given
    assert nb.single_factor is None  # k != 1


def test_single_factor_preconditions():
    lam = np.array([1.0, 1.0])
    good = SmoothnessInstance(rows=np.array([[0.2, 0.3]]), lam=lam)
    assert norm_bounds(good).single_factor > 0.0
    signed = SmoothnessInstance(rows=np.array([[0.2, -0.1]]), lam=lam)
    assert norm_bounds(signed).single_factor is None
    heavy = SmoothnessInstance(rows=np.array([[0.8, 0.9]]), lam=lam)
    assert norm_bounds(heavy).single_factor is None  # row sum > 1
    tall = SmoothnessInstance(rows=np.array([[0.2, 0.3]]),
                              lam=np.array([0.1, 1.0]))
    assert norm_bounds(tall).single_factor is None  # lam_r < p_r


def test_compensated_residual_dominated():
    rng = np.random.default_rng(33)
    for _ in range(20):
        d = int(rng.integers(1, 4))
        row = rng.uniform(0.0, 0.2, size=(1, d))
        lam = row[0] + rng.uniform(0.05, 2.0, size=d)
        inst = SmoothnessInstance(rows=row, lam=lam)
        exact, budget = compensated_residual_norm(inst)
        bound = norm_bounds(inst).single_factor
        assert bound is not None
        assert exact <= bound + budget + 1e-10
    with pytest.raises(ValueError):
        compensated_residual_norm(SmoothnessInstance(
            rows=np.full((2, 1), 0.1), lam=np.array([1.0])))
