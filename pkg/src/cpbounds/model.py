"""Sums of independent multivariate Bernoulli factors on Z_+^d.

Factor j fires with probability p_j and, when it fires, puts a unit in
category r with probability q_(j,r).  The exact law of the sum is the
convolution F of the n factor measures.  Its compound Poisson
approximation is G_0 = exp(sum_j p_j (Q_j - delta_0)), the Poisson
product with intensities lam_r = sum_j p_j q_(j,r).  Writing each factor
as F_j = (delta_0 + V_j) e^(R_j) with R_j = p_j (Q_j - delta_0) defines
the per-factor residual V_j = F_j e^(-R_j) - delta_0, a signed measure of
norm O(p_j^2).  The order-ell corrected approximation is

    G_ell = (sum_{k<=ell} M_k) * G_0,

where M_k is the k-th elementary symmetric convolution sum of the V_j,
computed from power sums via the Newton recursion.  G_n recovers F
exactly, so ||F - G_ell|| is the tail of the correction series.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .measures import (
    DEFAULT_TOL,
    SUPPORT_CAP,
    ResourceCapError,
    SignedMeasure,
    convolve,
    dirac,
    exp_measure,
    linear_combine,
    total_mass,
    tv_norm,
    _support_box,
)
from .smoothness import poisson_product_measure

ROW_SUM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Validated model data: firing probabilities p (n,) and category
    matrix q (n, d) with rows summing to 1.  Zero p_j rows are allowed;
    zero total intensity in any category is a hard error because every
    intensity divides something downstream."""

    p: np.ndarray
    q: np.ndarray

    def __post_init__(self) -> None:
        p = np.asarray(self.p, dtype=float)
        q = np.asarray(self.q, dtype=float)
        if p.ndim != 1 or q.ndim != 2 or q.shape[0] != p.shape[0]:
            raise ValueError("p must be (n,), q must be (n, d)")
        if p.shape[0] < 1 or q.shape[1] < 1:
            raise ValueError("need n >= 1 factors and d >= 1 categories")
        if not np.all(np.isfinite(p)) or not np.all(np.isfinite(q)):
            raise ValueError("non-finite entries")
        if np.any(p < 0.0) or np.any(p > 1.0):
            raise ValueError("p entries must lie in [0, 1]")
        if np.any(q < 0.0) or np.any(q > 1.0):
            raise ValueError("q entries must lie in [0, 1]")
        row_err = np.abs(q.sum(axis=1) - 1.0)
        if np.any(row_err > ROW_SUM_TOL):
            bad = int(np.argmax(row_err))
            raise ValueError(f"q row {bad} sums to {q[bad].sum()!r}, must be 1 (tol {ROW_SUM_TOL})")
        lam_r = p @ q
        if np.any(lam_r <= 0.0):
            bad = int(np.argmin(lam_r))
            raise ValueError(f"category {bad} has zero total intensity")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "lam_r", lam_r)
        object.__setattr__(self, "lam", float(p.sum()))

    @property
    def n(self) -> int:
        return self.p.shape[0]

    @property
    def d(self) -> int:
        return self.q.shape[1]


@dataclass(frozen=True)
class ExactTvResult:
    """Exact distance ||F - G_ell|| with its certified error bar."""

    ell: int
    distance: float
    error_bar: float


def reference_example() -> ModelSpec:
    """Built-in 1000-factor, 1000-category model with slowly decaying
    cross-category weights: p_(j,r) = 1e-4 / (|j-r|^(1/2) + 0.1),
    p_j = sum_r p_(j,r), q_(j,r) = p_(j,r)/p_j."""
    idx = np.arange(1, 1001)
    pjr = 1e-4 / (np.sqrt(np.abs(idx[:, None] - idx[None, :])) + 0.1)
    p = pjr.sum(axis=1)
    return ModelSpec(p=p, q=pjr / p[:, None])


def _check_order(spec: ModelSpec, ell: int) -> int:
    if not isinstance(ell, int) or isinstance(ell, bool):
        raise ValueError("correction order must be an integer")
    if ell < 0 or ell > spec.n:
        raise ValueError(f"correction order {ell} outside [0, {spec.n}]")
    return ell


def factor(spec: ModelSpec, j: int) -> SignedMeasure:
    """F_j = delta_0 + p_j (Q_j - delta_0), the law of one factor."""
    d = spec.d
    atoms = {(0,) * d: 1.0 - float(spec.p[j])}
    for r in range(d):
        w = float(spec.p[j] * spec.q[j, r])
        if w != 0.0:
            point = [0] * d
            point[r] = 1
            atoms[tuple(point)] = w
    return SignedMeasure(d, atoms)


def _neg_residual_row(spec: ModelSpec, j: int) -> SignedMeasure:
    # -R_j = p_j delta_0 - sum_r p_j q_(j,r) delta_(e_r)
    d = spec.d
    atoms = {(0,) * d: float(spec.p[j])}
    for r in range(d):
        w = -float(spec.p[j] * spec.q[j, r])
        if w != 0.0:
            point = [0] * d
            point[r] = 1
            atoms[tuple(point)] = w
    return SignedMeasure(d, atoms)


def exact_distribution(spec: ModelSpec) -> SignedMeasure:
    """Exact convolution of all n factors.  Support lives on the simplex
    sum(x) <= n, so the predicted atom count is C(n+d, d); builds beyond
    the cap are refused."""
    predicted = math.comb(spec.n + spec.d, spec.d)
    if predicted > SUPPORT_CAP:
        raise ResourceCapError(
            f"exact support may hold {predicted} atoms, cap is {SUPPORT_CAP}")
    result = dirac((0,) * spec.d)
    for j in range(spec.n):
        result = convolve(result, factor(spec, j))
    return result


def compound_poisson(spec: ModelSpec, tol: float = DEFAULT_TOL) -> SignedMeasure:
    """G_0: Poisson product with intensities lam_r, window tails certified
    to a total budget <= tol."""
    return poisson_product_measure([float(t) for t in spec.lam_r], tol=tol)


def factor_residual(spec: ModelSpec, j: int, tol: float = DEFAULT_TOL) -> SignedMeasure:
    """V_j = F_j * exp(-R_j) - delta_0"""
    compensated = convolve(factor(spec, j), exp_measure(_neg_residual_row(spec, j), tol))
    return linear_combine([(1.0, compensated), (-1.0, dirac((0,) * spec.d))])


def factor_residuals(spec: ModelSpec, tol: float = DEFAULT_TOL) -> list[SignedMeasure]:
    return [factor_residual(spec, j, tol) for j in range(spec.n)]


def _measure_power(v: SignedMeasure, k: int) -> SignedMeasure:
    result = v
    for _ in range(k - 1):
        result = convolve(result, v)
    return result


def power_sum(spec: ModelSpec, k: int, tol: float = DEFAULT_TOL) -> SignedMeasure:
    """Gamma_k = sum_j V_j^k"""
    if k < 1:
        raise ValueError("power sum index must be >= 1")
    residuals = factor_residuals(spec, tol)
    return linear_combine([(1.0, _measure_power(v, k)) for v in residuals])


def _power_sums_from_residuals(residuals: list[SignedMeasure], k_max: int,
                               dim: int) -> list[SignedMeasure]:
    gammas = []
    powers = list(residuals)
    for k in range(1, k_max + 1):
        if k > 1:
            powers = [convolve(pw, v) for pw, v in zip(powers, residuals)]
        gammas.append(linear_combine([(1.0, pw) for pw in powers])
                      if powers else SignedMeasure(dim))
    return gammas


def _elementary_from_power_sums(gammas: list[SignedMeasure], k_max: int,
                                dim: int) -> list[SignedMeasure]:
    # Newton recursion M_k = (1/k) sum_{m=1..k} (-1)^(m-1) M_(k-m) Gamma_m
    elems = [dirac((0,) * dim)]
    for k in range(1, k_max + 1):
        terms = []
        for m in range(1, k + 1):
            sign = 1.0 if m % 2 == 1 else -1.0
            terms.append((sign / k, convolve(elems[k - m], gammas[m - 1])))
        elems.append(linear_combine(terms))
    return elems


def newton_elementary(spec: ModelSpec, k: int, tol: float = DEFAULT_TOL) -> SignedMeasure:
    """M_k, the k-th elementary symmetric convolution sum of the V_j,
    via the Newton power-sum recursion."""
    if k < 0 or k > spec.n:
        raise ValueError(f"elementary index {k} outside [0, {spec.n}]")
    if k == 0:
        return dirac((0,) * spec.d)
    residuals = factor_residuals(spec, tol)
    gammas = _power_sums_from_residuals(residuals, k, spec.d)
    return _elementary_from_power_sums(gammas, k, spec.d)[k]


def _convolve_small_first(a: SignedMeasure, b: SignedMeasure) -> SignedMeasure:
    return convolve(a, b) if len(a.atoms) <= len(b.atoms) else convolve(b, a)


def _guard_product_box(a: SignedMeasure, b: SignedMeasure) -> None:
    if not a.atoms or not b.atoms:
        return
    alo, ahi = _support_box(a)
    blo, bhi = _support_box(b)
    volume = 1
    for al, ah, bl, bh in zip(alo, ahi, blo, bhi):
        volume *= ah - al + bh - bl + 1
    if min(volume, len(a.atoms) * len(b.atoms)) > SUPPORT_CAP:
        raise ResourceCapError(
            f"correction convolution may hold {volume} atoms, cap is {SUPPORT_CAP}")


def corrected_approximation(spec: ModelSpec, ell: int,
                            tol: float = DEFAULT_TOL) -> SignedMeasure:
    """G_ell = (sum_{k<=ell} M_k) * G_0; carries every truncation budget."""
    _check_order(spec, ell)
    base = compound_poisson(spec, tol)
    if ell == 0:
        return base
    residuals = factor_residuals(spec, tol)
    gammas = _power_sums_from_residuals(residuals, ell, spec.d)
    elems = _elementary_from_power_sums(gammas, ell, spec.d)
    correction = linear_combine([(1.0, m) for m in elems])
    _guard_product_box(correction, base)
    return _convolve_small_first(correction, base)


def exact_tv(spec: ModelSpec, ell: int, tol: float = DEFAULT_TOL) -> ExactTvResult:
    """Full-norm distance ||F - G_ell|| with its certified error bar
    (the accumulated truncation budget of G_ell; F is exact)."""
    _check_order(spec, ell)
    diff = linear_combine([(1.0, exact_distribution(spec)),
                           (-1.0, corrected_approximation(spec, ell, tol))])
    return ExactTvResult(ell=ell, distance=tv_norm(diff), error_bar=diff.trunc_budget)


def exact_tv_many(spec: ModelSpec, ells: list[int],
                  tol: float = DEFAULT_TOL) -> list[ExactTvResult]:
    """exact_tv for several orders, sharing F, the residuals, and G_0."""
    orders = sorted({_check_order(spec, e) for e in ells})
    exact = exact_distribution(spec)
    base = compound_poisson(spec, tol)
    k_max = orders[-1]
    results: dict[int, ExactTvResult] = {}
    if k_max == 0:
        elems = [dirac((0,) * spec.d)]
    else:
        residuals = factor_residuals(spec, tol)
        gammas = _power_sums_from_residuals(residuals, k_max, spec.d)
        elems = _elementary_from_power_sums(gammas, k_max, spec.d)
    for ell in orders:
        correction = linear_combine([(1.0, m) for m in elems[:ell + 1]])
        _guard_product_box(correction, base)
        approx = _convolve_small_first(correction, base)
        diff = linear_combine([(1.0, exact), (-1.0, approx)])
        results[ell] = ExactTvResult(ell=ell, distance=tv_norm(diff),
                                     error_bar=diff.trunc_budget)
    return [results[_check_order(spec, e)] for e in ells]


def marginalize(v: SignedMeasure, coords) -> SignedMeasure:
    """Image measure of x -> sum of the selected coordinates (1-D)."""
    selected = sorted(set(int(c) for c in coords))
    if not selected:
        raise ValueError("need at least one coordinate")
    if selected[0] < 0 or selected[-1] >= v.dim:
        raise ValueError(f"coordinates must lie in [0, {v.dim})")
    acc: dict[tuple[int, ...], float] = {}
    for point, w in v.atoms.items():
        key = (sum(point[c] for c in selected),)
        acc[key] = acc.get(key, 0.0) + w
    atoms = {k: acc[k] for k in sorted(acc) if acc[k] != 0.0}
    return SignedMeasure(1, atoms, v.trunc_budget)
