"""Randomized and exhaustive self-verification suites.

Five named suites exercise the library against independent oracles:
subset enumeration against the power-sum recursion, brute-force
convolution paths against each other, certified series tails, and every
bound family against exactly computed distances on small instances.
Each suite is fully determined by its seed; reports carry per-property
trial and failure counts plus the first counterexample found, so a
failing run can be replayed directly.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import bounds as bounds_mod
from . import smoothness as smooth_mod
from .measures import (SignedMeasure, _convolve_dense, _convolve_dict,
                       convolve, dirac, exp_measure, linear_combine, prune,
                       tv_norm, total_mass)
from .model import (ModelSpec, corrected_approximation, exact_distribution,
                    exact_tv_many, factor_residuals, newton_elementary)
from .smoothness import (SmoothnessInstance, charlier, compensated_constants,
                         poisson_pmf, verify_orthogonality)

SUITE_NAMES = ("measure-algebra", "newton", "charlier", "lemmas",
               "bounds-vs-oracle")


@dataclass
class PropertyResult:
    name: str
    trials: int = 0
    failures: int = 0
    first_counterexample: dict | None = None

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def as_dict(self) -> dict:
        return {"name": self.name, "trials": self.trials,
                "failures": self.failures,
                "first_counterexample": self.first_counterexample}


@dataclass
class SuiteReport:
    suite: str
    seed: int
    properties: list[PropertyResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(p.passed for p in self.properties)

    def as_dict(self) -> dict:
        return {"suite": self.suite, "seed": self.seed, "passed": self.passed,
                "properties": [p.as_dict() for p in self.properties]}


class _Recorder:
    def __init__(self):
        self._order: list[str] = []
        self._props: dict[str, PropertyResult] = {}

    def record(self, name: str, ok: bool, counterexample: dict | None = None):
        if name not in self._props:
            self._props[name] = PropertyResult(name)
            self._order.append(name)
        prop = self._props[name]
        prop.trials += 1
        if not ok:
            prop.failures += 1
            if prop.first_counterexample is None:
                prop.first_counterexample = counterexample or {}

    def results(self) -> list[PropertyResult]:
        return [self._props[n] for n in self._order]


def _random_measure(rng: np.random.Generator, dim: int, n_atoms: int,
                    scale: float = 1.0) -> SignedMeasure:
    pts = rng.integers(0, 4, size=(n_atoms, dim))
    wts = rng.normal(0.0, scale, size=n_atoms)
    return linear_combine([(float(w), dirac(tuple(int(c) for c in p)))
                           for w, p in zip(wts, pts)])


def _random_model(rng: np.random.Generator, n_max: int = 8, d_max: int = 3,
                  p_hi: float = 0.35) -> ModelSpec:
    n = int(rng.integers(1, n_max + 1))
    d = int(rng.integers(1, d_max + 1))
    p = rng.uniform(0.02, p_hi, size=n)
    q = rng.uniform(0.05, 1.0, size=(n, d))
    q /= q.sum(axis=1, keepdims=True)
    return ModelSpec(p=p, q=q)


def _measure_diff_norm(a: SignedMeasure, b: SignedMeasure) -> float:
    return tv_norm(linear_combine([(1.0, a), (-1.0, b)]))


def _suite_measure_algebra(seed: int) -> SuiteReport:
    rng = np.random.default_rng(seed)
    rec = _Recorder()
    for trial in range(60):
        dim = int(rng.integers(1, 4))
        v = _random_measure(rng, dim, int(rng.integers(1, 7)))
        w = _random_measure(rng, dim, int(rng.integers(1, 7)))
        x = _random_measure(rng, dim, int(rng.integers(1, 5)))
        ctx = {"trial": trial, "dim": dim}
        scale = (1.0 + tv_norm(v)) * (1.0 + tv_norm(w)) * (1.0 + tv_norm(x))

        diff = _measure_diff_norm(convolve(v, w), convolve(w, v))
        rec.record("convolution_commutes", diff <= 1e-10 * scale,
                   {**ctx, "diff": diff})

        diff = _measure_diff_norm(convolve(convolve(v, w), x),
                                  convolve(v, convolve(w, x)))
        rec.record("convolution_associates", diff <= 1e-10 * scale,
                   {**ctx, "diff": diff})

        ident = convolve(v, dirac((0,) * dim))
        rec.record("dirac_identity", ident.atoms == v.atoms, ctx)

        a, b = float(rng.normal()), float(rng.normal())
        comb = linear_combine([(a, v), (b, w)])
        mass_err = abs(total_mass(comb) - (a * total_mass(v) + b * total_mass(w)))
        rec.record("mass_linear", mass_err <= 1e-12 * scale,
                   {**ctx, "mass_err": mass_err})
        tv_gap = tv_norm(comb) - (abs(a) * tv_norm(v) + abs(b) * tv_norm(w))
        rec.record("tv_triangle", tv_gap <= 1e-12 * scale,
                   {**ctx, "tv_gap": tv_gap})

        small_v = linear_combine([(0.3 / (1.0 + tv_norm(v)), v)])
        small_w = linear_combine([(0.3 / (1.0 + tv_norm(w)), w)])
        lhs = exp_measure(linear_combine([(1.0, small_v), (1.0, small_w)]))
        rhs = convolve(exp_measure(small_v), exp_measure(small_w))
        tol = lhs.trunc_budget + rhs.trunc_budget + 1e-11
        diff = _measure_diff_norm(lhs, rhs)
        rec.record("exp_additive", diff <= tol, {**ctx, "diff": diff, "tol": tol})

        rec.record("dense_dict_identical",
                   _convolve_dict(v, w) == _convolve_dense(v, w), ctx)

        pruned = prune(v, 0.05)
        budget_gain = pruned.trunc_budget - v.trunc_budget
        dropped = _measure_diff_norm(v, pruned)
        rec.record("prune_budgeted", dropped <= budget_gain + 1e-15,
                   {**ctx, "dropped": dropped, "budget_gain": budget_gain})
    return SuiteReport("measure-algebra", seed, rec.results())


def _subset_elementary(residuals: list[SignedMeasure], k: int,
                       dim: int) -> SignedMeasure:
    """Brute-force elementary symmetric convolution sum over k-subsets."""
    if k == 0:
        return dirac((0,) * dim)
    parts = []
    for combo in itertools.combinations(range(len(residuals)), k):
        prod = residuals[combo[0]]
        for idx in combo[1:]:
            prod = convolve(prod, residuals[idx])
        parts.append((1.0, prod))
    return linear_combine(parts)


def _suite_newton(seed: int) -> SuiteReport:
    rng = np.random.default_rng(seed)
    rec = _Recorder()
    for trial in range(30):
        # Firing probabilities capped at 0.2: the recursion-vs-enumeration
        # comparison is a correctness check, and beyond this cap the gap
        # between the two float routes is dominated by the conditioning of
        # the heavily cancelling elementary products, not by either
        # algorithm (certified against an exact-arithmetic oracle).
        spec = _random_model(rng, n_max=6, d_max=2, p_hi=0.2)
        residuals = factor_residuals(spec)
        for k in range(spec.n + 1):
            got = newton_elementary(spec, k)
            want = _subset_elementary(residuals, k, spec.d)
            scale = max(tv_norm(want), 1e-30)
            diff = _measure_diff_norm(got, want) / scale
            rec.record("newton_matches_subsets", diff <= 1e-10,
                       {"trial": trial, "n": spec.n, "d": spec.d, "k": k,
                        "rel_diff": diff})
    for trial in range(20):
        spec = _random_model(rng, n_max=4, d_max=2)
        full = corrected_approximation(spec, spec.n)
        exact = exact_distribution(spec)
        tol = full.trunc_budget + exact.trunc_budget + 1e-10
        diff = _measure_diff_norm(full, exact)
        rec.record("full_order_recovers_exact", diff <= tol,
                   {"trial": trial, "n": spec.n, "d": spec.d,
                    "diff": diff, "tol": tol})
        for ell in range(min(spec.n, 3) + 1):
            g = corrected_approximation(spec, ell)
            err = abs(total_mass(g) - 1.0)
            rec.record("correction_mass_one", err <= g.trunc_budget + 1e-12,
                       {"trial": trial, "ell": ell, "mass_err": err})
    return SuiteReport("newton", seed, rec.results())


def _suite_charlier(seed: int) -> SuiteReport:
    rec = _Recorder()
    for t in (0.5, 1.0, 2.0, 7.0):
        for i in range(6):
            for j in range(6):
                chk = verify_orthogonality(i, j, t)
                rec.record("orthogonality_certified", chk.ok,
                           {"i": i, "j": j, "t": t,
                            "residual": chk.residual,
                            "certificate": chk.certificate})

    def delta_po(j: int, m: int, t: float) -> float:
        if j == 0:
            return poisson_pmf(m, t) if m >= 0 else 0.0
        return delta_po(j - 1, m - 1, t) - delta_po(j - 1, m, t)

    for t in (0.5, 1.0, 2.0, 7.0):
        for j in range(6):
            for m in range(31):
                lhs = delta_po(j, m, t)
                rhs = poisson_pmf(m, t) * charlier(j, m, t) / t**j
                scale = poisson_pmf(m, t) * (m + t) ** j / t**j
                rec.record("difference_identity",
                           abs(lhs - rhs) <= 1e-11 * scale + 1e-300,
                           {"j": j, "m": m, "t": t, "lhs": lhs, "rhs": rhs})
    return SuiteReport("charlier", seed, rec.results())


def _random_smooth(rng: np.random.Generator, k: int, d: int,
                   signed: bool = True) -> SmoothnessInstance:
    rows = rng.uniform(-0.3, 0.3, size=(k, d))
    if not signed:
        rows = np.abs(rows)
    lam = rng.uniform(0.3, 4.0, size=d)
    return SmoothnessInstance(rows=rows, lam=lam)


def _suite_lemmas(seed: int) -> SuiteReport:
    rng = np.random.default_rng(seed)
    rec = _Recorder()

    for k in range(1, 13):
        f2k = math.factorial(2 * k)
        f2k1 = math.factorial(2 * k - 1)
        for m1 in range(k + 1):
            for m2 in range(k - m1 + 1):
                lhs = math.factorial(2 * m1 + m2) ** (2 * k)
                rhs = f2k ** (2 * m1) * f2k1 ** m2
                rec.record("factorial_split", lhs <= rhs,
                           {"k": k, "m1": m1, "m2": m2})
                if k == 1:
                    rec.record("factorial_split_tight_k1", lhs == rhs,
                               {"m1": m1, "m2": m2})

    cc = compensated_constants()
    rec.record("compensated_caps", cc.c <= 2.473 and cc.w0 <= 1.256,
               {"c": cc.c, "w0": cc.w0})

    for trial in range(200):
        k = int(rng.integers(1, 5))
        d = int(rng.integers(1, 4))
        inst = _random_smooth(rng, k, d, signed=True)
        exact, budget = smooth_mod.norm_product_exact(inst, squares=False)
        pair = smooth_mod.pair_symmetrized_bound(inst)
        rowf = smooth_mod.row_factored_bound(inst)
        slack = budget + 1e-10 * (1.0 + exact)
        ctx = {"trial": trial, "k": k, "d": d, "exact": exact,
               "pair": pair, "row_factored": rowf}
        rec.record("chain_exact_le_pair", exact <= pair + slack, ctx)
        rec.record("chain_pair_le_row", pair <= rowf + 1e-12 * (1.0 + rowf), ctx)

    for trial in range(200):
        k = int(rng.integers(1, 10))
        d = int(rng.integers(1, 4))
        inst = _random_smooth(rng, k, d, signed=False)
        exact, budget = smooth_mod.norm_product_exact(inst, squares=True)
        tab = smooth_mod.tabulated_bound(inst)
        rec.record("tabulated_dominates", exact <= tab + budget + 1e-10,
                   {"trial": trial, "k": k, "d": d, "exact": exact,
                    "tabulated": tab})
        if k <= 4:
            params = smooth_mod.SplitParams(
                u=np.full(k, smooth_mod.UV_TABLE[k][0]),
                v=np.full(k, smooth_mod.UV_TABLE[k][1]),
                w=np.full(k, 4.0))
            spl = smooth_mod.split_bound(inst, params)
            rec.record("split_dominates", exact <= spl + budget + 1e-10,
                       {"trial": trial, "k": k, "d": d, "exact": exact,
                        "split": spl})

    for trial in range(200):
        d = int(rng.integers(1, 4))
        row = rng.uniform(0.0, 0.2, size=(1, d))
        lam = row[0] + rng.uniform(0.05, 3.0, size=d)
        inst = SmoothnessInstance(rows=row, lam=lam)
        exact, budget = smooth_mod.compensated_residual_norm(inst)
        single = smooth_mod.single_factor_bound(inst)
        ctx = {"trial": trial, "d": d, "exact": exact, "single": single}
        ok = single is not None and exact <= single + budget + 1e-10
        rec.record("single_factor_dominates", ok, ctx)
        p_total = float(np.sum(row))
        display = 3.11 * float(np.sum(
            row[0] * np.minimum(row[0] / lam, p_total)))
        rec.record("single_factor_display", exact <= display + budget + 1e-10,
                   {**ctx, "display": display})
    return SuiteReport("lemmas", seed, rec.results())


def _suite_bounds_vs_oracle(seed: int) -> SuiteReport:
    rng = np.random.default_rng(seed)
    rec = _Recorder()
    for trial in range(200):
        spec = _random_model(rng, n_max=8, d_max=3)
        ells = [e for e in (0, 1, 2) if e <= spec.n]
        results = exact_tv_many(spec, ells, tol=1e-9)
        exact = {r.ell: r for r in results}
        ups = bounds_mod.upper_bounds(spec, lmax=2)
        for rep in ups:
            if not rep.applicable:
                continue
            target = exact[rep.ell] if rep.ell is not None else exact[0]
            ok = rep.value >= target.distance - target.error_bar
            rec.record(f"upper_{rep.name}", ok,
                       {"trial": trial, "n": spec.n, "d": spec.d,
                        "ell": rep.ell, "bound": rep.value,
                        "exact": target.distance,
                        "error_bar": target.error_bar})
        base = exact[0]
        for rep in bounds_mod.lower_bounds(spec):
            ok = rep.value <= base.distance + base.error_bar
            rec.record(f"lower_{rep.name}", ok,
                       {"trial": trial, "n": spec.n, "d": spec.d,
                        "bound": rep.value, "exact": base.distance,
                        "error_bar": base.error_bar})
    return SuiteReport("bounds-vs-oracle", seed, rec.results())


_SUITES = {
    "measure-algebra": _suite_measure_algebra,
    "newton": _suite_newton,
    "charlier": _suite_charlier,
    "lemmas": _suite_lemmas,
    "bounds-vs-oracle": _suite_bounds_vs_oracle,
}


def run_suite(name: str, seed: int = 0) -> SuiteReport:
    """Run one named suite; raises ValueError for unknown names."""
    if name not in _SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from "
                         + ", ".join(SUITE_NAMES))
    return _SUITES[name](seed)
