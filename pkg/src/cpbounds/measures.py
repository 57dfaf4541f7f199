"""Sparse finite signed measures on the lattice Z_+^d.

Atomic signed measures with finitely many atoms form a commutative Banach
algebra: addition and scaling are atomwise, multiplication is convolution
(weights accumulate at coordinate sums), the unit is the Dirac measure at
the origin, and the norm is total variation, tv_norm(V) = sum of |weight|.
The exponential exp(V) = sum_m V^m / m! converges for every V and turns
sums into convolution products, which is what makes compound Poisson laws
and their polynomial corrections cheap to build exactly.

Every measure carries ``trunc_budget``, a certified upper bound on the
total variation mass discarded by truncations (series tails, pruning)
anywhere in its history.  Budgets only grow:

* linear_combine: sum of |coefficient| * budget over the terms,
* convolve:       bV*||W|| + bW*||V|| + bV*bW,
* exp/series:     propagated budget plus a scalar factorial-tail bound.

Atom dicts are kept in ascending lexicographic key order (dict insertion
order), so norm and mass reductions are reproducible run to run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

import numpy as np

LatticePoint = tuple[int, ...]

DEFAULT_TOL = 1e-12

# Hard ceiling on predicted atom counts for exact distribution builds.
SUPPORT_CAP = 2_000_000

# Dense convolution windows larger than this fall back to the dict path.
_DENSE_CELL_LIMIT = 8_000_000
# Sparse workloads below this many weight products stay on the dict path.
_DENSE_MIN_PRODUCTS = 20_000

_SERIES_TERM_CAP = 100_000


class DimensionMismatchError(ValueError):
    """Operands live on lattices of different dimension."""


class SeriesDivergenceError(ValueError):
    """Power series shows no certifiable decay at the argument's norm."""


class ResourceCapError(RuntimeError):
    """Predicted support size exceeds the configured cap."""


def _validate_point(point, dim: int) -> LatticePoint:
    pt = tuple(point)
    if len(pt) != dim:
        raise DimensionMismatchError(f"point {pt!r} has {len(pt)} coordinates, measure dimension is {dim}")
    for c in pt:
        if not isinstance(c, int) or isinstance(c, bool) or c < 0:
            raise ValueError(f"lattice coordinates must be nonnegative integers, got {pt!r}")
    return pt


@dataclass(frozen=True, repr=False)
class SignedMeasure:
    """Finitely supported signed measure on Z_+^dim.

    ``atoms`` maps lattice points (tuples of nonnegative ints) to nonzero
    float weights; ``trunc_budget`` certifies all truncation loss to date.
    Instances are values: operations return new measures.
    """

    dim: int
    atoms: dict[LatticePoint, float] = field(default_factory=dict)
    trunc_budget: float = 0.0

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError("dimension must be >= 1")
        if self.trunc_budget < 0.0 or not math.isfinite(self.trunc_budget):
            raise ValueError("trunc_budget must be finite and >= 0")
        cleaned: dict[LatticePoint, float] = {}
        for point in sorted(self.atoms):
            w = float(self.atoms[point])
            if not math.isfinite(w):
                raise ValueError(f"non-finite weight at {point!r}")
            if w != 0.0:
                cleaned[_validate_point(point, self.dim)] = w
        object.__setattr__(self, "atoms", cleaned)

    def __repr__(self) -> str:
        return (f"SignedMeasure(dim={self.dim}, atoms={len(self.atoms)}, "
                f"tv={tv_norm(self):.6g}, budget={self.trunc_budget:.3g})")


def _unsafe(dim: int, atoms: dict[LatticePoint, float], budget: float) -> SignedMeasure:
    # Fast constructor for internal callers. atoms must already be in
    # ascending key order with nonzero finite weights.
    m = object.__new__(SignedMeasure)
    object.__setattr__(m, "dim", dim)
    object.__setattr__(m, "atoms", atoms)
    object.__setattr__(m, "trunc_budget", budget)
    return m


def dirac(point: Iterable[int]) -> SignedMeasure:
    """Unit point mass at ``point``; dimension is len(point)."""
    pt = tuple(point)
    return SignedMeasure(dim=len(pt), atoms={pt: 1.0})


def tv_norm(v: SignedMeasure) -> float:
    """Total variation norm: exactly rounded sum of |weight|."""
    return math.fsum(abs(w) for w in v.atoms.values())


def total_mass(v: SignedMeasure) -> float:
    """Signed total mass: exactly rounded sum of weights."""
    return math.fsum(v.atoms.values())


def linear_combine(terms: Iterable[tuple[float, SignedMeasure]]) -> SignedMeasure:
    """Atomwise sum of scaled measures; exact-zero results are dropped.

    Budget: sum of |coefficient| * term budget.
    """
    terms = list(terms)
    if not terms:
        raise ValueError("linear_combine needs at least one term")
    dim = terms[0][1].dim
    # Per-cell compensated sums: alternating-sign combinations (inclusion-
    # exclusion recursions) would otherwise lose digits to cancellation.
    acc: dict[LatticePoint, list[float]] = {}
    budget = 0.0
    for coef, meas in terms:
        if meas.dim != dim:
            raise DimensionMismatchError(f"mixed dimensions {dim} and {meas.dim}")
        c = float(coef)
        budget += abs(c) * meas.trunc_budget
        if c == 0.0:
            continue
        for point, w in meas.atoms.items():
            acc.setdefault(point, []).append(c * w)
    atoms = {}
    for p in sorted(acc):
        total = math.fsum(acc[p])
        if total != 0.0:
            atoms[p] = total
    return _unsafe(dim, atoms, budget)


def _support_box(v: SignedMeasure) -> tuple[tuple[int, ...], tuple[int, ...]]:
    keys = v.atoms.keys()
    lo = tuple(min(k[i] for k in keys) for i in range(v.dim))
    hi = tuple(max(k[i] for k in keys) for i in range(v.dim))
    return lo, hi


def _convolve_dict(v: SignedMeasure, w: SignedMeasure) -> dict[LatticePoint, float]:
    acc: dict[LatticePoint, float] = {}
    w_items = list(w.atoms.items())
    for x, vx in v.atoms.items():
        for y, wy in w_items:
            z = tuple(a + b for a, b in zip(x, y))
            acc[z] = acc.get(z, 0.0) + vx * wy
    return {p: acc[p] for p in sorted(acc) if acc[p] != 0.0}


def _convolve_dense(v: SignedMeasure, w: SignedMeasure) -> dict[LatticePoint, float]:
    # Accumulates into a dense window over the result bounding box.  Each
    # output cell receives contributions in ascending key order of v, the
    # same per-cell order as the dict path, so results are bit-identical.
    vlo, vhi = _support_box(v)
    wlo, whi = _support_box(w)
    wshape = tuple(h - l + 1 for l, h in zip(wlo, whi))
    oshape = tuple(vh - vl + wh - wl + 1 for vl, vh, wl, wh in zip(vlo, vhi, wlo, whi))
    wdense = np.zeros(wshape)
    wkeys = np.array(list(w.atoms.keys()), dtype=np.intp)
    wdense[tuple((wkeys - np.array(wlo, dtype=np.intp)).T)] = list(w.atoms.values())
    out = np.zeros(oshape)
    for x, vx in v.atoms.items():
        off = tuple(c - vl for c, vl in zip(x, vlo))
        window = tuple(slice(o, o + s) for o, s in zip(off, wshape))
        out[window] += vx * wdense
    origin = tuple(vl + wl for vl, wl in zip(vlo, wlo))
    idx = np.nonzero(out)
    weights = out[idx]
    atoms: dict[LatticePoint, float] = {}
    for row, wt in zip(np.transpose(idx).tolist(), weights.tolist()):
        atoms[tuple(c + o for c, o in zip(row, origin))] = wt
    return atoms


def convolve(v: SignedMeasure, w: SignedMeasure) -> SignedMeasure:
    """Convolution product: weights accumulate at coordinate sums.

    Budget: bV*||W|| + bW*||V|| + bV*bW.
    """
    if v.dim != w.dim:
        raise DimensionMismatchError(f"mixed dimensions {v.dim} and {w.dim}")
    budget = (v.trunc_budget * tv_norm(w) + w.trunc_budget * tv_norm(v)
              + v.trunc_budget * w.trunc_budget)
    if not v.atoms or not w.atoms:
        return _unsafe(v.dim, {}, budget)
    use_dense = False
    if len(v.atoms) * len(w.atoms) >= _DENSE_MIN_PRODUCTS:
        vlo, vhi = _support_box(v)
        wlo, whi = _support_box(w)
        volume = 1
        for vl, vh, wl, wh in zip(vlo, vhi, wlo, whi):
            volume *= vh - vl + wh - wl + 1
        use_dense = volume <= _DENSE_CELL_LIMIT
    atoms = _convolve_dense(v, w) if use_dense else _convolve_dict(v, w)
    return _unsafe(v.dim, atoms, budget)


def prune(v: SignedMeasure, eps: float) -> SignedMeasure:
    """Drop atoms with |weight| < eps; dropped mass joins the budget."""
    if eps < 0.0:
        raise ValueError("prune threshold must be >= 0")
    kept: dict[LatticePoint, float] = {}
    dropped = []
    for point, w in v.atoms.items():
        if abs(w) < eps:
            dropped.append(abs(w))
        else:
            kept[point] = w
    return _unsafe(v.dim, kept, v.trunc_budget + math.fsum(dropped))


@dataclass(frozen=True)
class SeriesSpec:
    """Power series sum_m coeff(m) * V^m applied to a measure.

    ``term_ratio(m, r)``, when given, must upper-bound the majorant term
    ratio t_{m+1}/t_m (t_m = |coeff(m)| r^m) for ALL indices >= m; it is
    what certifies the truncation tail.  Without it the tail is certified
    from observed ratios, which requires the majorant terms to be
    eventually decreasing (true for entire series such as exp).
    """

    name: str
    coeff: Callable[[int], float]
    term_ratio: Callable[[int, float], float] | None = None
    radius_note: str = ""


def exp_series() -> SeriesSpec:
    return SeriesSpec(
        name="exp",
        coeff=lambda m: 1.0 / math.factorial(m),
        term_ratio=lambda m, r: r / m if m > 0 else math.inf,
        radius_note="entire function, converges for every norm",
    )


def _exp_tail_bound(r: float, m_last: int) -> float:
    # sum_{m > m_last} r^m/m! <= t_{m_last+1} / (1 - r/(m_last+2)) once the
    # geometric ratio r/(m_last+2) drops below 1.
    q = r / (m_last + 2)
    if q >= 1.0:
        return math.inf
    log_t = (m_last + 1) * math.log(r) - math.lgamma(m_last + 2) if r > 0.0 else -math.inf
    return math.exp(log_t) / (1.0 - q) if log_t > -745.0 else 0.0


def exp_measure(v: SignedMeasure, tol: float = DEFAULT_TOL) -> SignedMeasure:
    """exp(V) = sum_m V^m/m!, truncated once the certified scalar tail
    sum_{m>M} r^m/m! (r = ||V|| + input budget) drops below ``tol``."""
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    r = tv_norm(v) + v.trunc_budget
    m_cut = 0
    while _exp_tail_bound(r, m_cut) > tol:
        m_cut += 1
    tail = _exp_tail_bound(r, m_cut)
    result = dirac((0,) * v.dim)
    power = result
    for m in range(1, m_cut + 1):
        power = convolve(power, v)
        result = linear_combine([(1.0, result), (1.0 / math.factorial(m), power)])
    return _unsafe(result.dim, result.atoms, result.trunc_budget + tail)


def _log_abs(x: float) -> float:
    return math.log(abs(x)) if x != 0.0 else -math.inf


def series_apply(series: SeriesSpec, v: SignedMeasure, tol: float = DEFAULT_TOL) -> SignedMeasure:
    """Apply ``series`` to ``v`` with a certified truncation tail <= tol.

    Rejects arguments at which the majorant terms show no certifiable
    decay (divergence at ||V||).  Tail certificates are computed in log
    space so that huge intermediate majorants cannot overflow.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    r = tv_norm(v) + v.trunc_budget
    a0 = float(series.coeff(0))
    result = linear_combine([(a0, dirac((0,) * v.dim))])
    if r == 0.0:
        return result
    if series.term_ratio is not None:
        # A tail is certifiable only past an index with contracting
        # majorant ratio.  Probe for one before any convolution work;
        # a constant ratio >= 1 (divergent argument) fails here.
        m_probe, horizon = 1, None
        while m_probe <= _SERIES_TERM_CAP:
            if series.term_ratio(m_probe, r) < 1.0:
                horizon = m_probe
                break
            m_probe *= 2
        if horizon is None:
            raise SeriesDivergenceError(
                f"series {series.name!r}: majorant ratio stays >= 1 through "
                f"{_SERIES_TERM_CAP} terms at norm {r:.3g}")
    log_r = math.log(r)
    log_tol = math.log(tol)
    power = dirac((0,) * v.dim)
    log_major_prev = _log_abs(a0)
    decreasing_run = 0
    m = 0
    while True:
        m += 1
        if m > _SERIES_TERM_CAP:
            raise SeriesDivergenceError(
                f"series {series.name!r}: no certified tail within {_SERIES_TERM_CAP} terms at norm {r:.3g}")
        power = convolve(power, v)
        a_m = float(series.coeff(m))
        if a_m != 0.0:
            result = linear_combine([(1.0, result), (a_m, power)])
        log_major = _log_abs(a_m) + m * log_r
        if series.term_ratio is not None:
            rho = series.term_ratio(m + 1, r)
            if rho < 1.0:
                log_tail = (_log_abs(float(series.coeff(m + 1)))
                            + (m + 1) * log_r - math.log1p(-rho))
                if log_tail <= log_tol:
                    tail = math.exp(log_tail)
                    return _unsafe(result.dim, result.atoms, result.trunc_budget + tail)
        else:
            if log_major < log_major_prev:
                decreasing_run = decreasing_run + 1 if log_major > -math.inf else decreasing_run
            elif log_major > -math.inf:
                decreasing_run = 0
            if decreasing_run >= 3 and log_major_prev > -math.inf:
                log_rho = log_major - log_major_prev
                log_tail = log_major + log_rho - math.log1p(-math.exp(log_rho))
                if log_tail <= log_tol:
                    tail = math.exp(log_tail)
                    return _unsafe(result.dim, result.atoms, result.trunc_budget + tail)
            if log_major == -math.inf and log_major_prev == -math.inf:
                return _unsafe(result.dim, result.atoms, result.trunc_budget)
        log_major_prev = log_major if log_major > -math.inf else log_major_prev
