"""Distances between pointed spaces with blow-up reference measures.

All values here are computed at the identity embedding of the spaces into
the line, which realizes (and upper-bounds) the intrinsic infimum over
isometric embeddings; for subsets of R with the inherited metric this is the
canonical realization, so convergence verdicts are unaffected.  The
transport term between normalized cuts is solved exactly by LP after
rebinning both measures onto a common grid of `wc_grid_n` cells (aggregation
to a shared coarse grid, so the term vanishes when the cuts agree).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .cdcheck import DEFAULT_TOL, SuiteReport, cd_suite
from .errors import (
    InfiniteMass,
    InvalidParams,
    InvalidTestFunction,
    RegularityMismatch,
)
from .extreal import INF
from .geodesics1d import bin_blocks
from .measure import DiscreteMeasure
from .mmspace import (
    Grid1D,
    ModelSpec,
    PointedSpace1D,
    _singular_adjacent_cells,
    build_model_space,
    k_cut,
    space_from_dict,
    total_mass,
)
from .transport import CostSpec, wc_distance

DEFAULT_WC_GRID = 256


# ---------------------------------------------------------------------------
# Hausdorff distance with the empty-set conventions


def hausdorff_distance(A: Sequence[float], B: Sequence[float]) -> float:
    """Two-sided Hausdorff distance; d_H(empty, empty) = 0, else empty -> inf."""
    a = np.asarray(sorted(A), dtype=float)
    b = np.asarray(sorted(B), dtype=float)
    if a.size == 0 and b.size == 0:
        return 0.0
    if a.size == 0 or b.size == 0:
        return INF
    d = np.abs(a[:, None] - b[None, :])
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


# ---------------------------------------------------------------------------
# Finite-mass distance between cuts and the truncated series


def _normalized_cut_measure(space: PointedSpace1D) -> DiscreteMeasure:
    masses = space.cell_masses
    tot = float(np.sum(masses))
    return DiscreteMeasure(space.grid, masses / tot)


def _wc_between(muA: DiscreteMeasure, muB: DiscreteMeasure, cost: CostSpec,
                wc_grid_n: int) -> float:
    same = (muA.grid.n == muB.grid.n
            and np.array_equal(muA.grid.edges, muB.grid.edges))
    if not same or muA.grid.n > wc_grid_n:
        lo = min(muA.grid.a, muB.grid.a)
        hi = max(muA.grid.b, muB.grid.b)
        grid = Grid1D.uniform(lo, hi, wc_grid_n)

        def rebin(mu):
            s = mu.support
            return bin_blocks(mu.grid.edges[:-1][s], mu.grid.edges[1:][s],
                              mu.masses[s], grid, tol=1e-9)

        muA, muB = rebin(muA), rebin(muB)
    return wc_distance(muA, muB, cost=cost)


def _cost(c_kind) -> CostSpec:
    return c_kind if isinstance(c_kind, CostSpec) else CostSpec(str(c_kind))


def ikrw_fm(spaceA: PointedSpace1D, spaceB: PointedSpace1D,
            c_kind="tanh", wc_grid_n: int = DEFAULT_WC_GRID,
            return_terms: bool = False):
    """Finite-mass distance: log-mass gap + base-point gap + Hausdorff gap
    of the singular sets + transport gap of the normalized measures.

    Intended for k-cuts; spaces of infinite total mass are rejected.
    """
    mA, mB = total_mass(spaceA), total_mass(spaceB)
    if not (math.isfinite(mA) and math.isfinite(mB)):
        raise InfiniteMass("ikrw_fm needs finite total masses; cut first")
    if mA <= 0 or mB <= 0:
        raise InvalidParams("ikrw_fm needs positive total masses")
    terms = {
        "log_mass": abs(math.log(mA / mB)),
        "base_point": abs(spaceA.base_point - spaceB.base_point),
        "hausdorff": hausdorff_distance(spaceA.singular_points,
                                        spaceB.singular_points),
        "wc": _wc_between(_normalized_cut_measure(spaceA),
                          _normalized_cut_measure(spaceB),
                          _cost(c_kind), wc_grid_n),
    }
    value = INF if math.isinf(terms["hausdorff"]) else float(sum(terms.values()))
    return (value, terms) if return_terms else value


def ikrw(spaceA: PointedSpace1D, spaceB: PointedSpace1D, k_bar: int,
         k_max: int = 12, c_kind="tanh",
         wc_grid_n: int = DEFAULT_WC_GRID) -> tuple[float, float]:
    """Truncated series sum_{k=k_bar}^{k_max} 2^-k min(1, fm distance of the
    k-cuts), with the geometric tail bound 2^-k_max of the dropped terms."""
    if k_bar > k_max:
        raise InvalidParams("need k_bar <= k_max")
    value = 0.0
    for k in range(k_bar, k_max + 1):
        fm = ikrw_fm(k_cut(spaceA, k), k_cut(spaceB, k), c_kind=c_kind,
                     wc_grid_n=wc_grid_n)
        value += 2.0 ** (-k) * min(1.0, fm)
    return value, 2.0 ** (-k_max)


def extrinsic_gap(spaceA: PointedSpace1D, spaceB: PointedSpace1D, k: int,
                  c_kind="tanh", wc_grid_n: int = DEFAULT_WC_GRID) -> float:
    """Like the fm distance of the k-cuts but without the singular-set term."""
    cutA, cutB = k_cut(spaceA, k), k_cut(spaceB, k)
    mA, mB = total_mass(cutA), total_mass(cutB)
    return (abs(math.log(mA / mB))
            + abs(spaceA.base_point - spaceB.base_point)
            + _wc_between(_normalized_cut_measure(cutA),
                          _normalized_cut_measure(cutB),
                          _cost(c_kind), wc_grid_n))


# ---------------------------------------------------------------------------
# Weak convergence against cutoff test functions


@dataclass(frozen=True)
class PlateauBump:
    """Trapezoidal test function: 0 outside [a, b], 1 on the inner plateau."""

    a: float
    b: float
    ramp: float

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        up = (x - self.a) / self.ramp
        down = (self.b - x) / self.ramp
        return np.clip(np.minimum(up, down), 0.0, 1.0)

    @property
    def support(self) -> tuple[float, float]:
        return (self.a, self.b)


def make_test_family(lo: float, hi: float, singular_points: Sequence[float] = (),
                     count: int = 20, guard: Optional[float] = None) -> list:
    """Deterministic family of plateau bumps on [lo, hi] avoiding the
    guard-neighborhood of every singular point."""
    if not lo < hi:
        raise InvalidParams("need lo < hi")
    guard = 0.02 * (hi - lo) if guard is None else guard
    pieces = [(lo, hi)]
    for s in sorted(singular_points):
        nxt = []
        for a, b in pieces:
            if s - guard > a:
                nxt.append((a, min(b, s - guard)))
            if s + guard < b:
                nxt.append((max(a, s + guard), b))
        pieces = nxt
    pieces = [(a, b) for a, b in pieces if b - a > 4 * guard]
    if not pieces:
        raise InvalidParams("no room for test functions")
    fam = []
    for i in range(count):
        a, b = pieces[i % len(pieces)]
        u = (i // len(pieces) + 0.5) / max(1, (count + len(pieces) - 1) // len(pieces))
        width = (b - a) * (0.35 + 0.55 * u)
        left = a + ((b - a) - width) * u
        fam.append(PlateauBump(a=left, b=left + width, ramp=0.25 * width))
    return fam


def weak_convergence_gap(m_n: DiscreteMeasure, m_inf: DiscreteMeasure,
                         test_family: Sequence[Callable],
                         singular_points: Sequence[float] = (),
                         guard_radius: Optional[float] = None) -> float:
    """max over the family of | integral f dm_n - integral f dm_inf |.

    Every test function must vanish on the guard neighborhood of the
    declared singular set (default guard: two cells of the finer grid).
    """
    if guard_radius is None:
        guard_radius = 2.0 * min(float(np.min(m_n.grid.widths)),
                                 float(np.min(m_inf.grid.widths)))
    sing = np.asarray(list(singular_points), dtype=float)
    gap = 0.0
    for f in test_family:
        if sing.size:
            probes = (sing[:, None]
                      + np.linspace(-guard_radius, guard_radius, 33)[None, :])
            if np.any(np.abs(np.asarray(f(probes.ravel()))) > 1e-12):
                raise InvalidTestFunction(
                    "test function does not vanish near the singular set")
        va = float(np.sum(np.asarray(f(m_n.grid.centers)) * m_n.masses))
        vb = float(np.sum(np.asarray(f(m_inf.grid.centers)) * m_inf.masses))
        gap = max(gap, abs(va - vb))
    return gap


# ---------------------------------------------------------------------------
# Convergent families


def truncated_power_space(N: float, n: Optional[int], R: float = 2.0,
                          grid_n: int = 2048, base_point: float = 1.0,
                          regularity_k: int = 0) -> PointedSpace1D:
    """Density x^N on [2^-n, R] inside the ambient interval [0, R].

    n = None gives the limit space (density on all of (0, R], blow-up at 0).
    The finite-n members have no singular points; the truncation location is
    recorded as a cut anchor so their k-cuts avoid it the same way the
    limit's cuts avoid the genuine blow-up.
    """
    grid = Grid1D.uniform(0.0, R, grid_n)
    if n is None:
        spec = ModelSpec(kind="power_n", N=N, domain=(0.0, R), grid_n=grid_n,
                         base_point=base_point, regularity_k=regularity_k)
        return build_model_space(spec)
    thr = 2.0 ** (-n)

    def fn(x, _t=thr, _N=N):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        pos = x >= _t
        out[pos] = x[pos] ** _N
        return out

    density = fn(grid.centers)
    return PointedSpace1D(grid=grid, density=density, singular_points=(),
                          base_point=base_point, regularity_k=regularity_k,
                          cut_anchors=(thr,), density_fn=fn,
                          kind="truncated_power")


def glued_drift_space(n: Optional[int], K: float = -2.0, N: float = -2.0,
                      delta: float = 0.5, grid_n: int = 1024,
                      regularity_k: int = 0) -> PointedSpace1D:
    """Two cos-type arches glued at an interior blow-up point that drifts.

    The outer interval is [0, L] with L = 2 pi sqrt(N/K); the gluing point
    sits at s_n = L/2 + delta 2^-n (n = None: the limit, s = L/2, where both
    arches have the canonical length for the CD(K, N+1) claim).  The grid is
    non-uniform so that s_n is always an edge.
    """
    if not (K < 0 and N < 0):
        raise InvalidParams("glued_drift_space needs K < 0 and N < 0")
    L = 2.0 * math.pi * math.sqrt(N / K)
    s = L / 2.0 + (delta * 2.0 ** (-n) if n is not None else 0.0)
    if not 0.0 < s < L:
        raise InvalidParams("drift pushes the gluing point out of [0, L]")
    m = int(np.clip(round(grid_n * s / L), 8, grid_n - 8))
    edges = np.concatenate([np.linspace(0.0, s, m + 1),
                            np.linspace(s, L, grid_n - m + 1)[1:]])
    grid = Grid1D(edges)

    def fn(x, _s=s, _L=L, _N=N):
        x = np.asarray(x, dtype=float)
        left = x <= _s
        center = np.where(left, _s / 2.0, (_s + _L) / 2.0)
        half = np.where(left, _s / 2.0, (_L - _s) / 2.0)
        c = np.clip(np.cos(0.5 * math.pi * (x - center) / half), 0.0, None)
        with np.errstate(divide="ignore"):
            return c ** _N

    with np.errstate(divide="ignore"):
        density = fn(grid.centers)
    singular = (0.0, float(s), float(L))
    adj = _singular_adjacent_cells(grid, singular)
    density[adj] = INF
    return PointedSpace1D(grid=grid, density=density, singular_points=singular,
                          base_point=L / 4.0, regularity_k=regularity_k,
                          density_fn=fn, kind="glued_drift")


# ---------------------------------------------------------------------------
# Convergence experiments


@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    k: int
    log_mass_gap: float
    base_point_gap: float
    hausdorff_gap: float
    wc_gap: float
    total: float


@dataclass(frozen=True)
class ConvergenceTable:
    rows: tuple
    series: dict  # n -> truncated sum over the k range of 2^-k min(1, total)

    def column(self, name: str, k: int) -> list:
        return [getattr(r, name) for r in self.rows if r.k == k]

    def decreasing(self, name: str, k: int, slack: float = 1e-12) -> bool:
        vals = [v for v in self.column(name, k) if math.isfinite(v)]
        return all(b <= a + slack for a, b in zip(vals, vals[1:]))


def _family_members(sequence_spec: dict, n_range, limit_spec):
    family = sequence_spec.get("family")
    N = float(sequence_spec.get("N", -2.0))
    grid_n = int(sequence_spec.get("grid_n", 1024))
    if family == "truncated_power":
        make = lambda n: truncated_power_space(
            N, n, R=float(sequence_spec.get("R", 2.0)), grid_n=grid_n)
        spaces = [make(n) for n in n_range]
        limit = make(None)
        K = float(sequence_spec.get("K", 0.0))
    elif family == "glued_drift":
        K = float(sequence_spec.get("K", -2.0))
        make = lambda n: glued_drift_space(
            n, K=K, N=N, delta=float(sequence_spec.get("delta", 0.5)),
            grid_n=grid_n)
        spaces = [make(n) for n in n_range]
        limit = make(None)
    elif family == "custom_list":
        spaces = [space_from_dict(d) for d in sequence_spec["spaces"]]
        limit_d = limit_spec if limit_spec is not None else sequence_spec["limit"]
        limit = limit_d if isinstance(limit_d, PointedSpace1D) else space_from_dict(limit_d)
        K = float(sequence_spec.get("K", 0.0))
        n_range = list(range(len(spaces)))
    else:
        raise InvalidParams(f"unknown family {family!r}")
    return spaces, limit, K, N, list(n_range)


def convergence_experiment(sequence_spec: dict, limit_spec=None,
                           k_range=None, n_range=None, c_kind="tanh",
                           wc_grid_n: int = DEFAULT_WC_GRID,
                           run_cd: bool = True, cd_samples: int = 4,
                           seed: int = 0, tol: float = DEFAULT_TOL,
                           ) -> tuple[ConvergenceTable, Optional[SuiteReport]]:
    """Per-(n, k) gap table for a converging family, plus the limit CD run.

    The CD hook verifies the limit space against the family's claimed
    (K, N+1) on sampled marginal pairs.
    """
    if n_range is None:
        a, b = sequence_spec["n_range"]
        n_range = range(int(a), int(b) + 1)
    if k_range is None:
        a, b = sequence_spec.get("k_range", (0, 2))
        k_range = range(int(a), int(b) + 1)
    spaces, limit, K, N, ns = _family_members(sequence_spec, n_range, limit_spec)

    kbars = {s.regularity_k for s in spaces} | {limit.regularity_k}
    if len(kbars) != 1:
        raise RegularityMismatch(f"mixed regularity parameters {sorted(kbars)}")
    if min(k_range) < limit.regularity_k:
        raise RegularityMismatch("k range starts below the shared parameter")

    rows = []
    series: dict = {}
    for n, sp in zip(ns, spaces):
        acc = 0.0
        for k in k_range:
            cut_n, cut_l = k_cut(sp, k), k_cut(limit, k)
            _, terms = ikrw_fm(cut_n, cut_l, c_kind=c_kind,
                               wc_grid_n=wc_grid_n, return_terms=True)
            total = (INF if math.isinf(terms["hausdorff"])
                     else float(sum(terms.values())))
            rows.append(ConvergenceRow(
                n=int(n), k=int(k), log_mass_gap=terms["log_mass"],
                base_point_gap=terms["base_point"],
                hausdorff_gap=terms["hausdorff"], wc_gap=terms["wc"],
                total=total))
            acc += 2.0 ** (-k) * min(1.0, total)
        series[int(n)] = acc

    suite = None
    if run_cd:
        suite = cd_suite(limit, K, N + 1.0, cd_samples, seed, tol=tol)
    return ConvergenceTable(rows=tuple(rows), series=series), suite
