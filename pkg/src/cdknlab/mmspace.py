"""Discretized 1-D pointed metric measure spaces with blow-up reference measures.

A space is a uniform-in-spirit (strictly increasing) cell grid over a bounded
interval, a nonnegative cell density sampled at cell midpoints, a finite set
of singular points where every neighborhood carries infinite mass, a marked
cut-anchor set used by the k-cut construction (equal to the singular set for
canonical spaces), a base point, and a regularity parameter k_bar such that
every k-cut with k >= k_bar has positive finite mass.

Cells whose edge touches a true singular point store density +inf: their raw
mass is infinite, and every k-cut annihilates them exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate

from .errors import (
    EmptyCut,
    InvalidParams,
    NotRefinable,
    SingularPointOffGrid,
)

_EDGE_TOL = 1e-9


def f_cut(x):
    """Plateau cut-off: 1 on [0,1], linear down to 0 on [1,2], 0 beyond."""
    x = np.asarray(x, dtype=float)
    out = np.minimum(1.0, np.maximum(0.0, 2.0 - x))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class Grid1D:
    """Strictly increasing cell edges over a bounded interval."""

    edges: np.ndarray

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=float)
        if edges.ndim != 1 or edges.size < 3:
            raise InvalidParams("grid needs at least 2 cells")
        if not np.all(np.diff(edges) > 0):
            raise InvalidParams("grid edges must be strictly increasing")
        object.__setattr__(self, "edges", edges)

    @classmethod
    def uniform(cls, a: float, b: float, n: int) -> "Grid1D":
        if not (math.isfinite(a) and math.isfinite(b) and a < b):
            raise InvalidParams(f"bad interval [{a}, {b}]")
        if n < 2:
            raise InvalidParams("need at least 2 cells")
        return cls(np.linspace(a, b, n + 1))

    @property
    def n(self) -> int:
        return self.edges.size - 1

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def a(self) -> float:
        return float(self.edges[0])

    @property
    def b(self) -> float:
        return float(self.edges[-1])

    def locate(self, x) -> np.ndarray:
        """Cell index containing x (right-open cells, last cell closed)."""
        idx = np.searchsorted(self.edges, np.asarray(x, dtype=float), side="right") - 1
        return np.clip(idx, 0, self.n - 1)


MODEL_KINDS = (
    "cosh_n",
    "sinh_n",
    "power_n",
    "cos_n",
    "glued_cos_n",
    "glued_power_n",
    "glued_sinh_n",
    "cauchy",
    "custom_psi",
)

_UNBOUNDED = {
    "cosh_n": (-math.inf, math.inf),
    "sinh_n": (0.0, math.inf),
    "power_n": (0.0, math.inf),
    "glued_power_n": (-math.inf, math.inf),
    "glued_sinh_n": (-math.inf, math.inf),
    "cauchy": (-math.inf, math.inf),
}


@dataclass(frozen=True)
class ModelSpec:
    """Parameters describing an analytic model space before discretization."""

    kind: str
    K: float = 0.0
    N: float = -2.0
    alpha: float = 1.0
    J: int = 2
    domain: Optional[tuple] = None
    grid_n: int = 512
    base_point: Optional[float] = None
    regularity_k: int = 0
    psi_samples: Optional[Sequence[float]] = None


@dataclass(frozen=True)
class PointedSpace1D:
    """Discretized pointed space (grid, density, singular set, base point)."""

    grid: Grid1D
    density: np.ndarray
    singular_points: tuple
    base_point: float
    regularity_k: int = 0
    cut_anchors: Optional[tuple] = None
    density_fn: Optional[Callable] = None
    domain_truncation: bool = False
    truncated_tail_mass: float = 0.0
    kind: Optional[str] = None

    def __post_init__(self):
        dens = np.asarray(self.density, dtype=float)
        if dens.shape != (self.grid.n,):
            raise InvalidParams("density must have one value per cell")
        if np.any(dens < 0) or np.any(np.isnan(dens)):
            raise InvalidParams("density must be nonnegative")
        object.__setattr__(self, "density", dens)
        object.__setattr__(self, "singular_points", tuple(sorted(self.singular_points)))
        if self.cut_anchors is not None:
            object.__setattr__(self, "cut_anchors", tuple(sorted(self.cut_anchors)))
        a, b = self.grid.a, self.grid.b
        if not (a - _EDGE_TOL <= self.base_point <= b + _EDGE_TOL):
            raise InvalidParams("base point outside the domain")
        for s in self.singular_points:
            if not (a - _EDGE_TOL <= s <= b + _EDGE_TOL):
                raise InvalidParams(f"singular point {s} outside the domain")
            _require_on_edge(self.grid, s)

    @property
    def anchors(self) -> tuple:
        """Marked set driving the k-cut kill factor (singular set by default)."""
        return self.cut_anchors if self.cut_anchors is not None else self.singular_points

    @property
    def cell_masses(self) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            return self.density * self.grid.widths

    def scaled(self, c: float) -> "PointedSpace1D":
        """Space with reference measure multiplied by c > 0."""
        if not c > 0:
            raise InvalidParams("scale must be positive")
        fn = self.density_fn
        new_fn = (lambda x, _f=fn, _c=c: _c * _f(x)) if fn is not None else None
        return replace(self, density=self.density * c, density_fn=new_fn)


def _require_on_edge(grid: Grid1D, s: float):
    tol = _EDGE_TOL * max(1.0, abs(grid.b - grid.a))
    if np.min(np.abs(grid.edges - s)) > tol:
        raise SingularPointOffGrid(f"point {s} is not a cell edge")


def _singular_adjacent_cells(grid: Grid1D, points: Sequence[float]) -> np.ndarray:
    """Indices of cells having a singular point on one of their edges."""
    idx = []
    tol = _EDGE_TOL * max(1.0, abs(grid.b - grid.a))
    for s in points:
        hits = np.nonzero(np.abs(grid.edges - s) <= tol)[0]
        for e in hits:
            if e > 0:
                idx.append(e - 1)
            if e < grid.n:
                idx.append(e)
    return np.unique(np.asarray(idx, dtype=int))


def _dist_to_set(x: np.ndarray, points: Sequence[float]) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if len(points) == 0:
        return np.full(x.shape, np.inf)
    pts = np.asarray(points, dtype=float)
    return np.min(np.abs(x[..., None] - pts[None, :]), axis=-1)


# ---------------------------------------------------------------------------
# analytic model densities


def _quiet(fn):
    """Silence overflow/zero-power warnings inside a density closure; the
    limiting IEEE values (0, inf) are exactly the intended ones."""
    def wrapped(x, _fn=fn):
        with np.errstate(over="ignore", divide="ignore"):
            return _fn(x)
    return wrapped


def _model_density(spec: ModelSpec) -> tuple:
    """Return (density_fn, analytic_domain, singular_points, default_p)."""
    K, N = spec.K, spec.N
    kind = spec.kind
    if kind == "cosh_n":
        if not (K > 0 and N < -1):
            raise InvalidParams("cosh_n needs K > 0 and N < -1")
        a = math.sqrt(-K / N)
        return (lambda x: np.cosh(a * np.asarray(x, float)) ** N,
                (-math.inf, math.inf), (), 0.0)
    if kind == "sinh_n":
        if not (K > 0 and N < -1):
            raise InvalidParams("sinh_n needs K > 0 and N < -1")
        a = math.sqrt(-K / N)
        return (lambda x: np.abs(np.sinh(a * np.asarray(x, float))) ** N,
                (0.0, math.inf), (0.0,), 1.0)
    if kind == "power_n":
        if not N < -1:
            raise InvalidParams("power_n needs N < -1")
        return (lambda x: np.abs(np.asarray(x, float)) ** N,
                (0.0, math.inf), (0.0,), 1.0)
    if kind == "cos_n":
        if not (K < 0 and N < -1):
            raise InvalidParams("cos_n needs K < 0 and N < -1")
        b = math.sqrt(K / N)
        half = 0.5 * math.pi * math.sqrt(N / K)
        def fn(x, _b=b):
            return np.clip(np.cos(_b * np.asarray(x, float)), 0.0, None) ** N
        return fn, (-half, half), (-half, half), 0.0
    if kind == "glued_cos_n":
        if not (K < 0 and N < -1 and spec.J >= 1):
            raise InvalidParams("glued_cos_n needs K < 0, N < -1, J >= 1")
        b = math.sqrt(K / N)
        half = 0.5 * math.pi * math.sqrt(N / K)
        J = spec.J
        def fn(x, _b=b, _h=half):
            x = np.asarray(x, float)
            j = np.clip(np.round(x / (2.0 * _h)), 1, J)
            return np.clip(np.cos(_b * (x - 2.0 * _h * j)), 0.0, None) ** N
        sing = tuple((2 * j - 1) * half for j in range(1, J + 2))
        return fn, (half, (2 * J + 1) * half), sing, 2.0 * half
    if kind == "glued_power_n":
        if not N < -1:
            raise InvalidParams("glued_power_n needs N < -1")
        return (lambda x: np.abs(np.asarray(x, float)) ** N,
                (-math.inf, math.inf), (0.0,), 1.0)
    if kind == "glued_sinh_n":
        if not (K > 0 and N < -1):
            raise InvalidParams("glued_sinh_n needs K > 0 and N < -1")
        a = math.sqrt(-K / N)
        return (lambda x: np.abs(np.sinh(a * np.asarray(x, float))) ** N,
                (-math.inf, math.inf), (0.0,), 1.0)
    if kind == "cauchy":
        if not spec.alpha > 0:
            raise InvalidParams("cauchy needs alpha > 0")
        expo = 0.5 * (1.0 + spec.alpha)
        norm, _ = integrate.quad(lambda x: (1.0 + x * x) ** (-expo),
                                 -math.inf, math.inf)
        c = 1.0 / norm
        return (lambda x: c * (1.0 + np.asarray(x, float) ** 2) ** (-expo),
                (-math.inf, math.inf), (), 0.0)
    raise InvalidParams(f"unknown model kind {kind!r}")


def build_model_space(spec: ModelSpec) -> PointedSpace1D:
    """Discretize an analytic model onto a uniform grid (midpoint sampling)."""
    if spec.kind == "custom_psi":
        if spec.psi_samples is None or spec.domain is None:
            raise InvalidParams("custom_psi needs psi_samples and a domain")
        psi = np.asarray(spec.psi_samples, dtype=float)
        grid = Grid1D.uniform(spec.domain[0], spec.domain[1], psi.size)
        density = np.exp(-psi)
        p = spec.base_point if spec.base_point is not None else grid.centers[psi.size // 2]
        return PointedSpace1D(grid=grid, density=density, singular_points=(),
                              base_point=float(p), regularity_k=spec.regularity_k,
                              kind="custom_psi")

    fn, analytic_dom, sing, default_p = _model_density(spec)
    fn = _quiet(fn)
    if spec.domain is not None:
        a, b = float(spec.domain[0]), float(spec.domain[1])
    else:
        a, b = analytic_dom
        if not (math.isfinite(a) and math.isfinite(b)):
            raise InvalidParams(f"{spec.kind} needs an explicit bounded domain")
    if not (math.isfinite(a) and math.isfinite(b) and a < b):
        raise InvalidParams(f"bad domain [{a}, {b}]")
    lo, hi = analytic_dom
    if a < lo - _EDGE_TOL or b > hi + _EDGE_TOL:
        raise InvalidParams("domain exceeds the analytic support")
    if spec.kind in ("cos_n", "glued_cos_n"):
        # endpoints must land exactly on the vanishing locus
        if abs(a - lo) > 1e-9 or abs(b - hi) > 1e-9:
            raise InvalidParams("cos-type domains must span the full arches")

    grid = Grid1D.uniform(a, b, spec.grid_n)
    sing = tuple(s for s in sing if a - _EDGE_TOL <= s <= b + _EDGE_TOL)
    for s in sing:
        _require_on_edge(grid, s)

    with np.errstate(divide="ignore", over="ignore"):
        density = np.asarray(fn(grid.centers), dtype=float)
    adj = _singular_adjacent_cells(grid, sing)
    density[adj] = np.inf

    truncated = a > lo + _EDGE_TOL or b < hi - _EDGE_TOL
    tail = 0.0
    if truncated:
        if a > lo + _EDGE_TOL and math.isfinite(lo):
            tail += integrate.quad(fn, lo, a)[0]
        elif a > lo + _EDGE_TOL:
            tail += integrate.quad(fn, -math.inf, a)[0]
        if b < hi - _EDGE_TOL:
            tail += integrate.quad(fn, b, hi if math.isfinite(hi) else math.inf)[0]

    p = float(spec.base_point) if spec.base_point is not None else float(default_p)
    if _dist_to_set(np.asarray(p), sing) <= 0.5 * float(np.max(grid.widths)):
        raise InvalidParams("base point too close to a singular point")
    space = PointedSpace1D(grid=grid, density=density, singular_points=sing,
                           base_point=p, regularity_k=spec.regularity_k,
                           density_fn=fn, domain_truncation=truncated,
                           truncated_tail_mass=float(tail), kind=spec.kind)
    k_cut(space, spec.regularity_k)  # raises EmptyCut when k_bar is too small
    return space


# ---------------------------------------------------------------------------
# singular-set machinery


def detect_singular_set(space: PointedSpace1D, refinement_levels: int = 4,
                        growth_factor: float = 1.5, strict: bool = False) -> tuple:
    """Points whose shrinking neighborhoods keep gaining mass under refinement.

    Every grid edge is a candidate; a candidate is singular when the midpoint
    mass of its radius-r neighborhood (fixed 128 subcells) grows by at least
    ``growth_factor`` each time r is halved, across all refinement levels.
    Custom sampled spaces are not refinable: they raise ``NotRefinable`` under
    ``strict=True`` and otherwise fall back to the declared singular set.
    """
    if space.density_fn is None:
        if strict:
            raise NotRefinable("no analytic density attached")
        return space.singular_points
    if refinement_levels < 2:
        raise InvalidParams("need at least 2 refinement levels")
    edges = space.grid.edges
    a, b = space.grid.a, space.grid.b
    r0 = 4.0 * float(np.max(space.grid.widths))
    nsub = 128
    masses = np.empty((refinement_levels, edges.size))
    offsets = (np.arange(nsub) + 0.5) / nsub
    for lev in range(refinement_levels):
        r = r0 * 0.5 ** lev
        lo = np.maximum(edges - r, a)
        hi = np.minimum(edges + r, b)
        w = (hi - lo) / nsub
        pts = lo[:, None] + np.outer(hi - lo, offsets)
        with np.errstate(divide="ignore", over="ignore"):
            vals = np.asarray(space.density_fn(pts.ravel()), dtype=float)
        vals = vals.reshape(edges.size, nsub)
        vals[~np.isfinite(vals)] = 0.0
        masses[lev] = np.sum(vals, axis=1) * w
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = masses[1:] / masses[:-1]
    hit = np.all(ratios >= growth_factor, axis=0) & np.all(masses > 0, axis=0)
    return tuple(float(e) for e in edges[hit])


def regular_set(space: PointedSpace1D, k: int) -> np.ndarray:
    """Indices of cells whose centers lie in the k-th regular region."""
    c = space.grid.centers
    mask = np.abs(c - space.base_point) < 2.0 ** (k + 1)
    mask &= _dist_to_set(c, space.anchors) > 2.0 ** (-(k + 1))
    return np.nonzero(mask)[0]


def cut_weights(space: PointedSpace1D, k: int) -> np.ndarray:
    """The k-cut multiplier f^k evaluated at cell centers."""
    c = space.grid.centers
    w = f_cut(np.abs(c - space.base_point) * 2.0 ** (-k))
    anchors = space.anchors
    if len(anchors) > 0:
        w = w * (1.0 - f_cut(_dist_to_set(c, anchors) * 2.0 ** k))
    return w


def k_cut(space: PointedSpace1D, k: int) -> PointedSpace1D:
    """Space with density multiplied by the k-cut function.

    Cells adjacent to a true singular point are zeroed exactly, so infinite
    densities never survive a cut.  Singular points and anchors are kept as
    metadata on the cut space.
    """
    if k < space.regularity_k:
        raise InvalidParams(f"k={k} below regularity parameter {space.regularity_k}")
    w = cut_weights(space, k)
    with np.errstate(invalid="ignore"):
        density = np.where(np.isfinite(space.density), space.density * w, 0.0)
    adj = _singular_adjacent_cells(space.grid, space.singular_points)
    if adj.size:
        density[adj] = 0.0
    fn = space.density_fn
    new_fn = None
    if fn is not None:
        p, anchors, kk = space.base_point, space.anchors, k
        def new_fn(x, _f=fn, _p=p, _anch=anchors, _k=kk):
            x = np.asarray(x, dtype=float)
            w = f_cut(np.abs(x - _p) * 2.0 ** (-_k))
            if len(_anch) > 0:
                w = w * (1.0 - f_cut(_dist_to_set(x, _anch) * 2.0 ** _k))
            with np.errstate(over="ignore"):
                v = np.asarray(_f(x), dtype=float)
            return np.where(w > 0, v * w, 0.0)
    cut = replace(space, density=density, density_fn=new_fn)
    if float(np.sum(cut.cell_masses)) <= 0.0:
        raise EmptyCut(f"k={k} cut has no mass")
    return cut


def total_mass(space: PointedSpace1D) -> float:
    """Total reference mass; +inf when a singular cell is present."""
    m = space.cell_masses
    if np.any(np.isinf(m)):
        return math.inf
    return float(np.sum(m))


def normalize_cut(space: PointedSpace1D, k: int):
    """The k-cut renormalized to a probability measure on the same grid."""
    from .measure import DiscreteMeasure

    cut = k_cut(space, k)
    m = cut.cell_masses
    return DiscreteMeasure(grid=space.grid, masses=m / float(np.sum(m)))


def refine(space: PointedSpace1D, factor: int) -> PointedSpace1D:
    """Subdivide each cell into `factor` equal parts, resampling the density."""
    if factor < 1:
        raise InvalidParams("factor must be >= 1")
    if factor == 1:
        return space
    g = space.grid
    sub = np.linspace(0.0, 1.0, factor + 1)[:-1]
    edges = (g.edges[:-1, None] + np.outer(g.widths, sub)).ravel()
    edges = np.append(edges, g.b)
    grid = Grid1D(edges)
    if space.density_fn is not None:
        with np.errstate(divide="ignore", over="ignore"):
            density = np.asarray(space.density_fn(grid.centers), dtype=float)
    else:
        density = np.repeat(space.density, factor)
    adj = _singular_adjacent_cells(grid, space.singular_points)
    if adj.size and bool((~np.isfinite(space.density)).any()):
        density[adj] = np.inf
    return replace(space, grid=grid, density=density)


# ---------------------------------------------------------------------------
# descriptors


def space_from_dict(d: dict) -> PointedSpace1D:
    if not isinstance(d, dict) or "kind" not in d:
        raise InvalidParams("space descriptor must be an object with a 'kind'")
    params = d.get("params", {})
    spec = ModelSpec(
        kind=d["kind"],
        K=float(params.get("K", 0.0)),
        N=float(params.get("N", -2.0)),
        alpha=float(params.get("alpha", 1.0)),
        J=int(params.get("J", 2)),
        domain=tuple(d["domain"]) if "domain" in d else _default_domain(d),
        grid_n=int(d.get("grid_n", 512)),
        base_point=d.get("base_point"),
        regularity_k=int(d.get("regularity_k", 0)),
        psi_samples=d.get("psi_samples"),
    )
    return build_model_space(spec)


def _default_domain(d: dict):
    kind = d["kind"]
    R = d.get("truncation_radius")
    if kind in ("cos_n", "glued_cos_n"):
        return None
    if R is None:
        raise InvalidParams(f"{kind} needs a domain or truncation_radius")
    lo, hi = _UNBOUNDED[kind]
    a = -float(R) if lo == -math.inf else lo
    return (a, float(R))


def load_space(path: str) -> PointedSpace1D:
    with open(path, "r", encoding="utf-8") as fh:
        return space_from_dict(json.load(fh))


def space_summary(space: PointedSpace1D) -> dict:
    tm = total_mass(space)
    return {
        "kind": space.kind,
        "grid_n": space.grid.n,
        "domain": [space.grid.a, space.grid.b],
        "base_point": space.base_point,
        "regularity_k": space.regularity_k,
        "singular_points": list(space.singular_points),
        "total_mass": "inf" if math.isinf(tm) else tm,
        "domain_truncation": space.domain_truncation,
        "truncated_tail_mass": space.truncated_tail_mass,
    }
