"""Families of pointwise linear inequality constraints on a subspace.

A family constrains a derivative order ``s`` of the approximation over a
parameter region: ``v^(s)(y) >= bound`` (sign ``"lower"``) or
``v^(s)(y) <= bound`` (sign ``"upper"``) for every ``y`` in the region.
Via the coordinate isometry each parameter ``y`` turns into a half space
``{w : <unit(y), w> <= offset(y)}`` in coefficient space, whose unit normal
is the normalized vector of basis values at ``y`` (a Riesz representor of
the point-evaluation functional, rescaled to unit length).

The signed distance of a coefficient vector to that half space,

    sdist(w, y) = offset(y) - <unit(y), w>,

is negative exactly when the constraint is violated at ``y``; for an upper
bound it equals ``(bound - v^(s)(y)) / ||basis values||``, so its sign
matches the pointwise residual.  The operations here scan for the most
violated parameter (grid plus local refinement), extract the maximal
violated subregions, check feasibility on a denser grid, and estimate
whether a constraint collection pins down the subspace (full numerical
rank of sampled normals), which is what makes the constrained projection
problem uniquely solvable.

``FixedHalfspace`` covers the degenerate but useful case of a single
explicit half space with no parameter, used for small geometric test
problems and custom constraint sets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import minimize

from .bases import Coefficients, OrthoBasis

__all__ = [
    "SearchConfig",
    "ConstraintFamily",
    "FixedHalfspace",
    "RieszVector",
    "ViolationRecord",
    "DeterminingReport",
    "positivity",
    "monotonicity",
    "convexity",
    "bounded_above",
    "bounded_below",
    "riesz_vector",
    "sdist",
    "most_violated",
    "violated_regions",
    "is_feasible",
    "determining_check",
]

# A Riesz normal shorter than this signals a common zero of all basis
# functions (or derivatives) at the parameter; the constraint is vacuous
# there and the representor undefined.
_DEGENERATE_NORM = 1e-12

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class SearchConfig:
    """Grid sizes and refinement controls for constraint searches."""

    grid_1d: int = 2049
    grid_2d: int = 129
    refine_tol: float = 1e-12
    multistarts: int = 8
    seed: int = 42
    check_factor: int = 10

    def __post_init__(self) -> None:
        if self.grid_1d < 3 or self.grid_2d < 3:
            raise ValueError("search grids need at least 3 points per axis")
        if self.check_factor < 1:
            raise ValueError("check_factor must be >= 1")

    def dense_1d(self) -> int:
        return self.check_factor * (self.grid_1d - 1) + 1

    def dense_2d(self) -> int:
        # Cap keeps the streamed dense scan affordable in 2-d.
        return min(self.check_factor * self.grid_2d, 1290)


@dataclass(frozen=True)
class ConstraintFamily:
    """One parameterized family: ``v^(s)(y) >= bound`` or ``<= bound`` on ``domain``.

    ``domain=None`` means the full basis domain.  Homogeneous families
    (``bound == 0``) produce half spaces through the origin; a nonzero bound
    produces affine half spaces.
    """

    deriv_order: int
    sign: str
    bound: float = 0.0
    domain: tuple | None = None
    label: str = ""

    def __post_init__(self) -> None:
        if self.deriv_order not in (0, 1, 2):
            raise ValueError(f"derivative order must be 0, 1 or 2, got {self.deriv_order}")
        if self.sign not in ("lower", "upper"):
            raise ValueError(f"sign must be 'lower' or 'upper', got {self.sign!r}")
        if self.domain is not None:
            dom = self.domain
            if len(dom) == 2 and np.isscalar(dom[0]):
                if not dom[0] < dom[1]:
                    raise ValueError(f"empty domain {dom}")
            else:
                for axis in dom:
                    if not axis[0] < axis[1]:
                        raise ValueError(f"empty domain {dom}")

    def interval(self, basis: OrthoBasis) -> tuple:
        return self.domain if self.domain is not None else basis.domain


def positivity(domain: tuple | None = None) -> ConstraintFamily:
    return ConstraintFamily(0, "lower", 0.0, domain, label="positivity")


def monotonicity(domain: tuple | None = None) -> ConstraintFamily:
    return ConstraintFamily(1, "lower", 0.0, domain, label="monotonicity")


def convexity(domain: tuple | None = None) -> ConstraintFamily:
    return ConstraintFamily(2, "lower", 0.0, domain, label="convexity")


def bounded_above(bound: float = 1.0, domain: tuple | None = None) -> ConstraintFamily:
    return ConstraintFamily(0, "upper", bound, domain, label=f"bounded<= {bound}")


def bounded_below(bound: float, domain: tuple | None = None) -> ConstraintFamily:
    return ConstraintFamily(0, "lower", bound, domain, label=f"bounded>={bound}")


@dataclass(frozen=True)
class FixedHalfspace:
    """A single explicit half space ``{w : <normal, w> <= offset}``."""

    normal: NDArray[np.float64]
    offset: float = 0.0
    label: str = ""

    def __post_init__(self) -> None:
        normal = np.asarray(self.normal, dtype=float)
        size = float(np.linalg.norm(normal))
        if size == 0.0:
            raise ValueError("half-space normal cannot be zero")
        normal = normal / size
        normal.flags.writeable = False
        object.__setattr__(self, "normal", normal)
        object.__setattr__(self, "offset", float(self.offset) / size)


@dataclass(frozen=True)
class RieszVector:
    """Unit half-space normal at one parameter, with its scale and offset."""

    unit: NDArray[np.float64]
    scale: float
    offset: float
    param: object
    family: object

    def __post_init__(self) -> None:
        unit = np.asarray(self.unit, dtype=float).copy()
        unit.flags.writeable = False
        object.__setattr__(self, "unit", unit)


@dataclass(frozen=True)
class ViolationRecord:
    """The most violated constraint found by a search."""

    family_index: int
    param: object
    signed_distance: float
    family: object

    def __post_init__(self) -> None:
        if not self.signed_distance < 0:
            raise ValueError("a violation record requires a negative signed distance")


@dataclass(frozen=True)
class DeterminingReport:
    """Numerical rank of sampled constraint normals against the subspace."""

    rank: int
    dimension: int
    singular_values: NDArray[np.float64]
    samples_used: int
    samples_skipped: int

    @property
    def is_determining(self) -> bool:
        return self.rank == self.dimension


def _unpack(p) -> tuple[NDArray, OrthoBasis | None]:
    if isinstance(p, Coefficients):
        return p.entries, p.basis
    return np.asarray(p, dtype=float), None


def riesz_vector(fam: ConstraintFamily, basis: OrthoBasis, y) -> RieszVector:
    """Unit normal of the half space induced by family ``fam`` at parameter ``y``.

    For a lower bound the normal is the negated, normalized vector of basis
    (derivative) values at ``y``, so that feasibility reads
    ``<unit, w> <= offset``; the scale is the normalizing factor applied.
    """
    values = basis.eval_one(y, fam.deriv_order)
    size = float(np.linalg.norm(values))
    if size < _DEGENERATE_NORM:
        raise ValueError(
            f"all basis functions (derivative order {fam.deriv_order}) vanish "
            f"at y={y}; the constraint normal is undefined there"
        )
    scale = 1.0 / size
    if fam.sign == "lower":
        return RieszVector(-scale * values, scale, -scale * fam.bound, y, fam)
    return RieszVector(scale * values, scale, scale * fam.bound, y, fam)


def _fixed_riesz(h: FixedHalfspace) -> RieszVector:
    return RieszVector(h.normal, 1.0, h.offset, None, h)


def riesz_for(record_family, basis: OrthoBasis | None, y) -> RieszVector:
    if isinstance(record_family, FixedHalfspace):
        return _fixed_riesz(record_family)
    if basis is None:
        raise ValueError("parameterized families need a basis")
    return riesz_vector(record_family, basis, y)


def sdist(p, rv: RieszVector) -> float:
    """Signed distance of coefficients to the half space; negative = violated."""
    entries, _ = _unpack(p)
    if entries.shape != rv.unit.shape:
        raise ValueError(
            f"dimension mismatch: coefficients {entries.shape} vs normal {rv.unit.shape}"
        )
    return float(rv.offset - rv.unit @ entries)


# ---------------------------------------------------------------------------
# Grid scans
# ---------------------------------------------------------------------------


def _grid_1d(basis: OrthoBasis, fam: ConstraintFamily, n: int):
    lo, hi = fam.interval(basis)
    key = ("1d", fam.deriv_order, fam.sign, fam.bound, lo, hi, n)
    cached = basis._grid_cache.get(key)
    if cached is None:
        ys = np.linspace(lo, hi, n)
        values = basis.eval_many(ys, fam.deriv_order)
        norms = np.linalg.norm(values, axis=1)
        cached = (ys, values, norms)
        basis._grid_cache[key] = cached
    return cached


def _sdist_values(vals: NDArray, norms: NDArray, fam: ConstraintFamily) -> NDArray:
    if fam.sign == "lower":
        resid = vals - fam.bound
    else:
        resid = fam.bound - vals
    with np.errstate(divide="ignore", invalid="ignore"):
        out = resid / norms
    # A vanishing normal carries no constraint; mark it never-violated.
    return np.where(norms > _DEGENERATE_NORM, out, np.inf)


def _sdist_on_grid_1d(entries, basis, fam, n):
    ys, values, norms = _grid_1d(basis, fam, n)
    return ys, _sdist_values(values @ entries, norms, fam)


def _sdist_at(entries, basis, fam, y) -> float:
    values = basis.eval_one(y, fam.deriv_order)
    size = float(np.linalg.norm(values))
    val = float(values @ entries)
    return float(_sdist_values(np.array([val]), np.array([size]), fam)[0])


def _golden_min(f, lo: float, hi: float, tol: float) -> tuple[float, float]:
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    return (c, fc) if fc < fd else (d, fd)


def _family_min_1d(entries, basis, fam, cfg: SearchConfig, n: int):
    ys, sd = _sdist_on_grid_1d(entries, basis, fam, n)
    i = int(np.argmin(sd))
    best_y, best_sd = float(ys[i]), float(sd[i])
    lo = float(ys[max(i - 1, 0)])
    hi = float(ys[min(i + 1, ys.size - 1)])
    if hi > lo:
        y_ref, sd_ref = _golden_min(
            lambda y: _sdist_at(entries, basis, fam, y), lo, hi, cfg.refine_tol
        )
        if sd_ref < best_sd:
            best_y, best_sd = y_ref, sd_ref
    return best_sd, best_y


def _grid_2d(basis: OrthoBasis, fam: ConstraintFamily, nside: int, cache: bool):
    (xlo, xhi), (ylo, yhi) = fam.interval(basis)
    key = ("2d", fam.deriv_order, fam.sign, fam.bound, xlo, xhi, ylo, yhi, nside)
    cached = basis._grid_cache.get(key)
    if cached is not None:
        return cached
    xs = np.linspace(xlo, xhi, nside)
    ys = np.linspace(ylo, yhi, nside)
    xx, yy = np.meshgrid(xs, ys, indexing="xy")
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    values = basis.eval_many(pts, fam.deriv_order)
    norms = np.linalg.norm(values, axis=1)
    result = (pts, values, norms)
    if cache:
        basis._grid_cache[key] = result
    return result


def _sdist_on_grid_2d(entries, basis, fam, nside: int, cache: bool):
    if cache:
        pts, values, norms = _grid_2d(basis, fam, nside, True)
        return pts, _sdist_values(values @ entries, norms, fam)
    (xlo, xhi), (ylo, yhi) = fam.interval(basis)
    xs = np.linspace(xlo, xhi, nside)
    ys = np.linspace(ylo, yhi, nside)
    xx, yy = np.meshgrid(xs, ys, indexing="xy")
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    sd = np.empty(pts.shape[0])
    chunk = 32768
    for start in range(0, pts.shape[0], chunk):
        block = pts[start : start + chunk]
        values = basis.eval_many(block, fam.deriv_order)
        norms = np.linalg.norm(values, axis=1)
        sd[start : start + chunk] = _sdist_values(values @ entries, norms, fam)
    return pts, sd


def _family_min_2d(entries, basis, fam, cfg: SearchConfig, nside: int):
    cache = nside == cfg.grid_2d
    pts, sd = _sdist_on_grid_2d(entries, basis, fam, nside, cache)
    order = np.argsort(sd)
    n_best = (cfg.multistarts + 1) // 2
    starts = [pts[j] for j in order[:n_best]]
    (xlo, xhi), (ylo, yhi) = fam.interval(basis)
    rng = np.random.default_rng(cfg.seed)
    for _ in range(cfg.multistarts - len(starts)):
        starts.append(np.array([rng.uniform(xlo, xhi), rng.uniform(ylo, yhi)]))

    def objective(pt):
        clipped = (min(max(pt[0], xlo), xhi), min(max(pt[1], ylo), yhi))
        return _sdist_at(entries, basis, fam, clipped)

    best_sd = float(sd[order[0]])
    best_pt = (float(pts[order[0]][0]), float(pts[order[0]][1]))
    for x0 in starts:
        res = minimize(
            objective,
            x0,
            method="Nelder-Mead",
            bounds=[(xlo, xhi), (ylo, yhi)],
            options={"xatol": 1e-10, "fatol": 1e-13, "maxiter": 400},
        )
        if res.fun < best_sd:
            best_sd = float(res.fun)
            best_pt = (float(res.x[0]), float(res.x[1]))
    return best_sd, best_pt


def _family_min(entries, basis, fam, cfg: SearchConfig, dense: bool = False):
    if basis is None:
        raise ValueError("parameterized families need coefficients with a basis")
    if basis.is_2d:
        nside = cfg.dense_2d() if dense else cfg.grid_2d
        return _family_min_2d(entries, basis, fam, cfg, nside)
    n = cfg.dense_1d() if dense else cfg.grid_1d
    return _family_min_1d(entries, basis, fam, cfg, n)


def most_violated(
    p, fams, cfg: SearchConfig | None = None, delta: float = 1e-10, dense: bool = False
) -> ViolationRecord | None:
    """Most violated constraint over all families, or ``None`` if all clear.

    Scans each family's search grid and locally refines the minimizer
    (golden section in 1-d, bound-constrained Nelder-Mead multi-starts in
    2-d).  Ties between equal signed distances break lexicographically:
    smallest family index, then smallest parameter.  Returns ``None`` when
    the refined minimum over every family stays above ``-delta``.
    """
    cfg = cfg or SearchConfig()
    entries, basis = _unpack(p)
    best = None
    for k, fam in enumerate(fams):
        if isinstance(fam, FixedHalfspace):
            value = float(fam.offset - fam.normal @ entries)
            candidate = (value, k, -math.inf, None)
        else:
            value, y = _family_min(entries, basis, fam, cfg, dense)
            y_key = y if not isinstance(y, tuple) else y
            candidate = (value, k, y_key, y)
        if best is None or (candidate[0], candidate[1], _lex(candidate[2])) < (
            best[0],
            best[1],
            _lex(best[2]),
        ):
            best = candidate
    if best is None or best[0] >= -delta:
        return None
    return ViolationRecord(best[1], best[3], best[0], fams[best[1]])


def _lex(y):
    if isinstance(y, tuple):
        return y
    return (y,)


def _bisect_sign_change(entries, basis, fam, lo: float, hi: float, tol: float) -> float:
    lo_neg = _sdist_at(entries, basis, fam, lo) < 0.0
    while (hi - lo) > tol:
        mid = 0.5 * (lo + hi)
        if (_sdist_at(entries, basis, fam, mid) < 0.0) == lo_neg:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def violated_regions(p, fam, cfg: SearchConfig | None = None, include_params=()):
    """Maximal subregions of the family's domain where the constraint fails.

    1-d: a list of ``(lo, hi)`` intervals whose interior has negative signed
    distance; interval endpoints interior to the domain are located by
    bisection on the sign change to the configured tolerance.  2-d: a list
    of ``((xlo, xhi), (ylo, yhi))`` grid cells centered on violated nodes.

    ``include_params`` are parameters (typically from a refined search)
    guaranteed coverage: any that is violated but falls between grid nodes,
    in a dip too narrow for the scan to see, gets its own region bracketed
    against the nearest feasible nodes.
    """
    cfg = cfg or SearchConfig()
    entries, basis = _unpack(p)
    if basis is None:
        raise ValueError("violated_regions needs coefficients with a basis")
    if basis.is_2d:
        return _violated_cells_2d(entries, basis, fam, cfg, include_params)

    ys, sd = _sdist_on_grid_1d(entries, basis, fam, cfg.grid_1d)
    negative = sd < 0.0
    regions = []
    n = ys.size
    if negative.any():
        # Bracket every sign change, then bisect all of them in lockstep.
        flips = np.nonzero(negative[:-1] != negative[1:])[0]
        lo_b = ys[flips].astype(float)
        hi_b = ys[flips + 1].astype(float)
        if flips.size:
            f_lo = sd[flips]
            while np.max(hi_b - lo_b) > cfg.refine_tol:
                mid = 0.5 * (lo_b + hi_b)
                values = basis.eval_many(mid, fam.deriv_order)
                norms = np.linalg.norm(values, axis=1)
                f_mid = _sdist_values(values @ entries, norms, fam)
                same_side = (f_mid < 0.0) == (f_lo < 0.0)
                lo_b = np.where(same_side, mid, lo_b)
                f_lo = np.where(same_side, f_mid, f_lo)
                hi_b = np.where(same_side, hi_b, mid)
        roots = 0.5 * (lo_b + hi_b)

        pos = 0
        while pos < n:
            if not negative[pos]:
                pos += 1
                continue
            run_start = pos
            while pos + 1 < n and negative[pos + 1]:
                pos += 1
            left = float(ys[0]) if run_start == 0 else None
            right = float(ys[-1]) if pos == n - 1 else None
            if left is None:
                left = float(roots[np.searchsorted(flips, run_start - 1)])
            if right is None:
                right = float(roots[np.searchsorted(flips, pos)])
            if right > left:
                regions.append((left, right))
            pos += 1

    for y0 in include_params:
        y0 = float(y0)
        if any(lo <= y0 <= hi for lo, hi in regions):
            continue
        if _sdist_at(entries, basis, fam, y0) >= 0.0:
            continue
        i = int(np.searchsorted(ys, y0))
        left = float(ys[0])
        for j in range(min(i, n) - 1, -1, -1):
            if sd[j] >= 0.0:
                left = _bisect_sign_change(
                    entries, basis, fam, float(ys[j]), y0, cfg.refine_tol
                )
                break
        right = float(ys[-1])
        for j in range(min(i, n - 1), n):
            if float(ys[j]) >= y0 and sd[j] >= 0.0:
                right = _bisect_sign_change(
                    entries, basis, fam, y0, float(ys[j]), cfg.refine_tol
                )
                break
        if not right > left:
            # Dip narrower than the bisection tolerance; keep a sliver so the
            # quadrature still sees it.
            left = max(float(ys[0]), y0 - cfg.refine_tol)
            right = min(float(ys[-1]), y0 + cfg.refine_tol)
        if right > left:
            regions.append((left, right))
    regions.sort()
    return regions


def _violated_cells_2d(entries, basis, fam, cfg: SearchConfig, include_params=()):
    pts, sd = _sdist_on_grid_2d(entries, basis, fam, cfg.grid_2d, cache=True)
    (xlo, xhi), (ylo, yhi) = fam.interval(basis)
    hx = 0.5 * (xhi - xlo) / (cfg.grid_2d - 1)
    hy = 0.5 * (yhi - ylo) / (cfg.grid_2d - 1)
    cells = []
    for pt in pts[sd < 0.0]:
        cells.append(
            (
                (max(pt[0] - hx, xlo), min(pt[0] + hx, xhi)),
                (max(pt[1] - hy, ylo), min(pt[1] + hy, yhi)),
            )
        )
    for pt in include_params:
        x0, y0 = float(pt[0]), float(pt[1])
        if any(cx[0] <= x0 <= cx[1] and cy[0] <= y0 <= cy[1] for cx, cy in cells):
            continue
        if _sdist_at(entries, basis, fam, (x0, y0)) >= 0.0:
            continue
        cells.append(
            (
                (max(x0 - hx, xlo), min(x0 + hx, xhi)),
                (max(y0 - hy, ylo), min(y0 + hy, yhi)),
            )
        )
    return cells


def is_feasible(p, fams, delta: float = 1e-10, cfg: SearchConfig | None = None) -> bool:
    """Whether every constraint holds to tolerance on a dense check grid.

    The check grid is ``check_factor`` times denser than the search grid;
    this is a pointwise certificate, deliberately without refinement, used
    both by the solvers' convergence tests and on their outputs.
    """
    cfg = cfg or SearchConfig()
    entries, basis = _unpack(p)
    for fam in fams:
        if isinstance(fam, FixedHalfspace):
            if fam.offset - fam.normal @ entries < -delta:
                return False
            continue
        if basis is None:
            raise ValueError("parameterized families need coefficients with a basis")
        if basis.is_2d:
            _, sd = _sdist_on_grid_2d(entries, basis, fam, cfg.dense_2d(), cache=False)
        else:
            _, sd = _sdist_on_grid_1d(entries, basis, fam, cfg.dense_1d())
        if float(np.min(sd)) < -delta:
            return False
    return True


def determining_check(fams, basis: OrthoBasis, sample_count: int) -> DeterminingReport:
    """Numerical rank of stratified samples of the constraint normals.

    Full rank certifies (numerically) that the only subspace element
    annihilated by every sampled constraint is zero, the property that makes
    the constrained projection unique.  Parameters where a normal is
    undefined (all basis derivatives vanish) are skipped and counted.
    """
    rows = []
    skipped = 0
    for fam in fams:
        if isinstance(fam, FixedHalfspace):
            rows.append(fam.normal)
            continue
        if basis.is_2d:
            per_axis = max(2, math.isqrt(sample_count))
            (xlo, xhi), (ylo, yhi) = fam.interval(basis)
            xs = np.linspace(xlo, xhi, per_axis)
            ys = np.linspace(ylo, yhi, per_axis)
            params = [(x, y) for x in xs for y in ys]
        else:
            lo, hi = fam.interval(basis)
            params = np.linspace(lo, hi, sample_count)
        for y in params:
            try:
                rows.append(riesz_vector(fam, basis, y).unit)
            except ValueError:
                skipped += 1
    matrix = np.stack(rows) if rows else np.zeros((0, basis.dim))
    singular = np.linalg.svd(matrix, compute_uv=False) if rows else np.zeros(0)
    rank = int(np.linalg.matrix_rank(matrix)) if rows else 0
    return DeterminingReport(rank, basis.dim, singular, len(rows), skipped)
