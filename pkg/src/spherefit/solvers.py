"""Constrained projection solvers on the coefficient sphere.

All three norm-preserving solvers move an infeasible coefficient vector
across the sphere of its own norm until every constraint holds:

* greedy: project onto the feasible cap of the single most violated
  constraint, repeat;
* average: project onto every violated constraint sampled by quadrature
  over the violated subregions, then move to the weighted Karcher mean of
  the projections, weights proportional to quadrature weight times squared
  step distance;
* hybrid: take the greedy step when it is already tiny relative to the
  radius, otherwise move in the direction of the averaged position but by
  the greedy step's arc length.

``solve_linear_only`` is the flat-space baseline the others are measured
against: the same constraint searches, but plain Euclidean half-space
projections, which shrink the norm instead of preserving it.

Convergence means a dense-grid certificate: after the search grid finds
nothing below ``-delta``, the check is repeated on a grid ``check_factor``
times finer (with local refinement) before the feasible flag is set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss

from .bases import Coefficients, approximation_error
from .constraints import (
    _DEGENERATE_NORM,
    FixedHalfspace,
    SearchConfig,
    _fixed_riesz,
    most_violated,
    riesz_vector,
    violated_regions,
)
from .geometry import (
    PARALLEL_TOL,
    ParallelNormalError,
    SpherePoint,
    TangentVector,
    _mean_of_units,
    affine_hemisphere_projection,
    exp_map,
    hemisphere_projection,
    intrinsic_distance,
    log_map,
)

__all__ = [
    "SolverConfig",
    "IterationTrace",
    "SolveResult",
    "solve_greedy",
    "solve_average",
    "solve_hybrid",
    "solve_linear_only",
    "relative_change",
]

# A Karcher step shorter than this (relative to the radius) cannot make
# progress; the driver falls back to a plain greedy step.
_STALL = 1e-15


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances and budgets shared by all solvers."""

    delta: float = 1e-10
    max_iter: int = 10000
    hybrid_threshold: float = 1e-6
    quad_order_per_region: int = 32
    karcher_tol: float = 1e-12
    search: SearchConfig = field(default_factory=SearchConfig)
    # On a parallel-normal abort, retry once after a relative 1e-10 random
    # tangential nudge instead of raising.
    perturb_parallel: bool = False
    keep_iterates: bool = False

    def __post_init__(self) -> None:
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.quad_order_per_region < 1:
            raise ValueError("quad_order_per_region must be at least 1")


@dataclass
class IterationTrace:
    """Per-iteration log: worst signed distance seen, arc length moved,
    norm of the new iterate (and optionally the iterate itself)."""

    worst_sdist: list[float] = field(default_factory=list)
    step_dist: list[float] = field(default_factory=list)
    norms: list[float] = field(default_factory=list)
    iterates: list[np.ndarray] | None = None

    def append(self, sd: float, step: float, norm: float, entries=None) -> None:
        self.worst_sdist.append(float(sd))
        self.step_dist.append(float(step))
        self.norms.append(float(norm))
        if self.iterates is not None:
            self.iterates.append(np.array(entries, dtype=float))

    def __len__(self) -> int:
        return len(self.worst_sdist)

    def rows(self):
        """Yield (iteration, worst_sdist, step_dist, norm) tuples."""
        for i, (sd, st, nm) in enumerate(
            zip(self.worst_sdist, self.step_dist, self.norms)
        ):
            yield i, sd, st, nm


@dataclass(frozen=True)
class SolveResult:
    coeffs: object
    iterations: int
    converged: bool
    trace: IterationTrace
    relative_change: float | None = None


def _prepare(p):
    if isinstance(p, Coefficients):
        entries = np.array(p.entries, dtype=float)
        basis = p.basis
        return entries, basis, lambda e: Coefficients(e, basis)
    entries = np.array(p, dtype=float)
    if entries.ndim != 1:
        raise ValueError("coefficients must be a 1-d vector")
    return entries, None, lambda e: np.asarray(e, dtype=float)


def _riesz_for(family, basis, param):
    if isinstance(family, FixedHalfspace):
        return _fixed_riesz(family)
    return riesz_vector(family, basis, param)


def _project(point: SpherePoint, rv) -> SpherePoint:
    if rv.offset == 0.0:
        return hemisphere_projection(point, rv.unit)
    return affine_hemisphere_projection(point, rv.unit, rv.offset)


def _project_with_retry(point: SpherePoint, rv, cfg: SolverConfig, rng) -> SpherePoint:
    try:
        return _project(point, rv)
    except ParallelNormalError:
        if not cfg.perturb_parallel:
            raise
        nudge = rng.standard_normal(point.dim)
        nudge -= (nudge @ point.coords) / point.radius**2 * point.coords
        size = float(np.linalg.norm(nudge))
        if size == 0.0:
            raise
        moved = point.coords + (1e-10 * point.radius / size) * nudge
        return _project(SpherePoint(moved, point.radius), rv)


def _find_violation(probe, fams, cfg: SolverConfig):
    """Search-grid scan first; a clean scan is certified on the dense grid."""
    rec = most_violated(probe, fams, cfg.search, cfg.delta)
    if rec is not None:
        return rec
    return most_violated(probe, fams, cfg.search, cfg.delta, dense=True)


@lru_cache(maxsize=None)
def _reference_gauss(order: int):
    return leggauss(order)


def _gauss_nodes_1d(lo: float, hi: float, order: int):
    t, w = _reference_gauss(order)
    half = 0.5 * (hi - lo)
    return lo + half * (t + 1.0), half * w


def _family_caps(point: SpherePoint, rows, fam):
    """Cap projections of ``point`` for one family's quadrature nodes, as a
    coordinate matrix.  ``rows`` holds the basis (derivative) values at the
    nodes.  Bounded families and degenerate rows take the scalar path."""
    sizes = np.linalg.norm(rows, axis=1)
    if fam.bound != 0.0 or np.any(sizes < _DEGENERATE_NORM):
        return None
    sign = -1.0 if fam.sign == "lower" else 1.0
    units = (sign / sizes)[:, None] * rows
    side = units @ point.coords
    planar = point.coords[None, :] - np.maximum(side, 0.0)[:, None] * units
    planar_norms = np.linalg.norm(planar, axis=1)
    if np.any(planar_norms / point.radius < PARALLEL_TOL):
        return None
    return planar * (point.radius / planar_norms)[:, None]


def _violated_quadrature(probe, point, fams, basis, cfg: SolverConfig, rng, worst=None):
    """Projections of the iterate onto every quadrature-sampled violated
    constraint, as rows of a matrix, with raw quadrature weights.

    ``worst`` is the refined most-violated record for this iterate, if the
    caller has one; its parameter is handed to the region search so that a
    violation narrower than the scan grid still gets sampled.
    """
    blocks = []
    weight_blocks = []
    axis_order = max(2, math.isqrt(cfg.quad_order_per_region - 1) + 1)
    for fam_index, fam in enumerate(fams):
        if isinstance(fam, FixedHalfspace):
            rv = _riesz_for(fam, basis, None)
            if rv.offset - rv.unit @ point.coords < -cfg.delta:
                cap = _project_with_retry(point, rv, cfg, rng)
                blocks.append(cap.coords[None, :])
                weight_blocks.append(np.array([1.0]))
            continue
        seeds = ()
        if worst is not None and worst.family_index == fam_index:
            seeds = (worst.param,)
        nodes: list = []
        node_weights: list[float] = []
        for region in violated_regions(probe, fam, cfg.search, include_params=seeds):
            if basis is not None and basis.is_2d:
                (xlo, xhi), (ylo, yhi) = region
                xs, wx = _gauss_nodes_1d(xlo, xhi, axis_order)
                ys, wy = _gauss_nodes_1d(ylo, yhi, axis_order)
                for x, wxi in zip(xs, wx):
                    for y, wyi in zip(ys, wy):
                        nodes.append((x, y))
                        node_weights.append(wxi * wyi)
            else:
                lo, hi = region
                xs, wx = _gauss_nodes_1d(lo, hi, cfg.quad_order_per_region)
                nodes.extend(xs.tolist())
                node_weights.extend(wx.tolist())
        if not nodes:
            continue
        rows = basis.eval_many(np.asarray(nodes, dtype=float), fam.deriv_order)
        caps = _family_caps(point, rows, fam)
        if caps is None:
            caps_list = []
            for y in nodes:
                rv = riesz_vector(fam, basis, y)
                caps_list.append(_project_with_retry(point, rv, cfg, rng).coords)
            caps = np.stack(caps_list)
        blocks.append(caps)
        weight_blocks.append(np.asarray(node_weights, dtype=float))
    if not blocks:
        return None, None
    return np.vstack(blocks), np.concatenate(weight_blocks)


def _average_candidate(probe, point, fams, basis, cfg: SolverConfig, rng, worst=None):
    """Karcher mean of quadrature-sampled projections, or None when no
    violated region turns up to sample."""
    caps, quad_weights = _violated_quadrature(
        probe, point, fams, basis, cfg, rng, worst
    )
    if caps is None:
        return None
    r = point.radius
    base_unit = point.unit()
    cap_units = caps / r
    cosines = np.clip(cap_units @ base_unit, -1.0, 1.0)
    perp = cap_units - np.outer(cosines, base_unit)
    dists = r * np.arctan2(np.linalg.norm(perp, axis=1), cosines)
    raw = quad_weights * dists**2
    total = float(raw.sum())
    if float(dists.max(initial=0.0)) < 1e-15 or total <= 0.0:
        # Iterate sits on the boundary of every sampled constraint.
        weights = np.full(len(caps), 1.0 / len(caps))
    else:
        weights = raw / total
    keep = weights > 0.0
    # The iterate witnesses the hemisphere for through-origin caps; offset
    # caps can land further away, so retry on the generic check before
    # declaring the mean unavailable.
    for witness in (base_unit, None):
        try:
            mean_unit = _mean_of_units(
                cap_units[keep],
                weights[keep],
                tol=cfg.karcher_tol,
                hemisphere_normal=witness,
            )
        except ValueError:
            continue
        return SpherePoint(mean_unit * r, r)
    return None


def _run_on_sphere(p_hat, fams, cfg: SolverConfig, step_fn) -> SolveResult:
    entries, basis, rebuild = _prepare(p_hat)
    r0 = float(np.linalg.norm(entries))
    if not r0 > 0:
        raise ValueError("cannot project a zero coefficient vector")
    cfg = cfg or SolverConfig()
    rng = np.random.default_rng(cfg.search.seed)
    point = SpherePoint(entries, r0)
    trace = IterationTrace(iterates=[] if cfg.keep_iterates else None)
    iterations = 0
    converged = False
    while True:
        probe = rebuild(point.coords)
        rec = _find_violation(probe, fams, cfg)
        if rec is None:
            converged = True
            break
        if iterations >= cfg.max_iter:
            break
        new_point = step_fn(point, probe, rec, rng)
        step = intrinsic_distance(point, new_point)
        # Re-pin the norm so drift cannot accumulate across iterations.
        point = SpherePoint(new_point.coords, r0)
        iterations += 1
        trace.append(
            rec.signed_distance, step, float(np.linalg.norm(point.coords)), point.coords
        )
    return SolveResult(rebuild(point.coords), iterations, converged, trace)


def solve_greedy(p_hat, fams, cfg: SolverConfig | None = None) -> SolveResult:
    """Repeatedly project onto the most violated constraint's feasible cap.

    Each step lands exactly on the violated constraint's boundary plane
    while staying on the sphere; convergence requires the dense-grid
    feasibility certificate.
    """
    cfg = cfg or SolverConfig()
    _, basis, _ = _prepare(p_hat)

    def step(point, probe, rec, rng):
        rv = _riesz_for(rec.family, basis, rec.param)
        return _project_with_retry(point, rv, cfg, rng)

    return _run_on_sphere(p_hat, fams, cfg, step)


def solve_average(p_hat, fams, cfg: SolverConfig | None = None) -> SolveResult:
    """Move to the weighted Karcher mean of all sampled constraint projections.

    Violated subregions of each family are found per iteration and sampled
    with a fixed-order Gauss rule; each sampled constraint contributes its
    spherical projection, weighted by quadrature weight times squared arc
    distance (normalized).  Steps are accepted unconditionally, even when
    the worst violation temporarily grows; the trace records it.
    """
    cfg = cfg or SolverConfig()
    _, basis, _ = _prepare(p_hat)

    def step(point, probe, rec, rng):
        candidate = _average_candidate(probe, point, fams, basis, cfg, rng, worst=rec)
        if candidate is None or intrinsic_distance(point, candidate) < _STALL * point.radius:
            # A stalled mean: fall back to the plain greedy step.
            rv = _riesz_for(rec.family, basis, rec.param)
            return _project_with_retry(point, rv, cfg, rng)
        return candidate

    return _run_on_sphere(p_hat, fams, cfg, step)


def solve_hybrid(p_hat, fams, cfg: SolverConfig | None = None) -> SolveResult:
    """Greedy arc length along the averaged direction.

    When the greedy step is shorter than ``hybrid_threshold`` times the
    radius the greedy update is taken verbatim (the iterate is nearly
    feasible and the averaged direction loses meaning).  Otherwise the
    iterate moves along the geodesic toward the averaged position, but by
    the greedy step's arc length, computed on the unit sphere and rescaled.
    """
    cfg = cfg or SolverConfig()
    _, basis, _ = _prepare(p_hat)

    def step(point, probe, rec, rng):
        rv = _riesz_for(rec.family, basis, rec.param)
        greedy_point = _project_with_retry(point, rv, cfg, rng)
        d_greedy = intrinsic_distance(point, greedy_point)
        if d_greedy / point.radius < cfg.hybrid_threshold:
            return greedy_point
        candidate = _average_candidate(probe, point, fams, basis, cfg, rng, worst=rec)
        if candidate is None:
            return greedy_point
        base_u = SpherePoint(point.coords, 1.0)
        avg_u = SpherePoint(candidate.coords, 1.0)
        greedy_u = SpherePoint(greedy_point.coords, 1.0)
        arc = intrinsic_distance(base_u, greedy_u)
        toward = log_map(base_u, avg_u)
        if toward.length < _STALL or arc < _STALL:
            return greedy_point
        direction = toward.direction * (arc / toward.length)
        # Strip the radial roundoff a short log vector amplifies.
        direction -= (direction @ base_u.coords) * base_u.coords
        moved = exp_map(base_u, TangentVector(base_u, direction))
        return SpherePoint(moved.coords * point.radius, point.radius)

    return _run_on_sphere(p_hat, fams, cfg, step)


def solve_linear_only(p_hat, fams, cfg: SolverConfig | None = None) -> SolveResult:
    """Euclidean half-space projections, the flat (norm-shrinking) baseline.

    Identical constraint searches to the spherical solvers, but each step
    is the plain orthogonal projection onto the violated half space, so the
    coefficient norm can only decrease.
    """
    cfg = cfg or SolverConfig()
    entries, basis, rebuild = _prepare(p_hat)
    if not float(np.linalg.norm(entries)) > 0:
        raise ValueError("cannot project a zero coefficient vector")
    trace = IterationTrace(iterates=[] if cfg.keep_iterates else None)
    iterations = 0
    converged = False
    while True:
        probe = rebuild(entries)
        rec = _find_violation(probe, fams, cfg)
        if rec is None:
            converged = True
            break
        if iterations >= cfg.max_iter:
            break
        rv = _riesz_for(rec.family, basis, rec.param)
        overshoot = float(rv.unit @ entries) - rv.offset
        new_entries = entries - max(0.0, overshoot) * rv.unit
        step = float(np.linalg.norm(new_entries - entries))
        entries = new_entries
        iterations += 1
        trace.append(rec.signed_distance, step, float(np.linalg.norm(entries)), entries)
    return SolveResult(rebuild(entries), iterations, converged, trace)


def relative_change(
    constrained,
    unconstrained,
    target,
    derivatives=None,
    breakpoints=(),
    tol: float = 1e-10,
) -> float:
    """Size of the constraint correction relative to the approximation error.

    Numerator: the exact norm of the coefficient difference (the coordinate
    map is an isometry).  Denominator: the unconstrained approximation
    error against the target, computed by adaptive quadrature.  When the
    target lies in the subspace the denominator vanishes and ``inf`` is
    returned as the sentinel.
    """
    c_entries, _, _ = _prepare(constrained)
    u_entries, basis, _ = _prepare(unconstrained)
    if basis is None:
        raise ValueError("relative_change needs Coefficients with a basis")
    if c_entries.shape != u_entries.shape:
        raise ValueError("coefficient vectors live in different subspaces")
    numerator = float(np.linalg.norm(c_entries - u_entries))
    denominator = approximation_error(
        unconstrained, target, derivatives=derivatives, breakpoints=breakpoints, tol=tol
    )
    if denominator < 1e-14 * max(1.0, numerator):
        return math.inf
    return numerator / denominator
