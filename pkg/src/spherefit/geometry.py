"""Geometry on origin-centered spheres in R^N.

Distances, geodesics, exponential/logarithm maps, nearest-point projections
onto half-space caps (through the origin or affine), and the weighted Karcher
mean.  All functions treat the sphere S_r = {x : ||x|| = r} intrinsically:
distances are arc lengths, and every projection returns a point with the same
radius as its input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

__all__ = [
    "SpherePoint",
    "TangentVector",
    "intrinsic_distance",
    "geodesic_point",
    "exp_map",
    "log_map",
    "hemisphere_projection",
    "affine_hemisphere_projection",
    "karcher_mean",
    "ParallelNormalError",
]

# Below this relative size, a component orthogonal to a sphere point is
# considered zero (parallel / antipodal detection).
PARALLEL_TOL = 1e-13

_KARCHER_MAX_ITER = 500


class ParallelNormalError(ValueError):
    """The point is (anti)parallel to a half-space normal: no unique nearest
    point on the boundary sphere-cap exists."""


@dataclass(frozen=True)
class SpherePoint:
    """A point on the origin-centered sphere of radius ``radius``.

    Coordinates are renormalized on construction so that
    ``|norm(coords) - radius| <= 1e-12 * radius`` holds exactly.
    """

    coords: NDArray[np.float64]
    radius: float

    def __post_init__(self) -> None:
        coords = np.asarray(self.coords, dtype=float)
        if coords.ndim != 1 or coords.size < 2:
            raise ValueError("SpherePoint needs a 1-d coordinate vector of length >= 2")
        if not (self.radius > 0):
            raise ValueError(f"radius must be positive, got {self.radius}")
        norm = float(np.linalg.norm(coords))
        if norm == 0.0:
            raise ValueError("cannot place the origin on a sphere")
        coords = coords * (self.radius / norm)
        coords.flags.writeable = False
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self) -> int:
        return self.coords.size

    def unit(self) -> NDArray[np.float64]:
        return self.coords / self.radius


@dataclass(frozen=True)
class TangentVector:
    """A vector in the tangent space of the sphere at ``base``."""

    base: SpherePoint
    direction: NDArray[np.float64]

    def __post_init__(self) -> None:
        direction = np.asarray(self.direction, dtype=float)
        if direction.shape != self.base.coords.shape:
            raise ValueError("tangent direction must match the base point dimension")
        size = float(np.linalg.norm(direction))
        radial = float(direction @ self.base.coords)
        if abs(radial) > 1e-10 * self.base.radius * max(size, 1e-300):
            raise ValueError(
                f"direction is not tangent at base: <dir, base> = {radial:.3e}"
            )
        direction = direction.copy()
        direction.flags.writeable = False
        object.__setattr__(self, "direction", direction)

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.direction))


def _clamped_cos(u: NDArray, w: NDArray) -> float:
    # Inputs are unit vectors; clamp guards roundoff beyond [-1, 1].
    return float(np.clip(u @ w, -1.0, 1.0))


def _unit_angle(u: NDArray, w: NDArray) -> float:
    # atan2 of (sine, cosine) stays fully accurate for tiny and near-pi
    # angles, where acos of the inner product loses up to 8 digits.
    c = _clamped_cos(u, w)
    perp = w - c * u
    return math.atan2(float(np.linalg.norm(perp)), c)


def _check_same_sphere(u: SpherePoint, w: SpherePoint) -> None:
    if u.dim != w.dim:
        raise ValueError(f"dimension mismatch: {u.dim} vs {w.dim}")
    if abs(u.radius - w.radius) > 1e-12 * max(u.radius, w.radius):
        raise ValueError(f"radius mismatch: {u.radius} vs {w.radius}")


def intrinsic_distance(u: SpherePoint, w: SpherePoint) -> float:
    """Great-circle (arc-length) distance between two points of equal radius."""
    _check_same_sphere(u, w)
    return u.radius * _unit_angle(u.unit(), w.unit())


def geodesic_point(u: SpherePoint, w: SpherePoint, t: float) -> SpherePoint:
    """Point at arc length ``t`` along the geodesic from ``u`` toward ``w``.

    Requires ``0 <= t <= d(u, w)`` and a unique connecting geodesic
    (``u != w`` and ``u != -w``).  Endpoints are reproduced exactly.
    """
    _check_same_sphere(u, w)
    r = u.radius
    u_hat, w_hat = u.unit(), w.unit()
    d_unit = _unit_angle(u_hat, w_hat)
    if d_unit < 1e-15:
        raise ValueError("geodesic segment is degenerate: identical endpoints")
    if math.pi - d_unit < 1e-15:
        raise ValueError("geodesic between antipodal points is not unique")
    t_unit = t / r
    if t_unit < -1e-15 or t_unit > d_unit + 1e-15:
        raise ValueError(f"arc length t={t} outside [0, {d_unit * r}]")
    if t_unit <= 0.0:
        return u
    if t_unit >= d_unit:
        return w
    coords = (
        u_hat * math.sin(d_unit - t_unit) + w_hat * math.sin(t_unit)
    ) / math.sin(d_unit)
    return SpherePoint(coords * r, r)


def exp_map(base: SpherePoint, v: TangentVector) -> SpherePoint:
    """Follow the geodesic from ``base`` with initial direction ``v``.

    The geodesic is traversed for arc length ``|v|``; a zero tangent vector
    maps to ``base`` itself (the continuous limit of the formula).
    """
    if v.base is not base and not np.array_equal(v.base.coords, base.coords):
        raise ValueError("tangent vector is not based at the given point")
    r = base.radius
    length = v.length
    if length == 0.0:
        return base
    theta = length / r
    coords = base.coords * math.cos(theta) + (v.direction / length) * (
        r * math.sin(theta)
    )
    return SpherePoint(coords, r)


def log_map(base: SpherePoint, target: SpherePoint) -> TangentVector:
    """Tangent vector at ``base`` whose exponential reaches ``target``.

    Inverse of :func:`exp_map` for non-antipodal pairs; the result has length
    ``intrinsic_distance(base, target)``.
    """
    _check_same_sphere(base, target)
    r = base.radius
    b_hat, t_hat = base.unit(), target.unit()
    cos_d = _clamped_cos(b_hat, t_hat)
    perp = t_hat - cos_d * b_hat
    # One re-orthogonalization pass: the subtraction leaves radial roundoff
    # at the scale of the inputs, which dominates when perp is tiny.
    perp -= (perp @ b_hat) * b_hat
    perp_norm = float(np.linalg.norm(perp))
    if perp_norm < PARALLEL_TOL:
        if cos_d > 0.0:
            return TangentVector(base, np.zeros_like(base.coords))
        raise ValueError("log map is undefined for antipodal points")
    length = r * math.atan2(perp_norm, cos_d)
    return TangentVector(base, perp * (length / perp_norm))


def hemisphere_projection(p: SpherePoint, normal: NDArray) -> SpherePoint:
    """Nearest point of the cap {x on sphere : <normal, x> <= 0} to ``p``.

    ``normal`` is the unit normal of the bounding hyperplane through the
    origin.  Feasible inputs are returned unchanged; otherwise ``p`` is
    projected onto the hyperplane and rescaled back to the sphere.  Raises
    when ``p`` is (anti)parallel to ``normal``, in which case every point of
    the bounding great circle is equally close and the projection is not
    unique.
    """
    normal = np.asarray(normal, dtype=float)
    if normal.shape != p.coords.shape:
        raise ValueError("normal must match the point dimension")
    n_norm = float(np.linalg.norm(normal))
    if n_norm == 0.0:
        raise ValueError("zero normal vector")
    unit_n = normal / n_norm
    side = float(unit_n @ p.coords)
    if side <= 0.0:
        return p
    planar = p.coords - side * unit_n
    planar_norm = float(np.linalg.norm(planar))
    if planar_norm / p.radius < PARALLEL_TOL:
        raise ParallelNormalError(
            "point is parallel to the constraint normal; projection is not unique"
        )
    return SpherePoint(planar * (p.radius / planar_norm), p.radius)


def affine_hemisphere_projection(
    p: SpherePoint, normal: NDArray, offset: float
) -> SpherePoint:
    """Nearest point of the cap {x on sphere : <normal, x> <= offset} to ``p``.

    The bounding hyperplane does not pass through the origin when
    ``offset != 0``.  The sphere must reach the plane: with the plane's
    closest point to the origin (the cap vertex) at ``offset * normal``, the
    radius of ``p`` must exceed ``|offset|``.  A violating ``p`` is projected
    onto the plane and then pushed away from the vertex until it returns to
    the sphere, which keeps it on the plane.
    """
    normal = np.asarray(normal, dtype=float)
    n_norm = float(np.linalg.norm(normal))
    if n_norm == 0.0:
        raise ValueError("zero normal vector")
    unit_n = normal / n_norm
    c = offset / n_norm
    side = float(unit_n @ p.coords)
    if side <= c:
        return p
    vertex = c * unit_n
    vertex_norm = abs(c)
    if p.radius <= vertex_norm:
        raise ValueError(
            f"sphere of radius {p.radius} does not reach the plane at distance {vertex_norm}"
        )
    on_plane = p.coords - (side - c) * unit_n
    spoke = on_plane - vertex
    spoke_norm_sq = float(spoke @ spoke)
    if spoke_norm_sq < (PARALLEL_TOL * p.radius) ** 2:
        raise ParallelNormalError(
            "point projects onto the cap vertex; projection is not unique"
        )
    stretch = math.sqrt((p.radius**2 - vertex_norm**2) / spoke_norm_sq)
    return SpherePoint(vertex + stretch * spoke, p.radius)


def karcher_mean(
    points: list[SpherePoint],
    weights: NDArray | list[float],
    tol: float = 1e-12,
    max_iter: int = _KARCHER_MAX_ITER,
    hemisphere_normal: NDArray | None = None,
) -> SpherePoint:
    """Weighted Karcher mean (intrinsic center of mass) of sphere points.

    Minimizes ``0.5 * sum_i w_i * d(q, p_i)^2`` by fixed-point iteration:
    starting from the rescaled extrinsic mean, repeatedly move along the
    weighted mean of the log-map images until its norm drops to
    ``tol * radius``.  The minimizer is unique when all points lie in one
    open hemisphere, which is verified before iterating.

    Parameters
    ----------
    points : list of SpherePoint
        Points of equal radius.
    weights : array-like
        Nonnegative weights summing to one.
    tol : float
        Relative residual tolerance; the iteration stops when the tangent
        update is shorter than ``tol * radius``.
    hemisphere_normal : array, optional
        A direction known to have positive inner product with every input
        point.  When omitted, the weighted extrinsic mean is used as the
        certificate, which can falsely reject widely spread configurations
        that a caller may know to be valid.
    """
    if not points:
        raise ValueError("karcher_mean needs at least one point")
    w = np.asarray(weights, dtype=float)
    if w.shape != (len(points),):
        raise ValueError("one weight per point required")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    total = float(w.sum())
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"weights must sum to 1, got {total}")
    w = w / total

    r = points[0].radius
    for p in points[1:]:
        _check_same_sphere(points[0], p)

    keep = w > 0.0
    pts = np.stack([p.coords for p in points])[keep]
    unit = _mean_of_units(pts / r, w[keep], tol, max_iter, hemisphere_normal)
    return SpherePoint(unit * r, r)


def _mean_of_units(units, w, tol=1e-12, max_iter=_KARCHER_MAX_ITER, hemisphere_normal=None):
    """Karcher fixed-point loop on the unit sphere; rows of ``units`` must
    be unit vectors and ``w`` positive weights summing to one."""
    if hemisphere_normal is not None:
        candidate = np.asarray(hemisphere_normal, dtype=float)
    else:
        candidate = w @ units
    cand_norm = float(np.linalg.norm(candidate))
    if cand_norm == 0.0 or np.min(units @ (candidate / cand_norm)) <= 0.0:
        raise ValueError(
            "points do not verifiably lie in one open hemisphere; "
            "pass hemisphere_normal if the configuration is known to be valid"
        )

    if hemisphere_normal is not None:
        start = w @ units
        if float(np.linalg.norm(start)) == 0.0:
            start = candidate
    else:
        start = candidate
    q = start / float(np.linalg.norm(start))

    for _ in range(max_iter):
        cos_angles = np.clip(units @ q, -1.0, 1.0)
        perp = units - np.outer(cos_angles, q)
        perp_norms = np.linalg.norm(perp, axis=1)
        angles = np.arctan2(perp_norms, cos_angles)
        # Points at the base contribute a zero tangent.
        safe = perp_norms > 1e-300
        factors = np.zeros_like(perp_norms)
        factors[safe] = angles[safe] / perp_norms[safe]
        update = (w * factors) @ perp
        step = float(np.linalg.norm(update))
        if step <= tol:
            return q
        q = q * math.cos(step) + (update / step) * math.sin(step)
        q /= float(np.linalg.norm(q))

    raise RuntimeError(
        f"Karcher mean did not reach residual {tol:g} within {max_iter} iterations"
    )
