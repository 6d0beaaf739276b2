"""Geometric state of a convex hypersurface from its support function.

A strictly convex closed hypersurface enclosing the origin is parametrised by
its outward normal x (inverse Gauss map).  From the support function u alone
we derive the boundary embedding X = u x + Du, the radial distance
r = sqrt(u^2 + |Du|^2), the principal-radii matrix b = Hess u + u I, and the
Gauss curvature K = 1 / det b.  Non-convex states are representable (the flow
engine needs them to detect and reject trial steps); only quantities that
need K refuse to evaluate on them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GeometryError
from .sphere import (
    ScalarField,
    SphereGrid,
    SymMatrixField,
    VectorField,
    _grad_values,
    _hess_values,
    gradient,
    quadrature,
)

__all__ = [
    "BodyState",
    "UrReport",
    "assemble_state",
    "pushforward_weight",
    "support_radial_extrema_check",
    "support_from_radial_roundtrip",
]


@dataclass(frozen=True, eq=False)
class BodyState:
    """Support function plus every derived field, immutable after assembly.

    ``gauss_k`` is defined as 1 / det(b) pointwise, so K * det(b) == 1 holds
    by construction; on non-convex states it simply carries the sign of the
    determinant and ``strictly_convex`` is False.
    """

    grid: SphereGrid
    u: ScalarField
    du: VectorField
    b: SymMatrixField
    det_b: np.ndarray
    gauss_k: ScalarField
    positions: np.ndarray
    r: ScalarField
    min_eig_b: ScalarField
    max_eig_b: ScalarField
    strictly_convex: bool


def assemble_state(u: ScalarField) -> BodyState:
    """Populate all derived geometry of the body with support function u.

    Raises GeometryError when u <= 0 somewhere (origin not interior); a
    non-convex result does not raise, the ``strictly_convex`` flag carries
    the information and the caller decides.
    """
    grid = u.grid
    uv = u.values
    if np.min(uv) <= 0.0:
        raise GeometryError(f"origin not interior: min u = {np.min(uv):.6g} <= 0")

    dv = _grad_values(grid, uv)
    hv = _hess_values(grid, uv)

    bv = hv.copy()
    if grid.dim == 1:
        bv[:, 0] += uv
    else:
        bv[:, 0] += uv
        bv[:, 2] += uv
    b = SymMatrixField(grid, bv)

    det_b = b.det()
    with np.errstate(divide="ignore", over="ignore"):
        kv = 1.0 / det_b

    lo, hi = b.eig_bounds()
    rv = np.sqrt(uv * uv + np.sum(dv * dv, axis=1))

    du = VectorField(grid, dv)
    positions = uv[:, None] * grid.nodes + du.ambient()

    return BodyState(
        grid=grid,
        u=u,
        du=du,
        b=b,
        det_b=det_b,
        gauss_k=ScalarField(grid, kv),
        positions=positions,
        r=ScalarField(grid, rv),
        min_eig_b=ScalarField(grid, lo),
        max_eig_b=ScalarField(grid, hi),
        strictly_convex=bool(np.min(lo) > 0.0),
    )


def pushforward_weight(state: BodyState) -> ScalarField:
    """Jacobian density w = u / (r^{n+1} K) of ray measure against normal measure.

    Converts integrals over ray directions into integrals over the normal
    grid; its quadrature audits the discretisation (== |S^n| up to O(h^2)).
    """
    if not state.strictly_convex:
        raise GeometryError("pushforward weight needs a strictly convex state")
    n = state.grid.dim
    uv = state.u.values
    rv = state.r.values
    w = uv * state.det_b / rv ** (n + 1)
    return ScalarField(state.grid, w)


@dataclass(frozen=True)
class UrReport:
    """Support/radial extremum checks for a convex body.

    ``max_eq`` and ``min_eq`` are |max u - max r| and |min u - min r| (zero in
    the continuum).  ``support_min`` is min over nodes of
    u(x) - (x . x_max) u(x_max) and ``radial_min`` is min over nodes of
    r(xi_min) - r(xi) (xi . xi_min); both are nonnegative in the continuum.
    """

    max_eq: float
    min_eq: float
    support_min: float
    radial_min: float

    def passes(self, tol: float = 1e-8) -> bool:
        return (
            self.max_eq <= tol
            and self.min_eq <= tol
            and self.support_min >= -tol
            and self.radial_min >= -tol
        )


def support_radial_extrema_check(state: BodyState) -> UrReport:
    """Diagnostic residuals of the support/radial extremum identities."""
    uv = state.u.values
    rv = state.r.values
    nodes = state.grid.nodes

    i_max = int(np.argmax(uv))
    x_max = nodes[i_max]
    support_min = float(np.min(uv - (nodes @ x_max) * uv[i_max]))

    xi = state.positions / rv[:, None]
    i_min = int(np.argmin(rv))
    xi_min = xi[i_min]
    radial_min = float(np.min(rv[i_min] - rv * (xi @ xi_min)))

    return UrReport(
        max_eq=float(abs(np.max(uv) - np.max(rv))),
        min_eq=float(abs(np.min(uv) - np.min(rv))),
        support_min=support_min,
        radial_min=radial_min,
    )


def _radial_resample_circle(state: BodyState) -> tuple[np.ndarray, np.ndarray]:
    """Interpolate (r, u) from scattered ray angles onto the grid angles.

    Periodic cubic interpolation: the resampled field gets differenced again
    downstream, and the derivative of a piecewise-linear interpolant carries
    O(h) noise that would mask the O(h^2) signal this diagnostic reports.
    """
    from scipy.interpolate import CubicSpline

    grid = state.grid
    ang = np.mod(np.arctan2(state.positions[:, 1], state.positions[:, 0]), 2.0 * np.pi)
    order = np.argsort(ang)
    xp = ang[order]
    two_pi = 2.0 * np.pi

    def interp(values: np.ndarray) -> np.ndarray:
        fp = values[order]
        spline = CubicSpline(
            np.concatenate([xp, [xp[0] + two_pi]]),
            np.concatenate([fp, [fp[0]]]),
            bc_type="periodic",
        )
        return spline(grid.angles[0])

    return interp(state.r.values), interp(state.u.values)


def _radial_resample_sphere(state: BodyState) -> tuple[np.ndarray, np.ndarray]:
    """Resample (r, u) onto S^2 grid directions.

    The radial function is evaluated from the support samples through
    r(xi) = min_i u_i / <xi, x_i>, which is exact for the polytope hull and
    second order for smooth bodies; u along a ray is taken from the nearest
    scattered ray (first-order, diagnostic use only).
    """
    grid = state.grid
    rv = state.r.values
    xi = state.positions / rv[:, None]
    dots = grid.nodes @ grid.nodes.T
    with np.errstate(divide="ignore"):
        ratios = np.where(dots > 1e-9, state.u.values[None, :] / dots, np.inf)
    r_grid = np.min(ratios, axis=1)
    nearest = np.argmax(grid.nodes @ xi.T, axis=1)
    return r_grid, state.u.values[nearest]


def support_from_radial_roundtrip(state: BodyState) -> float:
    """Consistency mismatch of u against r^2 / sqrt(r^2 + |Dr|^2).

    The radial samples live at the scattered ray directions xi = X / |X|;
    they are resampled onto the grid (linear interpolation on S^1, support
    evaluation on S^2) before differencing.  Expected O(h^2) plus
    interpolation error for smooth bodies; diagnostic only.
    """
    if not state.strictly_convex:
        raise GeometryError("roundtrip diagnostic needs a strictly convex state")
    grid = state.grid
    if grid.dim == 1:
        r_grid, u_ray = _radial_resample_circle(state)
    else:
        r_grid, u_ray = _radial_resample_sphere(state)
    dr = _grad_values(grid, r_grid)
    u_check = r_grid * r_grid / np.sqrt(r_grid * r_grid + np.sum(dr * dr, axis=1))
    return float(np.max(np.abs(u_check - u_ray)))
