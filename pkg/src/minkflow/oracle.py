"""Independent stationary solver and closed-form validation bodies.

The Newton solver attacks the discrete stationary system on S^1 directly:

    u phi(r) / r^2 * (u'' + u) - lambda f = 0   at every node,
    V(u) - V_target = 0,

with unknowns (u, lambda).  The volume constraint selects the same solution
the flow reaches (the flow conserves V), so converged flow limits can be
cross-validated against an integrator-free computation.  The Jacobian is
assembled analytically from the same difference operators the flow uses and
is verified against central finite differences.

The solver is deliberately restricted to S^1: a full two-dimensional
Monge-Ampere Newton solve is a project of its own, and flow runs on S^2 are
validated through residuals, conservation, and refinement studies instead.

Ellipse closed forms (support, curvature radius, boundary points) provide
exact references for the geometry tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError
from .geometry import BodyState, assemble_state
from .orlicz import DensitySpec, PhiSpec
from .sphere import ScalarField, SphereGrid, SymMatrixField, VectorField

__all__ = [
    "NewtonProblem",
    "NewtonResult",
    "newton_solve",
    "jacobian_fd_check",
    "ellipse_support",
    "ellipse_oracle",
]


@dataclass
class NewtonProblem:
    """Stationary problem data on an S^1 grid with a volume constraint."""

    grid: SphereGrid
    phi: PhiSpec
    density: DensitySpec
    v_target: float
    res_tol: float = 1e-12
    max_iter: int = 100
    max_backtracks: int = 30
    _ops: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.grid.dim != 1:
            raise GeometryError("oracle is n=1 only")

    def operators(self) -> tuple[np.ndarray, np.ndarray]:
        """Dense circulant first/second difference matrices (trig-exact)."""
        if "D1" not in self._ops:
            n = self.grid.node_count
            st = self.grid.stencil
            eye = np.eye(n)
            up = np.roll(eye, -1, axis=1)
            dn = np.roll(eye, 1, axis=1)
            self._ops["D1"] = (up - dn) / st["den1"]
            self._ops["D2"] = (up - 2.0 * eye + dn) / st["den2"]
        return self._ops["D1"], self._ops["D2"]


@dataclass
class NewtonResult:
    u: np.ndarray
    lam: float
    converged: bool
    iterations: int
    residual_history: list[float]
    message: str


def _residual(problem: NewtonProblem, u: np.ndarray, lam: float) -> np.ndarray:
    d1, d2 = problem.operators()
    f = problem.density.sample(problem.grid)
    cap = problem.phi.capital()
    du = d1 @ u
    b = d2 @ u + u
    r = np.sqrt(u * u + du * du)
    amp = u * problem.phi(r) / (r * r)
    g_main = amp * b - lam * f
    v = float(np.dot(problem.grid.weights, cap(r) * u * b / (r * r)))
    return np.concatenate([g_main, [v - problem.v_target]])


def _jacobian(problem: NewtonProblem, u: np.ndarray, lam: float) -> np.ndarray:
    d1, d2 = problem.operators()
    grid = problem.grid
    f = problem.density.sample(grid)
    phi = problem.phi
    cap = phi.capital()
    w = grid.weights
    n = grid.node_count

    du = d1 @ u
    b = d2 @ u + u
    r = np.sqrt(u * u + du * du)
    phir = phi(r)
    phip = phi.prime(r)

    # dr/du = diag(u/r) + diag(du/r) D1
    drdu = np.diag(u / r) + (du / r)[:, None] * d1

    amp = u * phir / (r * r)
    damp_direct = phir / (r * r)                      # d(amp)/du at fixed r
    damp_dr = u * (phip * r - 2.0 * phir) / r ** 3    # d(amp)/dr

    curv = d2 + np.eye(n)
    j_uu = amp[:, None] * curv + np.diag(b * damp_direct) + (b * damp_dr)[:, None] * drdu
    j_ul = -f[:, None]

    # volume row: V = w . [Phi(r) u b / r^2]
    capr = cap(r)
    row_r = w * (phir / r * u * b / (r * r) - 2.0 * capr * u * b / r ** 3)
    row_u = w * capr * b / (r * r)
    row_curv = w * capr * u / (r * r)
    j_vu = row_r @ drdu + row_u + row_curv @ curv

    top = np.concatenate([j_uu, j_ul], axis=1)
    bottom = np.concatenate([j_vu, [0.0]])[None, :]
    return np.concatenate([top, bottom], axis=0)


def _strictly_admissible(problem: NewtonProblem, u: np.ndarray) -> bool:
    if np.min(u) <= 0.0 or not np.all(np.isfinite(u)):
        return False
    _, d2 = problem.operators()
    return float(np.min(d2 @ u + u)) > 0.0


def newton_solve(problem: NewtonProblem, u_init: ScalarField) -> NewtonResult:
    """Damped Newton iteration on (u, lambda) with a convexity line search.

    Steps backtrack until the iterate stays positive and strictly convex and
    the residual sup-norm decreases; quadratic convergence shows up as
    residual ratios <= 0.1 over the final iterations.

    Admissible starting bodies in the tested regime land on the same
    solution (the volume constraint removes the scaling freedom), but no
    global uniqueness is claimed: a solver that stalls simply reports, and
    the caller may retry from a different initial body.
    """
    u = np.asarray(u_init.values, dtype=float).copy()
    if not _strictly_admissible(problem, u):
        raise GeometryError("newton initial guess must be positive and strictly convex")

    st = assemble_state(ScalarField(problem.grid, u))
    from .functionals import theta as theta_fn

    lam = theta_fn(st, problem.density, problem.phi)
    g = _residual(problem, u, lam)
    g_norm = float(np.max(np.abs(g)))
    history = [g_norm]

    for it in range(1, problem.max_iter + 1):
        if g_norm <= problem.res_tol:
            return NewtonResult(u, lam, True, it - 1, history, "converged")
        jac = _jacobian(problem, u, lam)
        try:
            delta = np.linalg.solve(jac, -g)
        except np.linalg.LinAlgError:
            return NewtonResult(u, lam, False, it - 1, history, "singular jacobian")

        scale = 1.0
        for _ in range(problem.max_backtracks + 1):
            u_try = u + scale * delta[:-1]
            lam_try = lam + scale * delta[-1]
            if _strictly_admissible(problem, u_try) and lam_try > 0.0:
                g_try = _residual(problem, u_try, lam_try)
                g_try_norm = float(np.max(np.abs(g_try)))
                if g_try_norm <= (1.0 - 1e-4 * scale) * g_norm:
                    break
            scale *= 0.5
        else:
            return NewtonResult(u, lam, False, it, history, "line search stalled")

        u, lam, g, g_norm = u_try, lam_try, g_try, g_try_norm
        history.append(g_norm)

    converged = g_norm <= problem.res_tol
    msg = "converged" if converged else "max_iter exceeded"
    return NewtonResult(u, lam, converged, problem.max_iter, history, msg)


def jacobian_fd_check(problem: NewtonProblem, u: ScalarField, lam: float | None = None) -> float:
    """Max entrywise relative gap between the analytic Jacobian and central FD.

    Perturbation size 1e-6 * max(1, |z_j|) per unknown; the relative gap uses
    max(|analytic|, |fd|, 1e-6 * max|analytic|) as denominator.
    """
    uv = np.asarray(u.values, dtype=float)
    if lam is None:
        st = assemble_state(ScalarField(problem.grid, uv))
        from .functionals import theta as theta_fn

        lam = theta_fn(st, problem.density, problem.phi)

    z = np.concatenate([uv, [lam]])
    jac = _jacobian(problem, uv, lam)

    m = len(z)
    fd = np.empty_like(jac)
    for jcol in range(m):
        eps = 1e-6 * max(1.0, abs(z[jcol]))
        zp = z.copy()
        zm = z.copy()
        zp[jcol] += eps
        zm[jcol] -= eps
        gp = _residual(problem, zp[:-1], zp[-1])
        gm = _residual(problem, zm[:-1], zm[-1])
        fd[:, jcol] = (gp - gm) / (2.0 * eps)

    floor = 1e-6 * max(1.0, float(np.max(np.abs(jac))))
    denom = np.maximum(np.maximum(np.abs(jac), np.abs(fd)), floor)
    return float(np.max(np.abs(jac - fd) / denom))


# ---------------------------------------------------------------------------
# closed-form ellipse references
# ---------------------------------------------------------------------------


def ellipse_support(a: float, b: float, theta: np.ndarray) -> np.ndarray:
    """Support function of the origin-centred axis-aligned ellipse."""
    return np.sqrt((a * np.cos(theta)) ** 2 + (b * np.sin(theta)) ** 2)


def ellipse_oracle(a: float, b: float, grid: SphereGrid) -> BodyState:
    """Exact BodyState of an ellipse, bypassing difference operators.

    Closed forms: support sqrt(a^2 cos^2 + b^2 sin^2), curvature radius
    a^2 b^2 / u^3, boundary point (a^2 cos / u, b^2 sin / u).  Serves as
    ground truth for the assembled geometry.
    """
    if a <= 0 or b <= 0:
        raise ValueError("ellipse semi-axes must be positive")
    if grid.dim != 1:
        raise GeometryError("ellipse oracle lives on S^1")
    theta = grid.angles[0]
    cs, sn = np.cos(theta), np.sin(theta)
    u = np.sqrt((a * cs) ** 2 + (b * sn) ** 2)
    du = (b * b - a * a) * sn * cs / u
    curv_radius = (a * b) ** 2 / u ** 3
    positions = np.stack([a * a * cs / u, b * b * sn / u], axis=1)
    r = np.sqrt(np.sum(positions * positions, axis=1))
    return BodyState(
        grid=grid,
        u=ScalarField(grid, u),
        du=VectorField(grid, du[:, None]),
        b=SymMatrixField(grid, curv_radius[:, None]),
        det_b=curv_radius.copy(),
        gauss_k=ScalarField(grid, 1.0 / curv_radius),
        positions=positions,
        r=ScalarField(grid, r),
        min_eig_b=ScalarField(grid, curv_radius.copy()),
        max_eig_b=ScalarField(grid, curv_radius.copy()),
        strictly_convex=True,
    )
