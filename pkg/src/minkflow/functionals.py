"""Scalar functionals monitored along the flow.

All ray-direction integrals are evaluated on the normal grid through the
pushforward weight w = u / (r^{n+1} K) rather than by resampling onto a ray
grid; the identity quadrature(w) = |S^n| continuously audits that weight.
The normalisation ratio doubles as the eigenvalue estimate: lambda is always
the current theta, never a separate fit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GeometryError
from .geometry import BodyState
from .orlicz import DensitySpec, PhiSpec
from .sphere import ScalarField

__all__ = [
    "FunctionalSnapshot",
    "theta",
    "v_phi",
    "j_phi",
    "ma_residual",
    "snapshot",
]


@dataclass(frozen=True)
class FunctionalSnapshot:
    """One row of monitored functionals at flow time t."""

    t: float
    theta: float
    v_phi: float
    j_phi: float
    residual_sup: float
    residual_l2: float
    lambda_est: float


def _require_convex(state: BodyState) -> None:
    if not state.strictly_convex:
        raise GeometryError("functional needs a strictly convex state")


def _pushforward(state: BodyState) -> np.ndarray:
    n = state.grid.dim
    return state.u.values * state.det_b / state.r.values ** (n + 1)


def theta(state: BodyState, density: DensitySpec, phi: PhiSpec) -> float:
    """Normalisation ratio: integral of phi(r) over rays / integral of f."""
    _require_convex(state)
    grid = state.grid
    f = density.sample(grid)
    num = float(np.dot(grid.weights, phi(state.r.values) * _pushforward(state)))
    den = float(np.dot(grid.weights, f))
    return num / den


def v_phi(state: BodyState, phi: PhiSpec) -> float:
    """Conserved radial volume: integral of Phi(r) over ray directions.

    In base-point mode the value carries a constant offset, which cancels in
    every conservation check.
    """
    _require_convex(state)
    grid = state.grid
    cap = phi.capital()
    return float(np.dot(grid.weights, cap(state.r.values) * _pushforward(state)))


def j_phi(state: BodyState, density: DensitySpec) -> float:
    """Entropy functional: integral of log(u) f over normal directions."""
    uv = state.u.values
    if np.min(uv) <= 0.0:
        raise GeometryError("entropy functional needs u > 0")
    grid = state.grid
    return float(np.dot(grid.weights, np.log(uv) * density.sample(grid)))


def ma_residual(
    state: BodyState, density: DensitySpec, phi: PhiSpec, lam: float
) -> tuple[ScalarField, float, float]:
    """Pointwise stationary-equation residual and its sup / L2 norms.

    R(x) = u phi(r) / r^{n+1} * det(b) - lam f(x); the L2 norm is quadrature
    weighted, so residual_sup >= residual_l2 / sqrt(|S^n|).
    """
    _require_convex(state)
    if lam <= 0:
        raise ValueError(f"lambda must be positive, got {lam:g}")
    grid = state.grid
    n = grid.dim
    f = density.sample(grid)
    lhs = state.u.values * phi(state.r.values) / state.r.values ** (n + 1) * state.det_b
    res = lhs - lam * f
    sup = float(np.max(np.abs(res)))
    l2 = float(np.sqrt(np.dot(grid.weights, res * res)))
    return ScalarField(grid, res), sup, l2


def snapshot(state: BodyState, density: DensitySpec, phi: PhiSpec, t: float = 0.0) -> FunctionalSnapshot:
    """Evaluate every monitored functional on one state, lambda = theta."""
    th = theta(state, density, phi)
    _, sup, l2 = ma_residual(state, density, phi, th)
    return FunctionalSnapshot(
        t=t,
        theta=th,
        v_phi=v_phi(state, phi),
        j_phi=j_phi(state, density),
        residual_sup=sup,
        residual_l2=l2,
        lambda_est=th,
    )
