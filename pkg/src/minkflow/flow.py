"""Time integration of the normalised curvature flow for the support function.

The support function obeys du/dt = -theta(t) f(x) r^{n+1} K / phi(r) + u,
where theta is the global normalisation ratio; every origin-centred sphere
is a stationary point of the discrete update, bitwise.

Scheme and safeguards:

* explicit midpoint (second order); the nonlocal ratio theta is re-evaluated
  at the midpoint stage, which keeps the coupled ODE second order in dt;
* a trial step is rejected when convexity is lost (smallest eigenvalue of
  the curvature matrix at or below 1e-8 of the largest), when u dips to 0,
  when the entropy functional increases beyond rounding allowance, or when
  anything goes non-finite;
* dt halves on rejection (guard trip once dt_min itself is rejected) and
  grows by the safety factor after three consecutive acceptances, capped by
  dt_max and by a parabolic stability ceiling
  0.4 h^2 min[min_eig_b phi(r) / (theta f r^{n+1} K)];
* stopping: stationary-equation residual at lambda = current theta under
  tol_stop together with a theta drift under tol_theta across a window of
  accepted steps.

The run loop works on a light array-level state (support, gradient,
curvature matrix, radial field) and only materialises the full BodyState for
the returned terminal state; both paths use the same stencils.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigError, GeometryError
from .functionals import FunctionalSnapshot
from .geometry import BodyState, assemble_state
from .orlicz import DensitySpec, PhiSpec, check_case_i, check_case_ii
from .sphere import ScalarField, SphereGrid, antipodal_mismatch, _grad_values, _hess_values

__all__ = [
    "FlowConfig",
    "FlowDiagnostics",
    "FlowResult",
    "StepOutcome",
    "rhs",
    "step",
    "run",
    "DIAGNOSTIC_COLUMNS",
]

CFL_FACTOR = 0.4
CONVEXITY_EPS = 1e-8
MONO_EPS = 1e-10
THETA_BAND = 10.0

REASON_CONVEXITY = "convexity lost"
REASON_POSITIVITY = "support nonpositive"
REASON_NONFINITE = "nonfinite values"
REASON_ENTROPY = "entropy increase"

DIAGNOSTIC_COLUMNS = (
    "step",
    "t",
    "dt",
    "theta",
    "v_phi",
    "j_phi",
    "residual_sup",
    "residual_l2",
    "u_min",
    "u_max",
    "grad_ratio_max",
    "K_max",
    "min_eig_b_min",
    "max_eig_b_max",
    "rejected",
)


@dataclass
class FlowConfig:
    """Everything one flow run needs; validation happens when run() starts."""

    grid: SphereGrid
    phi: PhiSpec
    density: DensitySpec
    u0: np.ndarray
    case: str = "ii"
    dt0: float | None = None          # default 0.1 h^2 * mean(u0)
    dt_min: float | None = None       # default dt0 * 1e-6
    dt_max: float = 1.0
    safety: float = 1.3
    tol_stop: float = 1e-8
    tol_theta: float = 1e-9
    theta_window: int = 50
    max_steps: int = 200_000
    seed: int = 0

    def resolved_dt0(self) -> float:
        if self.dt0 is not None:
            return float(self.dt0)
        h = self.grid.spacing
        return 0.1 * h * h * float(np.mean(self.u0))

    def resolved_dt_min(self) -> float:
        if self.dt_min is not None:
            return float(self.dt_min)
        return self.resolved_dt0() * 1e-6


@dataclass
class FlowDiagnostics:
    """Per accepted step records, one row per DIAGNOSTIC_COLUMNS entry."""

    columns: tuple[str, ...]
    data: np.ndarray
    reject_reasons: dict[str, int]
    even_mismatch_max: float

    def column(self, name: str) -> np.ndarray:
        return self.data[:, self.columns.index(name)]

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    def v_phi_drift(self) -> float:
        """max_t |V(t) - V(0)| / max(|V(0)|, 1) over the accepted trajectory."""
        v = self.column("v_phi")
        return float(np.max(np.abs(v - v[0])) / max(abs(v[0]), 1.0))


@dataclass
class FlowResult:
    state: BodyState
    lambda0: float
    status: str  # converged | max_steps | guard_tripped
    diagnostics: FlowDiagnostics
    accepted_steps: int
    wall_time_s: float
    r_range: tuple[float, float]
    guard_message: str | None = None


@dataclass
class StepOutcome:
    accepted: bool
    state: BodyState | None
    reason: str | None
    j_phi: float | None = None


class _LightState:
    """Array-level geometry of one support field, hot-loop representation."""

    __slots__ = ("uv", "du", "grad_norm", "r", "detb", "min_eig", "max_eig")

    def __init__(self, uv, du, grad_norm, r, detb, min_eig, max_eig):
        self.uv = uv
        self.du = du
        self.grad_norm = grad_norm
        self.r = r
        self.detb = detb
        self.min_eig = min_eig
        self.max_eig = max_eig


class _Engine:
    """Shared machinery behind the public rhs/step/run entry points."""

    def __init__(self, grid: SphereGrid, phi: PhiSpec, density: DensitySpec):
        self.grid = grid
        self.phi = phi
        self.density = density
        self.f = density.sample(grid)
        self.w = grid.weights
        self.f_total = float(np.dot(self.w, self.f))
        self.cap = phi.capital()
        self.n = grid.dim
        if grid.dim == 1:
            st = grid.stencil
            self._c_d1 = 1.0 / st["den1"]
            self._c_d2 = 1.0 / st["den2"]
            n = grid.node_count
            self._vp = np.empty(n)
            self._vm = np.empty(n)

    # -- light geometry ----------------------------------------------------

    def light(self, uv: np.ndarray) -> tuple[_LightState | None, str | None]:
        if not np.all(np.isfinite(uv)):
            return None, REASON_NONFINITE
        if np.min(uv) <= 0.0:
            return None, REASON_POSITIVITY
        if self.grid.dim == 1:
            vp, vm = self._vp, self._vm
            vp[:-1] = uv[1:]
            vp[-1] = uv[0]
            vm[1:] = uv[:-1]
            vm[0] = uv[-1]
            du = (vp - vm) * self._c_d1
            # (x + z) - 2 y grouping keeps the sum bitwise antipodally symmetric
            b = ((vp + vm) - 2.0 * uv) * self._c_d2 + uv
            grad_norm = np.abs(du)
            r = np.sqrt(uv * uv + du * du)
            ls = _LightState(uv, du, grad_norm, r, b, b, b)
        else:
            du = _grad_values(self.grid, uv)
            hv = _hess_values(self.grid, uv)
            b11 = hv[:, 0] + uv
            b12 = hv[:, 1]
            b22 = hv[:, 2] + uv
            detb = b11 * b22 - b12 * b12
            mean = 0.5 * (b11 + b22)
            disc = np.sqrt((0.5 * (b11 - b22)) ** 2 + b12 * b12)
            grad_sq = du[:, 0] ** 2 + du[:, 1] ** 2
            grad_norm = np.sqrt(grad_sq)
            r = np.sqrt(uv * uv + grad_sq)
            ls = _LightState(uv, du, grad_norm, r, detb, mean - disc, mean + disc)
        lo = float(np.min(ls.min_eig))
        hi = float(np.max(ls.max_eig))
        if lo <= CONVEXITY_EPS * hi:
            return None, REASON_CONVEXITY
        return ls, None

    def light_from_body(self, st: BodyState) -> _LightState:
        return _LightState(
            st.u.values,
            st.du.values,
            st.du.norm(),
            st.r.values,
            st.det_b,
            st.min_eig_b.values,
            st.max_eig_b.values,
        )

    def _rn1(self, r: np.ndarray) -> np.ndarray:
        return r * r if self.n == 1 else r * r * r

    def rhs_pack(self, ls: _LightState):
        """(k1, theta, phir, push): flow velocity plus reusable intermediates."""
        rn1 = self._rn1(ls.r)
        phir = self.phi(ls.r)
        push = ls.uv * ls.detb / rn1
        th = float(np.dot(self.w, phir * push)) / self.f_total
        k1 = ls.uv - th * self.f * rn1 / (phir * ls.detb)
        return k1, th, phir, push

    def j(self, uv: np.ndarray) -> float:
        return float(np.dot(self.w, np.log(uv) * self.f))

    def snapshot_from(self, ls: _LightState, t: float, pack=None) -> tuple[FunctionalSnapshot, float]:
        if pack is None:
            pack = self.rhs_pack(ls)
        _, th, phir, push = pack
        pp = phir * push
        res = pp - th * self.f
        sup = float(np.max(np.abs(res)))
        l2 = float(np.sqrt(np.dot(self.w, res * res)))
        v = float(np.dot(self.w, self.cap(ls.r) * push))
        snap = FunctionalSnapshot(
            t=t, theta=th, v_phi=v, j_phi=self.j(ls.uv),
            residual_sup=sup, residual_l2=l2, lambda_est=th,
        )
        grad_ratio = float(np.max(ls.grad_norm / ls.uv))
        return snap, grad_ratio

    # -- stepping ------------------------------------------------------------

    def try_step(self, ls: _LightState, j_prev: float, dt: float, k1=None):
        """One explicit-midpoint trial; returns (new light state or None, reason, j_new)."""
        if k1 is None:
            k1 = self.rhs_pack(ls)[0]
        mid, reason = self.light(ls.uv + (0.5 * dt) * k1)
        if mid is None:
            return None, reason, None
        k2 = self.rhs_pack(mid)[0]
        new, reason = self.light(ls.uv + dt * k2)
        if new is None:
            return None, reason, None
        j_new = self.j(new.uv)
        if not np.isfinite(j_new):
            return None, REASON_NONFINITE, None
        if j_new - j_prev > MONO_EPS * max(1.0, abs(j_prev)):
            return None, REASON_ENTROPY, None
        return new, None, j_new

    def dt_ceiling(self, ls: _LightState, pack=None) -> float:
        """Parabolic stability ceiling from the local diffusion coefficient."""
        if pack is None:
            pack = self.rhs_pack(ls)
        _, th, phir, _ = pack
        rn1 = self._rn1(ls.r)
        h = self.grid.spacing
        ratio = ls.min_eig * phir * ls.detb / (th * self.f * rn1)
        return CFL_FACTOR * h * h * float(np.min(ratio))


def rhs(state: BodyState, density: DensitySpec, phi: PhiSpec) -> ScalarField:
    """Right-hand side of the normalised support-function flow."""
    if not state.strictly_convex:
        raise GeometryError("flow right-hand side needs a strictly convex state")
    eng = _Engine(state.grid, phi, density)
    k1, _, _, _ = eng.rhs_pack(eng.light_from_body(state))
    return ScalarField(state.grid, k1)


def step(
    state: BodyState,
    dt: float,
    density: DensitySpec,
    phi: PhiSpec,
    j_prev: float | None = None,
) -> StepOutcome:
    """One explicit-midpoint trial step with the full rejection guard set."""
    if not state.strictly_convex:
        return StepOutcome(False, None, REASON_CONVEXITY)
    eng = _Engine(state.grid, phi, density)
    ls = eng.light_from_body(state)
    if j_prev is None:
        j_prev = eng.j(ls.uv)
    new, reason, j_new = eng.try_step(ls, j_prev, dt)
    if new is None:
        return StepOutcome(False, None, reason)
    return StepOutcome(True, assemble_state(ScalarField(state.grid, new.uv)), None, j_new)


def _validate(config: FlowConfig) -> tuple[np.ndarray, dict]:
    """Hypothesis checks; raises ConfigError before any stepping."""
    grid = config.grid
    u0 = np.asarray(config.u0, dtype=float)
    if u0.shape != (grid.node_count,):
        raise ConfigError(f"initial support has shape {u0.shape}, grid has {grid.node_count} nodes")
    if config.case not in ("i", "ii"):
        raise ConfigError(f"case must be 'i' or 'ii', got {config.case!r}")
    dt0 = config.resolved_dt0()
    dt_min = config.resolved_dt_min()
    if not (0.0 < dt_min <= dt0 <= config.dt_max):
        raise ConfigError(
            f"need 0 < dt_min <= dt0 <= dt_max, got dt_min={dt_min:g}, dt0={dt0:g}, dt_max={config.dt_max:g}"
        )
    if config.tol_stop <= 0.0:
        raise ConfigError("tol_stop must be positive")

    try:
        config.density.sample(grid)  # positivity and evenness validation
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    reports: dict = {"case": config.case}
    if config.case == "i":
        rep = check_case_i(config.phi)
        reports["case_i"] = rep
        if not rep.passed:
            raise ConfigError(rep.message())
    else:
        rep = check_case_ii(config.phi, config.density)
        reports["case_ii"] = rep
        if not rep.passed:
            raise ConfigError(rep.message())
        gap = antipodal_mismatch(grid, u0)
        if gap > 1e-12:
            raise ConfigError(
                f"case (ii) needs an origin-symmetric initial body, sup|u0(x)-u0(-x)| = {gap:.3e}"
            )
        u0 = 0.5 * (u0 + u0[grid.antipode])

    if np.min(u0) <= 0.0:
        raise ConfigError(f"initial support must be positive, min u0 = {np.min(u0):.6g}")
    return u0, reports


def run(
    config: FlowConfig,
    on_step: Callable[[dict], None] | None = None,
    on_profile: Callable[[int, BodyState], None] | None = None,
    profile_every: int = 0,
) -> FlowResult:
    """Integrate the flow until the stationary equation is met or budget runs out.

    Returns a FlowResult whose status is "converged" (residual and theta
    drift under their tolerances), "max_steps", or "guard_tripped" (dt_min
    rejected or theta left its tenfold band).  Diagnostics hold one row per
    accepted step, plus the initial row.  ``on_step`` streams each row as a
    dict; ``on_profile`` receives the assembled body every ``profile_every``
    accepted steps.
    """
    t_start = time.perf_counter()
    u0, _reports = _validate(config)
    eng = _Engine(config.grid, config.phi, config.density)

    ls, reason = eng.light(u0)
    if ls is None:
        raise ConfigError(f"initial body rejected: {reason}")

    dt = config.resolved_dt0()
    dt_min = config.resolved_dt_min()

    ncols = len(DIAGNOSTIC_COLUMNS)
    buf = np.empty((min(config.max_steps + 1, 4096), ncols))
    rows = 0
    reject_reasons: dict[str, int] = {}
    even_gap = 0.0
    theta_hist: list[float] = []
    r_lo, r_hi = np.inf, -np.inf
    antipode = config.grid.antipode

    def record(step_no: int, t: float, dt_row: float, st: _LightState, rejected: int, pack):
        nonlocal buf, rows, even_gap, r_lo, r_hi
        snap, grad_ratio = eng.snapshot_from(st, t, pack)
        if rows == buf.shape[0]:
            buf = np.concatenate([buf, np.empty_like(buf)], axis=0)
        buf[rows] = (
            step_no, t, dt_row, snap.theta, snap.v_phi, snap.j_phi,
            snap.residual_sup, snap.residual_l2,
            float(np.min(st.uv)), float(np.max(st.uv)), grad_ratio,
            1.0 / float(np.min(st.detb)),
            float(np.min(st.min_eig)), float(np.max(st.max_eig)),
            rejected,
        )
        rows += 1
        even_gap = max(even_gap, float(np.max(np.abs(st.uv - st.uv[antipode]))))
        r_lo = min(r_lo, float(np.min(st.r)))
        r_hi = max(r_hi, float(np.max(st.r)))
        theta_hist.append(snap.theta)
        if on_step is not None:
            on_step(dict(zip(DIAGNOSTIC_COLUMNS, buf[rows - 1])))
        return snap

    pack = eng.rhs_pack(ls)
    snap0 = record(0, 0.0, dt, ls, 0, pack)
    theta0 = snap0.theta
    j_prev = snap0.j_phi

    status = "max_steps"
    guard_message = None
    lam = snap0.theta
    t = 0.0
    accepted = 0
    streak = 0
    rejected_since_accept = 0

    while accepted < config.max_steps:
        new, reason, j_new = eng.try_step(ls, j_prev, dt, k1=pack[0])
        if new is None:
            reject_reasons[reason] = reject_reasons.get(reason, 0) + 1
            rejected_since_accept += 1
            streak = 0
            if dt <= dt_min * (1.0 + 1e-12):
                status = "guard_tripped"
                guard_message = f"dt_min rejected: {reason}"
                break
            dt = max(0.5 * dt, dt_min)
            continue

        ls = new
        j_prev = j_new
        t += dt
        accepted += 1
        pack = eng.rhs_pack(ls)
        snap = record(accepted, t, dt, ls, rejected_since_accept, pack)
        rejected_since_accept = 0
        lam = snap.theta

        if on_profile is not None and profile_every > 0 and accepted % profile_every == 0:
            on_profile(accepted, assemble_state(ScalarField(config.grid, ls.uv)))

        if not (theta0 / THETA_BAND <= snap.theta <= theta0 * THETA_BAND):
            status = "guard_tripped"
            guard_message = (
                f"theta left its guard band: {snap.theta:.6g} vs initial {theta0:.6g}"
            )
            break

        streak += 1
        if streak >= 3:
            dt = min(dt * config.safety, config.dt_max, eng.dt_ceiling(ls, pack))
            dt = max(dt, dt_min)
            streak = 0

        back = max(0, len(theta_hist) - 1 - config.theta_window)
        if snap.residual_sup <= config.tol_stop and abs(snap.theta - theta_hist[back]) <= config.tol_theta:
            status = "converged"
            break

    diag = FlowDiagnostics(
        columns=DIAGNOSTIC_COLUMNS,
        data=buf[:rows].copy(),
        reject_reasons=reject_reasons,
        even_mismatch_max=even_gap,
    )
    return FlowResult(
        state=assemble_state(ScalarField(config.grid, ls.uv)),
        lambda0=lam,
        status=status,
        diagnostics=diag,
        accepted_steps=accepted,
        wall_time_s=time.perf_counter() - t_start,
        r_range=(r_lo, r_hi),
        guard_message=guard_message,
    )


def build_initial_support(grid: SphereGrid, kind: str, params: dict) -> np.ndarray:
    """Initial support field from a body spec (sphere / harmonic / tabulated)."""
    from .orlicz import evaluate_expansion

    if kind == "sphere":
        return np.full(grid.node_count, float(params["radius"]))
    if kind == "harmonic":
        base = {"c0": float(params.get("base", 1.0)), "terms": params.get("terms", [])}
        return evaluate_expansion(grid, "harmonic", base)
    if kind == "tabulated":
        return evaluate_expansion(grid, "tabulated", params)
    raise ConfigError(f"unknown initial body kind {kind!r}")
