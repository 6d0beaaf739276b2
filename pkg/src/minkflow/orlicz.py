"""Radial weight function phi, its primitive, and the prescribed density.

The weight phi is a positive smooth function of the radial variable; its
primitive Phi satisfies Phi'(s) = phi(s)/s.  When the integral of phi(s)/s
diverges at 0 the primitive is only defined up to an additive constant and is
anchored at a base point s0 (Phi(s0) = 0); every use downstream is a
difference or a conservation check, which is constant-invariant.

Two structural hypotheses gate a run:

* decreasing type: sup over s of s phi'(s)/phi(s) < 0, checked on a
  log-spaced sample of the certified domain (plus the closed form for power
  weights, where the ratio is the constant exponent);
* integrable type with symmetry: Phi finite at 0+ (Cauchy segments of the
  defining integral) together with an even density and even initial body.

A sampled check certifies only the declared domain; the run report records
that domain next to the radial range the run actually visited.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, interpolate, special

from .errors import HypothesisError
from .sphere import SphereGrid, antipodal_mismatch

__all__ = [
    "PhiSpec",
    "CapitalPhi",
    "DensitySpec",
    "capital_phi",
    "check_case_i",
    "check_case_ii",
    "CaseIReport",
    "CaseIIReport",
]

_CASE_I_MARGIN = 1e-8
_CASE_I_SAMPLES = 2048
_CAUCHY_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class PhiSpec:
    """Radial weight phi with derivative and certified evaluation domain.

    kind is one of:
      * "power":     phi(s) = s^q                 params ("q",)
      * "power_exp": phi(s) = s^q exp(-a s)       params ("q", "a")
      * "tabulated": monotone-cubic log-log interpolant of sample pairs,
                     params ("s", "phi") as tuples
    """

    kind: str
    params: dict
    domain: tuple[float, float] = (1e-3, 1e3)
    base_point: float | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        lo, hi = self.domain
        if not (0.0 < lo < hi):
            raise ValueError(f"phi domain must satisfy 0 < lo < hi, got {self.domain}")
        if self.kind == "tabulated":
            s = np.asarray(self.params["s"], dtype=float)
            p = np.asarray(self.params["phi"], dtype=float)
            if s.ndim != 1 or s.shape != p.shape or len(s) < 4:
                raise ValueError("tabulated phi needs matching 1-d samples, at least 4")
            if np.any(np.diff(s) <= 0) or np.any(s <= 0) or np.any(p <= 0):
                raise ValueError("tabulated phi needs increasing s > 0 and phi > 0")
            self._cache["loglog"] = interpolate.PchipInterpolator(np.log(s), np.log(p))
        elif self.kind == "power":
            float(self.params["q"])
        elif self.kind == "power_exp":
            float(self.params["q"])
            if float(self.params["a"]) < 0:
                raise ValueError("power_exp decay rate must be >= 0")
        else:
            raise ValueError(f"unknown phi kind {self.kind!r}")

    # phi, phi' and the log-derivative g(s) = s phi'(s) / phi(s)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "power":
            return s ** self.params["q"]
        if self.kind == "power_exp":
            return s ** self.params["q"] * np.exp(-self.params["a"] * s)
        return np.exp(self._cache["loglog"](np.log(s)))

    def prime(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "power":
            q = self.params["q"]
            return q * s ** (q - 1.0)
        if self.kind == "power_exp":
            q, a = self.params["q"], self.params["a"]
            return (q / s - a) * self(s)
        return self(s) * self._cache["loglog"].derivative()(np.log(s)) / s

    def log_derivative(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "power":
            return np.full_like(s, float(self.params["q"]))
        if self.kind == "power_exp":
            return self.params["q"] - self.params["a"] * s
        return self._cache["loglog"].derivative()(np.log(s))

    def capital(self) -> "CapitalPhi":
        if "capital" not in self._cache:
            self._cache["capital"] = _build_capital(self)
        return self._cache["capital"]

    @staticmethod
    def power(q: float, domain=(1e-3, 1e3), base_point=None) -> "PhiSpec":
        return PhiSpec("power", {"q": float(q)}, tuple(domain), base_point)

    @staticmethod
    def power_exp(q: float, a: float, domain=(1e-3, 1e3), base_point=None) -> "PhiSpec":
        return PhiSpec("power_exp", {"q": float(q), "a": float(a)}, tuple(domain), base_point)


@dataclass(frozen=True, eq=False)
class CapitalPhi:
    """Primitive of phi(s)/s, strictly increasing.

    mode "closed_form": Phi(0+) = 0 and the value is absolute.
    mode "quadrature_from_base": anchored at Phi(base_point) = 0; values carry
    the additive offset -Phi_true(base_point).
    """

    mode: str
    base_point: float | None
    _eval: Callable[[np.ndarray], np.ndarray]
    eval_domain: tuple[float, float]

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        lo, hi = self.eval_domain
        if np.any(s < lo) or np.any(s > hi):
            raise ValueError(
                f"Phi evaluated outside its prepared domain [{lo:.3g}, {hi:.3g}]"
            )
        return self._eval(s)


def _upper_gamma(q: float, x: np.ndarray) -> np.ndarray:
    """Upper incomplete gamma Gamma(q, x) for q <= 0, x > 0.

    Lifts q into the positive range where scipy evaluates it and recurs back
    down through Gamma(s-1, x) = (Gamma(s, x) - x^{s-1} e^{-x}) / (s - 1);
    q = 0 lands on the exponential integral.
    """
    m = int(np.ceil(-q)) + 1
    s = q + m
    val = special.gamma(s) * special.gammaincc(s, x)
    for _ in range(m):
        s -= 1.0
        if s == 0.0:
            val = special.exp1(x)
        else:
            val = (val - x ** s * np.exp(-x)) / s
    return val


def _build_capital(phi: PhiSpec) -> CapitalPhi:
    lo, hi = phi.domain
    pad_lo, pad_hi = lo / 16.0, hi * 16.0

    if phi.kind == "power":
        q = phi.params["q"]
        if q > 0:
            return CapitalPhi("closed_form", None, lambda s: s ** q / q, (0.0, np.inf))
        s0 = phi.base_point if phi.base_point is not None else 1.0
        if q == 0:
            return CapitalPhi(
                "quadrature_from_base", s0, lambda s: np.log(s / s0), (1e-300, np.inf)
            )
        return CapitalPhi(
            "quadrature_from_base", s0, lambda s: (s ** q - s0 ** q) / q, (1e-300, np.inf)
        )

    if phi.kind == "power_exp":
        q, a = phi.params["q"], phi.params["a"]
        if a == 0.0:
            return _build_capital(PhiSpec.power(q, phi.domain, phi.base_point))
        if q > 0:
            scale = special.gamma(q) / a ** q
            return CapitalPhi(
                "closed_form", None, lambda s: scale * special.gammainc(q, a * s), (0.0, np.inf)
            )
        # q <= 0: the primitive is a^{-q} [Gamma(q, a s0) - Gamma(q, a s)] with the
        # upper incomplete gamma continued to q <= 0 by downward recurrence
        s0 = phi.base_point if phi.base_point is not None else 1.0
        ref = _upper_gamma(q, np.asarray([a * s0]))[0]
        return CapitalPhi(
            "quadrature_from_base",
            s0,
            lambda s: a ** (-q) * (ref - _upper_gamma(q, a * np.asarray(s, dtype=float))),
            (1e-300, np.inf),
        )

    # generic route: adaptive quadrature from the base point, cached on a
    # monotone spline so that per-node evaluation in the flow loop stays cheap;
    # a tabulated weight is never integrated outside its own table
    if phi.kind == "tabulated":
        pad_lo, pad_hi = lo, hi
    s0 = min(max(phi.base_point if phi.base_point is not None else 1.0, pad_lo), pad_hi)
    knots = np.unique(np.concatenate([np.geomspace(pad_lo, pad_hi, 1025), [s0]]))
    idx0 = int(np.searchsorted(knots, s0))

    integrand = lambda s: phi(s) / s
    vals = np.zeros(len(knots))
    for k in range(idx0, len(knots) - 1):
        seg, _ = integrate.quad(integrand, knots[k], knots[k + 1], epsabs=1e-12, limit=200)
        vals[k + 1] = vals[k] + seg
    for k in range(idx0, 0, -1):
        seg, _ = integrate.quad(integrand, knots[k - 1], knots[k], epsabs=1e-12, limit=200)
        vals[k - 1] = vals[k] - seg

    spline = interpolate.PchipInterpolator(np.log(knots), vals)
    return CapitalPhi(
        "quadrature_from_base",
        s0,
        lambda s: spline(np.log(s)),
        (float(knots[0]), float(knots[-1])),
    )


def capital_phi(phi: PhiSpec, s: float) -> float:
    """Phi(s) for s inside the certified phi domain."""
    lo, hi = phi.domain
    if not (lo <= s <= hi):
        raise ValueError(f"s = {s:.6g} outside phi domain [{lo:.6g}, {hi:.6g}]")
    return float(phi.capital()(s))


@dataclass(frozen=True)
class CaseIReport:
    passed: bool
    sup_log_derivative: float
    margin: float
    certified_domain: tuple[float, float]

    def message(self) -> str:
        verdict = "holds" if self.passed else "failed"
        return (
            f"case (i) hypothesis {verdict}: sup s*phi'/phi = {self.sup_log_derivative:g} "
            f"on [{self.certified_domain[0]:g}, {self.certified_domain[1]:g}]"
        )


def check_case_i(phi: PhiSpec) -> CaseIReport:
    """Decreasing-type check: sup of s phi'(s)/phi(s) must be < 0.

    Sampled on 2048 log-spaced points of the certified domain; for power
    weights the ratio is constant and the sample is exact.  The verdict is
    certified only on the declared domain.
    """
    lo, hi = phi.domain
    samples = np.geomspace(lo, hi, _CASE_I_SAMPLES)
    sup = float(np.max(phi.log_derivative(samples)))
    if phi.kind == "power":
        sup = float(phi.params["q"])
    return CaseIReport(
        passed=sup <= -_CASE_I_MARGIN,
        sup_log_derivative=sup,
        margin=_CASE_I_MARGIN,
        certified_domain=(lo, hi),
    )


@dataclass(frozen=True)
class CaseIIReport:
    passed: bool
    phi_integrable_at_zero: bool
    density_even: bool
    detail: str

    def message(self) -> str:
        verdict = "holds" if self.passed else "failed"
        return f"case (ii) hypothesis {verdict}: {self.detail}"


def _integrable_at_zero(phi: PhiSpec) -> tuple[bool, str]:
    if phi.kind == "power":
        q = phi.params["q"]
        return q > 0, f"power weight, exponent {q:g}"
    if phi.kind == "power_exp":
        q = phi.params["q"]
        return q > 0, f"power_exp weight, exponent {q:g}"
    return False, "tabulated weight cannot be certified down to 0"


def check_case_ii(phi: PhiSpec, density: "DensitySpec") -> CaseIIReport:
    """Integrable-type check: Phi finite at 0+ and the density even.

    Finiteness is decided by the closed form for power-type weights and by
    Cauchy segments of the defining integral otherwise; evenness of the
    initial body is enforced separately at run configuration.
    """
    closed, why = _integrable_at_zero(phi)
    integrable = closed
    if phi.kind in ("power", "power_exp"):
        # corroborate the closed form with Cauchy segments toward 0
        s0 = min(1.0, phi.domain[0])
        seg_prev = math.inf
        for k in range(1, 400):
            a, b = s0 / 2.0 ** k, s0 / 2.0 ** (k - 1)
            seg, _ = integrate.quad(lambda s: phi(s) / s, a, b, epsabs=1e-14, limit=100)
            if seg < _CAUCHY_TOL:
                integrable = True
                why += f"; Cauchy segment {seg:.2e} < {_CAUCHY_TOL:g} at k={k}"
                break
            if seg > seg_prev * 1.0000001 or not np.isfinite(seg):
                integrable = False
                why += f"; Cauchy segments grow toward 0 ({seg:.2e} at k={k})"
                break
            seg_prev = seg
        else:
            integrable = False
            why += "; Cauchy segments did not settle"
    even = bool(density.even)
    if not even:
        why += "; density not declared even"
    return CaseIIReport(
        passed=integrable and even,
        phi_integrable_at_zero=integrable,
        density_even=even,
        detail=why,
    )


# ---------------------------------------------------------------------------
# densities
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DensitySpec:
    """Prescribed positive density f on S^n.

    kind is one of:
      * "constant":  params {"value": c}
      * "harmonic":  params {"c0": c0, "terms": [...]} with terms
            {"k": k, "cos": a, "sin": b}          on S^1
            {"axis": [x, y, z], "power": p, "coeff": c}   on S^2
      * "tabulated": params {"values": [...]} matching the grid node count

    Positivity is validated on the actual run grid.  A density declared even
    is checked node-by-node against the antipodal map and then symmetrised,
    so downstream evenness preservation holds bitwise.
    """

    kind: str
    params: dict
    even: bool = False
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def sample(self, grid: SphereGrid) -> np.ndarray:
        key = grid.uid
        if key not in self._cache:
            self._cache[key] = self._evaluate(grid)
        return self._cache[key]

    def _evaluate(self, grid: SphereGrid) -> np.ndarray:
        f = evaluate_expansion(grid, self.kind, self.params)
        if np.min(f) <= 0.0:
            i = int(np.argmin(f))
            raise HypothesisError(
                f"density must be positive, min f = {f[i]:.6g} at node {i}"
            )
        if self.even:
            gap = antipodal_mismatch(grid, f)
            if gap > 1e-12:
                raise HypothesisError(
                    f"density declared even but sup|f(x)-f(-x)| = {gap:.3e} > 1e-12"
                )
            f = 0.5 * (f + f[grid.antipode])
        f.setflags(write=False)
        return f


def evaluate_expansion(grid: SphereGrid, kind: str, params: dict) -> np.ndarray:
    """Evaluate a constant / harmonic / tabulated field spec on grid nodes."""
    n = grid.node_count
    if kind == "constant":
        return np.full(n, float(params["value"]))
    if kind == "tabulated":
        vals = np.asarray(params["values"], dtype=float)
        if vals.shape != (n,):
            raise ValueError(f"tabulated field has {vals.shape} values, grid has {n} nodes")
        return vals.copy()
    if kind != "harmonic":
        raise ValueError(f"unknown field kind {kind!r}")

    out = np.full(n, float(params.get("c0", 0.0)))
    terms: Sequence[dict] = params.get("terms", [])
    if grid.dim == 1:
        theta = grid.angles[0]
        for t in terms:
            k = int(t["k"])
            out += float(t.get("cos", 0.0)) * np.cos(k * theta)
            out += float(t.get("sin", 0.0)) * np.sin(k * theta)
    else:
        for t in terms:
            axis = np.asarray(t["axis"], dtype=float)
            norm = np.linalg.norm(axis)
            if norm == 0:
                raise ValueError("harmonic term axis must be nonzero")
            out += float(t["coeff"]) * (grid.nodes @ (axis / norm)) ** int(t["power"])
    return out
