"""Command line interface: run, validate, geometry-check, oracle-compare.

Output files are bit-stable for a given config and platform: CSV floats are
serialised with 17 significant digits (round-trip exact), the summation
order inside the solver is fixed, and summary.json is written with sorted
keys.  The wall_time_s field in summary.json is the one timing-dependent
value.

Exit codes: 0 success/converged, 1 configuration or validation error,
2 step budget exhausted, 3 guard tripped (or oracle did not converge).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import RunSetup, load_config, parse_config
from .errors import ConfigError, GeometryError, HypothesisError
from .flow import DIAGNOSTIC_COLUMNS, run
from .functionals import v_phi
from .geometry import (
    BodyState,
    assemble_state,
    support_radial_extrema_check,
    pushforward_weight,
    support_from_radial_roundtrip,
)
from .oracle import NewtonProblem, newton_solve
from .orlicz import check_case_i, check_case_ii
from .sphere import ScalarField, quadrature

_INT_COLUMNS = {"step", "rejected"}


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _fmt_row(values, columns) -> str:
    parts = []
    for name, v in zip(columns, values):
        parts.append(str(int(v)) if name in _INT_COLUMNS else _fmt(float(v)))
    return ",".join(parts)


def _profile_columns(state: BodyState) -> tuple[list[str], list[np.ndarray]]:
    angle_names = ["angle"] if state.grid.dim == 1 else ["colatitude", "longitude"]
    cols = state.grid.node_angle_columns()
    names = angle_names + ["u", "r", "K"]
    data = cols + [state.u.values, state.r.values, state.gauss_k.values]
    return names, data


def write_profile_csv(path: Path, state: BodyState) -> None:
    names, data = _profile_columns(state)
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(names) + "\n")
        for i in range(state.grid.node_count):
            fh.write(",".join(_fmt(col[i]) for col in data) + "\n")


def write_body_csv(path: Path, state: BodyState) -> None:
    """Profile columns plus the smallest principal radius per node."""
    names, data = _profile_columns(state)
    names = names + ["min_eig_b"]
    data = data + [state.min_eig_b.values]
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(names) + "\n")
        for i in range(state.grid.node_count):
            fh.write(",".join(_fmt(col[i]) for col in data) + "\n")


def _say(quiet: bool, msg: str) -> None:
    if not quiet:
        print(msg)


def _hypothesis_report(setup: RunSetup) -> dict:
    rep_i = check_case_i(setup.phi)
    rep_ii = check_case_ii(setup.phi, setup.density)
    return {
        "case": setup.flow.case,
        "case_i": {
            "passed": rep_i.passed,
            "sup_log_derivative": rep_i.sup_log_derivative,
            "certified_domain": list(rep_i.certified_domain),
        },
        "case_ii": {
            "passed": rep_ii.passed,
            "phi_integrable_at_zero": rep_ii.phi_integrable_at_zero,
            "density_even": rep_ii.density_even,
            "detail": rep_ii.detail,
        },
    }


def cmd_run(args) -> int:
    try:
        setup = parse_config(load_config(args.config), args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    out = setup.out_dir
    out.mkdir(parents=True, exist_ok=True)
    diag_path = out / "diagnostics.csv"

    emit = setup.emit_profiles_every
    progress_every = 5000

    with open(diag_path, "w", newline="\n") as diag_fh:
        diag_fh.write(",".join(DIAGNOSTIC_COLUMNS) + "\n")

        def on_step(row: dict) -> None:
            diag_fh.write(_fmt_row(row.values(), DIAGNOSTIC_COLUMNS) + "\n")
            step_no = int(row["step"])
            if not args.quiet and step_no % progress_every == 0 and step_no > 0:
                print(
                    f"step {step_no}: t={row['t']:.6g} theta={row['theta']:.9g} "
                    f"residual_sup={row['residual_sup']:.3e}"
                )

        def on_profile(step_no: int, state) -> None:
            write_profile_csv(out / f"profile_{step_no:08d}.csv", state)

        try:
            result = run(
                setup.flow,
                on_step=on_step,
                on_profile=on_profile if emit > 0 else None,
                profile_every=emit,
            )
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 1

    write_profile_csv(out / "final_profile.csv", result.state)

    drift = result.diagnostics.v_phi_drift()
    summary = {
        "status": result.status,
        "lambda0": result.lambda0,
        "steps": result.accepted_steps,
        "wall_time_s": result.wall_time_s,
        "hypothesis": _hypothesis_report(setup),
        "conservation_drift": drift,
        "even_mismatch_max": result.diagnostics.even_mismatch_max,
        "r_range": list(result.r_range),
        "reject_reasons": result.diagnostics.reject_reasons,
        "guard_message": result.guard_message,
        "tolerances": {
            "tol_stop": setup.flow.tol_stop,
            "tol_theta": setup.flow.tol_theta,
            "theta_window": setup.flow.theta_window,
        },
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")

    _say(args.quiet, f"status={result.status} lambda0={result.lambda0:.12g} "
                     f"steps={result.accepted_steps} drift={drift:.3e}")
    return {"converged": 0, "max_steps": 2, "guard_tripped": 3}[result.status]


def cmd_validate(args) -> int:
    try:
        setup = parse_config(load_config(args.config), args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    ok = True
    rep_i = check_case_i(setup.phi)
    rep_ii = check_case_ii(setup.phi, setup.density)
    print(rep_i.message())
    print(rep_ii.message())

    try:
        setup.density.sample(setup.grid)
        print("density: positive at all nodes")
    except HypothesisError as exc:
        print(f"density check failed: {exc}", file=sys.stderr)
        ok = False

    try:
        state = assemble_state(ScalarField(setup.grid, setup.u0))
        if not state.strictly_convex:
            print("initial body check failed: not strictly convex", file=sys.stderr)
            ok = False
        else:
            print("initial body: positive support, strictly convex")
    except GeometryError as exc:
        print(f"initial body check failed: {exc}", file=sys.stderr)
        ok = False

    required = rep_i if setup.flow.case == "i" else rep_ii
    if not required.passed:
        print(f"hypothesis required for case ({setup.flow.case}) failed", file=sys.stderr)
        ok = False
    return 0 if ok else 1


def cmd_geometry_check(args) -> int:
    try:
        doc = load_config(args.config)
        # only grid + initial are needed; synthesise neutral sections if absent
        doc.setdefault("phi", {"kind": "power", "q": 2.0})
        doc.setdefault("density", {"kind": "constant", "value": 1.0})
        setup = parse_config(doc, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    try:
        state = assemble_state(ScalarField(setup.grid, setup.u0))
    except GeometryError as exc:
        print(f"geometry check failed: {exc}", file=sys.stderr)
        return 1
    if not state.strictly_convex:
        print(
            "geometry check failed: convexity lost "
            f"(min principal radius {float(np.min(state.min_eig_b.values)):.6g})",
            file=sys.stderr,
        )
        return 1

    h = setup.grid.spacing
    rep = support_radial_extrema_check(state)
    w = pushforward_weight(state)
    push_err = abs(quadrature(w) - setup.grid.area) / setup.grid.area
    push_tol = 5.0 * h * h
    rt = support_from_radial_roundtrip(state)
    rt_tol = (100.0 * h * h) if setup.grid.dim == 1 else (10.0 * h)

    extrema_ok = rep.passes(1e-8)
    push_ok = push_err <= push_tol
    rt_ok = rt <= rt_tol

    print("check                          value         tolerance    verdict")
    print(f"max-support vs max-radial      {rep.max_eq: .3e}   {1e-8:.1e}      {'ok' if rep.max_eq <= 1e-8 else 'FAIL'}")
    print(f"min-support vs min-radial      {rep.min_eq: .3e}   {1e-8:.1e}      {'ok' if rep.min_eq <= 1e-8 else 'FAIL'}")
    print(f"support inequality margin      {rep.support_min: .3e}   {-1e-8:.1e}     {'ok' if rep.support_min >= -1e-8 else 'FAIL'}")
    print(f"radial inequality margin       {rep.radial_min: .3e}   {-1e-8:.1e}     {'ok' if rep.radial_min >= -1e-8 else 'FAIL'}")
    print(f"pushforward weight integral    {push_err: .3e}   {push_tol:.1e}      {'ok' if push_ok else 'FAIL'}")
    print(f"support/radial roundtrip       {rt: .3e}   {rt_tol:.1e}      {'ok' if rt_ok else 'FAIL'}")

    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_body_csv(out / "body.csv", state)

    return 0 if (extrema_ok and push_ok and rt_ok) else 1


def cmd_oracle_compare(args) -> int:
    try:
        setup = parse_config(load_config(args.config), args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    if setup.grid.dim != 1:
        print("config error: oracle is n=1 only", file=sys.stderr)
        return 1

    try:
        v0 = v_phi(assemble_state(ScalarField(setup.grid, setup.u0)), setup.phi)
        result = run(setup.flow)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    if result.status != "converged":
        print(f"flow did not converge: {result.status}", file=sys.stderr)
        return {"max_steps": 2, "guard_tripped": 3}[result.status]

    problem = NewtonProblem(grid=setup.grid, phi=setup.phi, density=setup.density, v_target=v0)
    newton = newton_solve(problem, ScalarField(setup.grid, setup.u0))
    if not newton.converged:
        print(f"newton oracle did not converge: {newton.message}", file=sys.stderr)
        return 3

    sup_u = float(np.max(np.abs(result.state.u.values - newton.u)))
    gap_lam = abs(result.lambda0 - newton.lam)

    out = setup.out_dir
    out.mkdir(parents=True, exist_ok=True)
    theta_col = setup.grid.angles[0]
    with open(out / "compare.csv", "w", newline="\n") as fh:
        fh.write("angle,u_flow,u_newton,diff\n")
        for i in range(setup.grid.node_count):
            fh.write(
                ",".join(
                    _fmt(v)
                    for v in (
                        theta_col[i],
                        result.state.u.values[i],
                        newton.u[i],
                        result.state.u.values[i] - newton.u[i],
                    )
                )
                + "\n"
            )

    print(f"sup|u_flow - u_newton| = {sup_u:.6e}")
    print(f"|lambda0 - lambda*|    = {gap_lam:.6e}")
    print(f"lambda0 = {result.lambda0:.12g}, lambda* = {newton.lam:.12g}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="minkflow",
        description="curvature-flow solver for Minkowski-type equations on the sphere",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (
        ("run", cmd_run),
        ("validate", cmd_validate),
        ("geometry-check", cmd_geometry_check),
        ("oracle-compare", cmd_oracle_compare),
    ):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to the JSON run configuration")
        p.add_argument("--out", default=None, help="override the output directory")
        p.add_argument("--quiet", action="store_true", help="suppress progress output")
        p.set_defaults(fn=fn)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
