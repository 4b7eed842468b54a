"""Command line interface.

Subcommands: check, cover, probe, plan, simulate, steer-sen.  Each one
reads JSON/CSV inputs, writes its payload files into --out, and renders
any figures next to them.  Payload files are byte-stable across reruns;
per-run facts (timestamps, tool version) go to the .meta.json sidecar.

Exit codes: 0 on a positive verdict; 1 on a negative verdict (not
controllable, probe stalled, plan over tolerance) or an internal module
failure; 2 on usage or parse errors (argparse reports its own as 2).
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

import numpy as np

from . import (algebra, covers, figures, gridclosure, rank, simulate, specio,
               synthesis)
from .errors import (DegreeInsufficientError, LiesteerError, SpecError,
                     SteeringError)


def _plain(obj):
    """Recursively convert payload values into JSON-serializable types."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    return obj


def _outdir(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _payload_path(args, name: str) -> str:
    return os.path.join(_outdir(args), name)


def _write_payload(args, name: str, data: dict, command: str):
    path = _payload_path(args, name)
    specio.dump_json_deterministic(_plain(data), path)
    specio.write_metadata(path.replace(".json", ".meta.json"),
                          command=command)
    return path


def _parse_point(pairs):
    if not pairs:
        return None
    point = {}
    for item in pairs:
        if "=" not in item:
            raise SpecError(f"--point expects label=value, got {item!r}")
        label, _, val = item.partition("=")
        try:
            point[label] = float(val)
        except ValueError:
            raise SpecError(f"--point {item!r}: {val!r} is not a number")
    return point


def _certificates_payload(spec) -> dict:
    certs = rank.monomial_certificates(spec)
    return {
        label: {"sign": c.sign, "monomial": c.monomial(),
                "exponents": {l: e for l, e in c.exponents},
                "word": c.word, "depth": c.depth}
        for label, c in sorted(certs.items())}


# ---------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------

def cmd_check(args) -> int:
    spec = specio.load_system(args.system)
    report = rank.check_ensemble(spec) if args.ensemble \
        else rank.check_classical(spec)
    payload = {
        "system": specio.system_to_dict(spec),
        "kind": report.kind,
        "controllable": report.controllable,
        "closure_dim": report.closure_dim,
        "ambient_dim": report.ambient_dim,
        "obstructions": list(report.obstructions),
        "details": report.details,
    }
    try:
        payload["certificates"] = _certificates_payload(spec)
    except LiesteerError:
        pass
    _write_payload(args, "check.json", payload, "check")
    verdict = "controllable" if report.controllable else "not controllable"
    print(f"{report.kind} check: {verdict} "
          f"(closure {report.closure_dim}/{report.ambient_dim})")
    for ob in report.obstructions:
        print(f"  obstruction: {ob}")
    return 0 if report.controllable else 1


def cmd_cover(args) -> int:
    if args.group == "so":
        cover = covers.cover_so_n(args.n, mode=args.mode)
    else:
        basis = algebra.standard_basis("su2")
        cover = covers.cover_from_triples(basis, [(0, 1, 2)])
    payload = {
        "group": args.group,
        "n": args.n if args.group == "so" else 2,
        "mode": args.mode,
        "count": len(cover.triples),
        "triples": [list(cover.triple_labels(t))
                    for t in range(len(cover.triples))],
        "certificates": [
            {"order": list(c.order), "signs": list(c.signs),
             "residual": float(c.residual)}
            for c in cover.certificates],
    }
    _write_payload(args, "cover.json", payload, "cover")
    print(f"{len(cover.triples)} triple(s) ({args.mode} mode):")
    for t in range(len(cover.triples)):
        print("  (" + ", ".join(cover.triple_labels(t)) + ")")
    return 0


def cmd_probe(args) -> int:
    spec = specio.load_system(args.system)
    if args.grid is not None:
        if args.grid < 1:
            raise SpecError(f"--grid must be >= 1, got {args.grid}")
        spec = dataclasses.replace(spec, parameters={
            label: dataclasses.replace(r, samples=args.grid)
            for label, r in spec.parameters.items()})
    report = gridclosure.fn_lie_closure(spec, max_depth=args.depth,
                                        tol=args.tol)
    payload = gridclosure.saturation_report(report)
    _write_payload(args, "probe.json", payload, "probe")
    out = _outdir(args)
    with open(os.path.join(out, "probe_dims.csv"), "w", encoding="utf-8") as fh:
        fh.write("depth,dimension\n")
        for d, dim in enumerate(report.dims):
            fh.write(f"{d},{dim}\n")
    figures.probe_figure(report, os.path.join(out, "probe.png"))
    verdict = "saturated" if report.saturated else (
        "stalled" if report.stalled else "depth limit reached")
    print(f"probe: {verdict}, dimension {report.final_dim}/{report.target_dim} "
          f"at depth {report.depth_reached}")
    return 0 if report.saturated else 1


def cmd_plan(args) -> int:
    spec = specio.load_system(args.system)
    target = specio.rotation_target_from_dict(
        specio.load_json(args.target), spec)
    try:
        plan = synthesis.plan_so3_ensemble(
            spec, target, degree_bound=args.degree_bound, tol=args.tol,
            refinement=args.refinement)
    except (SteeringError, DegreeInsufficientError) as exc:
        print(f"plan rejected: {exc}", file=sys.stderr)
        return 1
    payload = plan.summary()
    payload["fits"] = {
        str(slot): {"degrees": list(f.degrees),
                    "coefficients": [float(c) for c in f.coefficients],
                    "sup_error": float(f.sup_error),
                    "condition": float(f.condition)}
        for slot, f in plan.fits.items()}
    if args.verify:
        traj = simulate.integrate_ensemble(spec, plan.schedule, record="final")
        achieved = _achieved_error(spec, traj, target, plan.grid)
        payload["achieved_error"] = achieved
        print(f"verified: achieved sup error {achieved:.3e}")
    _write_payload(args, "plan.json", payload, "plan")
    out = _outdir(args)
    specio.write_schedule_csv(plan.schedule,
                              os.path.join(out, "plan_schedule.csv"))
    figures.plan_figure(plan, os.path.join(out, "plan_fit.png"))
    print(f"plan: {len(plan.schedule)} intervals, fit error "
          f"{plan.fit_error:.3e}, compile error {plan.compile_error:.3e}, "
          f"error budget {plan.error_budget:.3e}")
    return 0


def _achieved_error(spec, traj, target, grid) -> float:
    return simulate.evaluate(spec, traj.final, target).sup


def cmd_simulate(args) -> int:
    spec = specio.load_system(args.system)
    n_chan = len(spec.generators) + len(spec.translations)
    schedule = specio.read_schedule_csv(args.schedule, channels=n_chan)
    record = args.record
    if record not in ("final", "breakpoints"):
        record = int(record)
    traj = simulate.integrate_ensemble(spec, schedule, record=record,
                                       threads=args.threads)
    drift = simulate.membership_drift(spec, traj.final)
    payload = {
        "intervals": len(schedule),
        "duration": schedule.duration,
        "grid_points": int(traj.points.shape[0]),
        "recorded_times": [float(t) for t in traj.times],
        "membership_drift": drift,
    }
    _write_payload(args, "simulate.json", payload, "simulate")
    out = _outdir(args)
    specio.write_trajectory_csv(traj, os.path.join(out, "trajectory.csv"))
    figures.ensemble_figure(spec, traj, os.path.join(out, "simulate.png"))
    print(f"simulated {len(schedule)} interval(s) over "
          f"{traj.points.shape[0]} grid point(s); membership drift {drift:.3e}")
    return 0


def _parse_vector(text: str, n: int, flag: str) -> np.ndarray:
    try:
        vals = [float(p) for p in text.split(",")]
    except ValueError:
        raise SpecError(f"{flag} expects comma-separated numbers, got {text!r}")
    if len(vals) != n:
        raise SpecError(f"{flag} needs {n} entries, got {len(vals)}")
    return np.array(vals)


def _parse_matrix(text: str, n: int, flag: str) -> np.ndarray:
    rows = [r for r in text.split(";") if r.strip()]
    if len(rows) != n:
        raise SpecError(f"{flag} needs {n} semicolon-separated rows, got "
                        f"{len(rows)}")
    return np.stack([_parse_vector(r, n, flag) for r in rows])


def cmd_steer_sen(args) -> int:
    spec = specio.load_system(args.system)
    n = spec.n
    pos = _parse_vector(args.xf, n, "--xf")
    rot = np.eye(n) if args.Xf is None else _parse_matrix(args.Xf, n, "--Xf")
    point = _parse_point(args.point)
    result = synthesis.three_step_steer_sen(spec, pos, rot, point=point)
    traj = simulate.integrate_single(spec, result.schedule, point=point,
                                     record="breakpoints")
    final = traj.final
    rot_err = algebra.geodesic_distance(final[:n, :n], rot)
    pos_err = float(np.linalg.norm(final[:n, n] - pos))
    payload = {
        "phases": [{"kind": kind, "value": val} for kind, val in result.phases],
        "notes": result.notes,
        "intervals": len(result.schedule),
        "rotation_error": rot_err,
        "translation_error": pos_err,
    }
    _write_payload(args, "steer.json", payload, "steer-sen")
    out = _outdir(args)
    specio.write_schedule_csv(result.schedule,
                              os.path.join(out, "steer_schedule.csv"))
    grid_pt = np.zeros((1, 0)) if point is None \
        else np.asarray([[point[l] for l in spec.labels()]])
    specio.write_trajectory_csv(
        simulate.EnsembleTrajectory(times=traj.times, points=grid_pt,
                                    states=traj.states[:, None]),
        os.path.join(out, "steer_trajectory.csv"))
    figures.steer_figure(spec, traj, os.path.join(out, "steer_path.png"))
    print(f"steered in {len(result.schedule)} interval(s); rotation error "
          f"{rot_err:.3e}, translation error {pos_err:.3e}")
    return 0 if max(rot_err, pos_err) < 1e-8 else 1


# ---------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="liesteer",
        description="controllability checks, subalgebra covers and broadcast "
                    "control synthesis on rotation, rigid motion and spin groups")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_out(p):
        p.add_argument("--out", default=".",
                       help="directory for payload files and figures")

    p = sub.add_parser("check", help="classical or ensemble controllability")
    p.add_argument("system", help="system description JSON")
    p.add_argument("--ensemble", action="store_true",
                   help="apply the ensemble-level obstructions too")
    add_out(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("cover", help="cyclic triple covers of so(n) or su(2)")
    p.add_argument("--group", choices=("so", "su2"), default="so")
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--mode", choices=("minimal", "full"), default="minimal")
    add_out(p)
    p.set_defaults(func=cmd_cover)

    p = sub.add_parser("probe", help="parameter-dependent closure saturation")
    p.add_argument("system")
    p.add_argument("--depth", type=int, default=12,
                   help="maximum bracket depth")
    p.add_argument("--grid", type=int, default=None,
                   help="override the per-label sample count")
    p.add_argument("--tol", type=float, default=gridclosure.FN_CLOSURE_TOL)
    add_out(p)
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("plan", help="broadcast schedule for an SO(3) ensemble")
    p.add_argument("system")
    p.add_argument("target", help="target JSON (euler_angles / rotation / "
                                  "rotation_grid)")
    p.add_argument("--degree", dest="degree_bound", type=int, default=11,
                   help="highest odd fitting degree")
    p.add_argument("--tol", type=float, default=None,
                   help="reject the plan when the predicted error exceeds this")
    p.add_argument("--refinement", type=int, default=None,
                   help="fixed commutator cycle count (tuned when omitted)")
    p.add_argument("--verify", action="store_true",
                   help="simulate the plan and report the achieved error")
    add_out(p)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("simulate", help="integrate a schedule over the grid")
    p.add_argument("system")
    p.add_argument("schedule", help="schedule CSV (t_start,t_end,u_1,...)")
    p.add_argument("--record", default="final",
                   help="'final', 'breakpoints' or an integer stride")
    p.add_argument("--threads", type=int, default=os.cpu_count(),
                   help="workers for the generic exponential path")
    add_out(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("steer-sen", help="exact three-phase rigid motion "
                                         "steering")
    p.add_argument("system")
    p.add_argument("--xf", required=True, metavar="X1,X2,...",
                   help="target position, comma separated")
    p.add_argument("--Xf", default=None, metavar="R11,R12;R21,R22",
                   help="target rotation, rows separated by ';' "
                        "(identity when omitted)")
    p.add_argument("--point", action="append", default=None,
                   metavar="LABEL=VALUE",
                   help="parameter point (repeatable)")
    add_out(p)
    p.set_defaults(func=cmd_steer_sen)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except LiesteerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
