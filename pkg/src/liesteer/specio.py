"""File formats: system descriptions, targets, schedules, trajectories.

Result payloads are written with sorted keys and a fixed layout so that
repeated runs over the same inputs produce byte-identical files; anything
time- or host-dependent goes into a separate metadata file instead of
the payload.
"""

from __future__ import annotations

import datetime
import json
from typing import Optional

import numpy as np

from . import algebra, rank
from .errors import SpecError
from .simulate import ControlSchedule, EnsembleTrajectory


# ---------------------------------------------------------------------
# JSON plumbing
# ---------------------------------------------------------------------

def load_json(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise SpecError(f"no such file: {path}")
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path} is not valid JSON: {exc}")


def dump_json_deterministic(data, path):
    """Stable serialization: sorted keys, fixed indentation, newline end.

    Float formatting relies on repr round-tripping, which is exact and
    platform independent for doubles.
    """
    text = json.dumps(data, sort_keys=True, indent=2, allow_nan=False)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text + "\n")


def write_metadata(path, **fields):
    """Run metadata lives apart from payloads on purpose: timestamps here."""
    from . import __version__
    meta = {"created": datetime.datetime.now(datetime.timezone.utc).isoformat(),
            "tool": f"liesteer {__version__}"}
    meta.update(fields)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(meta, sort_keys=True, indent=2) + "\n")


def _check_keys(d: dict, required, optional, where: str):
    if not isinstance(d, dict):
        raise SpecError(f"{where} must be an object, got {type(d).__name__}")
    for k in required:
        if k not in d:
            raise SpecError(f"{where} is missing required key {k!r}")
    allowed = set(required) | set(optional)
    extra = sorted(set(d) - allowed)
    if extra:
        raise SpecError(f"{where} has unknown keys {extra}; allowed: "
                        f"{sorted(allowed)}")


# ---------------------------------------------------------------------
# System files
# ---------------------------------------------------------------------

_GEN_TYPES = {
    "SO": "so_basis",
    "SE": "se_rotation",
    "SU2": "su2_spin",
}


def system_from_dict(d: dict) -> rank.SystemSpec:
    """Build a SystemSpec from its JSON form.

    Layout:
        group: "SO" | "SE" | "SU2"
        n: matrix size (2 for SU2)
        generators: list of {type, i, j | a, param?}; indices are 1-based,
            type must match the group (so_basis / se_rotation / su2_spin),
            param is a declared label or a positive number (default 1)
        translations: list of {"k": axis index}, 1-based (SE only)
        parameters: {label: {min, max, samples?}}
    """
    _check_keys(d, ["group", "n", "generators"],
                ["translations", "parameters"], "system file")
    group = d["group"]
    if group not in rank.GROUPS:
        raise SpecError(f"group must be one of {rank.GROUPS}, got {group!r}")
    n = d["n"]
    if not isinstance(n, int) or n < 2:
        raise SpecError(f"n must be an integer >= 2, got {n!r}")

    params = {}
    box = d.get("parameters", {})
    if not isinstance(box, dict):
        raise SpecError("parameters must be an object")
    for label, rng in box.items():
        _check_keys(rng, ["min", "max"], ["samples"],
                    f"parameters[{label!r}]")
        params[label] = rank.ParamRange(
            lo=float(rng["min"]), hi=float(rng["max"]),
            samples=int(rng.get("samples", 1)))

    family = {"SO": "so", "SE": "se", "SU2": "su2"}[group]
    basis = algebra.standard_basis(family, n)
    by_label = {b.label: b for b in basis}
    want_type = _GEN_TYPES[group]

    gens = []
    for pos, g in enumerate(d["generators"]):
        where = f"generators[{pos}]"
        if not isinstance(g, dict) or "type" not in g:
            raise SpecError(f"{where} must be an object with a 'type'")
        if g["type"] != want_type:
            raise SpecError(f"{where} has type {g['type']!r}; {group} systems "
                            f"use {want_type!r}")
        if want_type == "su2_spin":
            _check_keys(g, ["type", "a"], ["param"], where)
            a = g["a"]
            if a not in (1, 2, 3):
                raise SpecError(f"{where}: a must be 1, 2 or 3, got {a!r}")
            elem = by_label[f"S{a}"]
        else:
            _check_keys(g, ["type", "i", "j"], ["param"], where)
            i, j = g["i"], g["j"]
            if not (isinstance(i, int) and isinstance(j, int) and
                    1 <= i < j <= n):
                raise SpecError(f"{where}: need integers 1 <= i < j <= {n}, "
                                f"got i={i!r}, j={j!r}")
            tag = "O" if group == "SO" else "R"
            elem = by_label[f"{tag}[{i},{j}]"]
        w = g.get("param", 1.0)
        if isinstance(w, str):
            if w not in params:
                raise SpecError(f"{where}: parameter {w!r} is not declared "
                                f"in parameters")
        else:
            w = float(w)
        gens.append(rank.Generator(element=elem, weight=w))

    raw_tr = d.get("translations", [])
    if raw_tr and group != "SE":
        raise SpecError("translations are only valid for SE systems")
    translations = []
    for pos, entry in enumerate(raw_tr):
        _check_keys(entry, ["k"], [], f"translations[{pos}]")
        k = entry["k"]
        if not (isinstance(k, int) and 1 <= k <= n):
            raise SpecError(f"translation index {k!r} out of range 1..{n}")
        translations.append(k)

    return rank.SystemSpec(group=group, n=n, generators=tuple(gens),
                           translations=tuple(translations), parameters=params)


def system_to_dict(spec: rank.SystemSpec) -> dict:
    want_type = _GEN_TYPES[spec.group]
    gens = []
    for g in spec.generators:
        entry = {"type": want_type}
        if want_type == "su2_spin":
            entry["a"] = g.element.indices[0]
        else:
            entry["i"], entry["j"] = g.element.indices
        if isinstance(g.weight, str) or float(g.weight) != 1.0:
            entry["param"] = g.weight
        gens.append(entry)
    out = {"group": spec.group, "n": spec.n, "generators": gens}
    if spec.translations:
        out["translations"] = [{"k": k} for k in spec.translations]
    if spec.parameters:
        out["parameters"] = {
            label: {"min": r.lo, "max": r.hi, "samples": r.samples}
            for label, r in spec.parameters.items()}
    return out


def load_system(path) -> rank.SystemSpec:
    return system_from_dict(load_json(path))


def save_system(spec: rank.SystemSpec, path):
    dump_json_deterministic(system_to_dict(spec), path)


# ---------------------------------------------------------------------
# Target files
# ---------------------------------------------------------------------

def rotation_target_from_dict(d: dict, spec: rank.SystemSpec):
    """Planner target: constant angles, one matrix, or a per-point stack.

    kinds:
        euler_angles: {"kind": "euler_angles", "angles": [t1, t2, t3]}
            composed about the standard x, y, z axes in that order
        rotation: {"kind": "rotation", "matrix": [[...]]}
        rotation_grid: {"kind": "rotation_grid", "matrices": [[[...]]]}
            one matrix per grid point, grid-row order
    """
    from . import synthesis
    _check_keys(d, ["kind"], ["angles", "matrix", "matrices"], "target file")
    kind = d["kind"]
    if kind == "euler_angles":
        if "angles" not in d:
            raise SpecError("euler_angles target needs 'angles'")
        ang = np.asarray(d["angles"], dtype=float)
        if ang.shape != (3,):
            raise SpecError(f"'angles' must have 3 entries, got shape {ang.shape}")
        return synthesis.rotation_from_euler(ang)
    if kind == "rotation":
        if "matrix" not in d:
            raise SpecError("rotation target needs 'matrix'")
        m = np.asarray(d["matrix"], dtype=float)
        if m.shape != (3, 3):
            raise SpecError(f"'matrix' must be 3x3, got {m.shape}")
        return m
    if kind == "rotation_grid":
        if "matrices" not in d:
            raise SpecError("rotation_grid target needs 'matrices'")
        m = np.asarray(d["matrices"], dtype=float)
        p_cnt = spec.grid().shape[0]
        if m.shape != (p_cnt, 3, 3):
            raise SpecError(f"'matrices' must have shape ({p_cnt}, 3, 3) for "
                            f"this system's grid, got {m.shape}")
        return m
    raise SpecError(f"unknown target kind {kind!r}; expected euler_angles, "
                    f"rotation or rotation_grid")


# ---------------------------------------------------------------------
# Delimited files
# ---------------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def write_schedule_csv(schedule: ControlSchedule, path):
    """One interval per row: t_start, t_end, then one column per channel."""
    cols = ["t_start", "t_end"] + \
        [f"u_{c + 1}" for c in range(schedule.channels)]
    bp = schedule.breakpoints()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(cols) + "\n")
        for k in range(len(schedule)):
            row = [_fmt(bp[k]), _fmt(bp[k + 1])] + \
                [_fmt(v) for v in schedule.controls[k]]
            fh.write(",".join(row) + "\n")


def read_schedule_csv(path, channels: Optional[int] = None) -> ControlSchedule:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
    except FileNotFoundError:
        raise SpecError(f"no such file: {path}")
    if not lines:
        raise SpecError(f"{path} is empty")
    header = lines[0].split(",")
    if header[:2] != ["t_start", "t_end"]:
        raise SpecError(f"{path}: first columns must be t_start,t_end, got "
                        f"{lines[0]!r}")
    n_chan = len(header) - 2
    if channels is not None and n_chan != channels:
        raise SpecError(f"{path} has {n_chan} control columns, system needs "
                        f"{channels}")
    widths = []
    controls = []
    prev_end = None
    for ln_no, ln in enumerate(lines[1:], start=2):
        parts = ln.split(",")
        if len(parts) != n_chan + 2:
            raise SpecError(f"{path}:{ln_no}: expected {n_chan + 2} fields, "
                            f"got {len(parts)}")
        try:
            vals = [float(p) for p in parts]
        except ValueError as exc:
            raise SpecError(f"{path}:{ln_no}: {exc}")
        t0, t1 = vals[0], vals[1]
        if not t1 > t0:
            raise SpecError(f"{path}:{ln_no}: t_end must exceed t_start")
        if prev_end is not None and abs(t0 - prev_end) > 1e-9:
            raise SpecError(f"{path}:{ln_no}: intervals must be contiguous "
                            f"(t_start {t0!r} vs previous t_end {prev_end!r})")
        prev_end = t1
        widths.append(t1 - t0)
        controls.append(vals[2:])
    if not widths:
        raise SpecError(f"{path} declares no intervals")
    return ControlSchedule(np.array(widths), np.array(controls))


def write_trajectory_csv(traj: EnsembleTrajectory, path):
    """Recorded states, one row per (grid point, time).

    Columns: grid_index (0-based row into the grid), t, then the state
    matrix flattened row-major with 1-based entry names; complex entries
    get re/im column pairs.
    """
    n = traj.states.shape[-1]
    complex_out = bool(np.iscomplexobj(traj.states))
    cols = ["grid_index", "t"]
    for r in range(1, n + 1):
        for c in range(1, n + 1):
            if complex_out:
                cols += [f"re_{r}_{c}", f"im_{r}_{c}"]
            else:
                cols.append(f"m_{r}_{c}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(cols) + "\n")
        for p in range(traj.points.shape[0]):
            for k in range(traj.times.shape[0]):
                row = [str(p), _fmt(traj.times[k])]
                mat = traj.states[k, p]
                for r in range(n):
                    for c in range(n):
                        if complex_out:
                            row += [_fmt(mat[r, c].real), _fmt(mat[r, c].imag)]
                        else:
                            row.append(_fmt(mat[r, c]))
                fh.write(",".join(row) + "\n")
