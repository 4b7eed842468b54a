"""Exact integration of piecewise-constant broadcast controls.

Controls here are piecewise constant, so the flow over one interval is a
single matrix exponential and a trajectory is a finite product of them:
there is no step-size error anywhere, only rounding.  The module keeps
closed-form exponential kernels for the hot cases (so(3) via the
axis-angle formula, su(2) via its quadratic minimal polynomial) and falls
back to scipy's expm elsewhere (se(n) phases are short in every workflow
this package ships).

Ensemble runs evaluate the same schedule at every grid point of the
parameter box; the per-point generator weights are the only thing that
varies.  All hot paths are vectorized across the grid.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import algebra, rank
from .algebra import EnsembleState
from .errors import SpecError


@dataclass(frozen=True)
class ControlSchedule:
    """Piecewise-constant controls: interval widths plus one row of channel
    amplitudes per interval.

    Channel order matches the spec: generators first, then translations.
    """

    widths: np.ndarray
    controls: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.widths, dtype=float).reshape(-1)
        u = np.atleast_2d(np.asarray(self.controls, dtype=float))
        if u.shape[0] != w.shape[0]:
            raise ValueError(
                f"{w.shape[0]} widths but {u.shape[0]} control rows")
        if w.size and w.min() <= 0:
            raise ValueError(f"interval widths must be positive, min is {w.min()!r}")
        w.setflags(write=False)
        u.setflags(write=False)
        object.__setattr__(self, "widths", w)
        object.__setattr__(self, "controls", u)

    def __len__(self) -> int:
        return self.widths.shape[0]

    @property
    def channels(self) -> int:
        return self.controls.shape[1]

    @property
    def duration(self) -> float:
        return float(self.widths.sum())

    @staticmethod
    def empty(channels: int) -> "ControlSchedule":
        return ControlSchedule(np.zeros(0), np.zeros((0, channels)))

    @staticmethod
    def single(width: float, controls) -> "ControlSchedule":
        return ControlSchedule(np.array([width]), np.asarray(controls)[None, :])

    @staticmethod
    def concat(parts) -> "ControlSchedule":
        parts = [p for p in parts if len(p)]
        if not parts:
            raise ValueError("cannot concatenate zero non-empty schedules")
        return ControlSchedule(
            np.concatenate([p.widths for p in parts]),
            np.concatenate([p.controls for p in parts]))

    def breakpoints(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.widths)])


@dataclass(frozen=True)
class SingleTrajectory:
    times: np.ndarray
    states: np.ndarray

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


@dataclass(frozen=True)
class EnsembleTrajectory:
    times: np.ndarray
    points: np.ndarray
    states: np.ndarray  # (K, P, n, n)

    @property
    def final(self) -> EnsembleState:
        return EnsembleState(points=self.points, values=self.states[-1])


# ---------------------------------------------------------------------
# Exponential kernels
# ---------------------------------------------------------------------

def _expm_so3_batch(m: np.ndarray) -> np.ndarray:
    """Axis-angle exponential for a (..., 3, 3) stack of real skew matrices."""
    a1 = m[..., 2, 1]
    a2 = m[..., 0, 2]
    a3 = m[..., 1, 0]
    theta = np.sqrt(a1 * a1 + a2 * a2 + a3 * a3)
    small = theta < 1e-6
    t2 = theta * theta
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(small, 1.0 - t2 / 6.0 + t2 * t2 / 120.0,
                     np.sin(theta) / np.where(small, 1.0, theta))
        c = np.where(small, 0.5 - t2 / 24.0 + t2 * t2 / 720.0,
                     (1.0 - np.cos(theta)) / np.where(small, 1.0, t2))
    eye = np.broadcast_to(np.eye(3), m.shape)
    return eye + s[..., None, None] * m + c[..., None, None] * (m @ m)


def _expm_su2_batch(m: np.ndarray) -> np.ndarray:
    """Closed-form exponential for traceless skew-Hermitian 2x2 stacks.

    Such matrices square to -c^2 I, so exp(m) = cos(c) I + sinc-like(c) m.
    """
    m2 = m @ m
    c2 = -0.5 * np.real(m2[..., 0, 0] + m2[..., 1, 1])
    c2 = np.maximum(c2, 0.0)
    c = np.sqrt(c2)
    small = c < 1e-6
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(small, 1.0 - c2 / 6.0 + c2 * c2 / 120.0,
                     np.sin(c) / np.where(small, 1.0, c))
    eye = np.broadcast_to(np.eye(2, dtype=complex), m.shape)
    return np.cos(c)[..., None, None] * eye + s[..., None, None] * m


def _expm_batch(m: np.ndarray, group: str, threads=None) -> np.ndarray:
    if group in ("SO",) and m.shape[-1] == 3:
        return _expm_so3_batch(m)
    if group == "SU2":
        return _expm_su2_batch(m)
    flat = m.reshape(-1, m.shape[-2], m.shape[-1])
    out = np.empty_like(flat)
    if threads and threads > 1 and flat.shape[0] > 1:
        def work(i):
            out[i] = scipy.linalg.expm(flat[i])
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            list(pool.map(work, range(flat.shape[0])))
    else:
        for i in range(flat.shape[0]):
            out[i] = scipy.linalg.expm(flat[i])
    return out.reshape(m.shape)


# ---------------------------------------------------------------------
# Generator fields
# ---------------------------------------------------------------------

def _point_array(spec: rank.SystemSpec, point) -> np.ndarray:
    labels = spec.labels()
    if point is None:
        if labels:
            raise SpecError(
                f"system carries parameter labels {labels}; a point is required")
        return np.zeros(0)
    if isinstance(point, dict):
        missing = [l for l in labels if l not in point]
        if missing:
            raise SpecError(f"point is missing labels {missing}")
        return np.array([float(point[l]) for l in labels])
    arr = np.asarray(point, dtype=float).reshape(-1)
    if arr.shape[0] != len(labels):
        raise SpecError(
            f"point has {arr.shape[0]} coordinates, spec declares {len(labels)}")
    return arr


def channel_weights(spec: rank.SystemSpec, grid: np.ndarray) -> np.ndarray:
    """Per-channel scalar weights on a (P, d) grid, shape (C, P)."""
    labels = spec.labels()
    col = {l: i for i, l in enumerate(labels)}
    rows = []
    for g in spec.generators:
        if isinstance(g.weight, str):
            rows.append(grid[:, col[g.weight]])
        else:
            rows.append(np.full(grid.shape[0], float(g.weight)))
    for _ in spec.translations:
        rows.append(np.ones(grid.shape[0]))
    return np.stack(rows)


def _channel_basis(spec: rank.SystemSpec) -> np.ndarray:
    mats = spec.channel_matrices()
    return np.stack(mats)


# ---------------------------------------------------------------------
# Integration
# ---------------------------------------------------------------------

def _record_plan(n_intervals: int, record) -> np.ndarray:
    """Indices of intervals after which the state is stored."""
    if record == "final":
        return np.array([n_intervals - 1], dtype=int) if n_intervals else np.array([], dtype=int)
    if record == "breakpoints":
        return np.arange(n_intervals)
    stride = int(record)
    if stride < 1:
        raise ValueError(f"record stride must be >= 1, got {record!r}")
    idx = np.arange(stride - 1, n_intervals, stride)
    if n_intervals and (idx.size == 0 or idx[-1] != n_intervals - 1):
        idx = np.append(idx, n_intervals - 1)
    return idx


def integrate_single(spec: rank.SystemSpec, schedule: ControlSchedule,
                     point=None, state0=None,
                     record="breakpoints") -> SingleTrajectory:
    """Integrate one system of the family at a fixed parameter point.

    Args:
        spec: the system description.
        schedule: piecewise-constant controls; channel count must match.
        point: parameter values (dict label -> value, or array over sorted
            labels); omit only for label-free systems.
        state0: initial group element (identity by default).
        record: "breakpoints", "final", or an integer stride.

    Returns:
        SingleTrajectory; times[0] = 0 with the initial state first.
    """
    pt = _point_array(spec, point)
    grid = pt[None, :] if pt.size else np.zeros((1, 0))
    traj = integrate_ensemble(
        spec, schedule, grid=grid, record=record,
        state0=None if state0 is None else np.asarray(state0)[None])
    return SingleTrajectory(times=traj.times, states=traj.states[:, 0])


def integrate_ensemble(spec: rank.SystemSpec, schedule: ControlSchedule,
                       grid=None, record="final", state0=None,
                       threads=None) -> EnsembleTrajectory:
    """Integrate the whole ensemble under one broadcast schedule.

    Args:
        spec: system description; supplies the default grid.
        schedule: shared controls, one row per interval.
        grid: optional explicit (P, d) grid.
        record: "final", "breakpoints", or integer stride; the initial
            state is always included.
        state0: optional (P, n, n) initial states (identity by default).
        threads: worker threads for the generic expm fallback.

    Returns:
        EnsembleTrajectory with states (K, P, n, n).
    """
    grid = np.atleast_2d(spec.grid() if grid is None else np.asarray(grid, dtype=float))
    n_chan = len(spec.generators) + len(spec.translations)
    if schedule.channels != n_chan:
        raise SpecError(
            f"schedule has {schedule.channels} channels, system has {n_chan}")
    weights = channel_weights(spec, grid)          # (C, P)
    basis = _channel_basis(spec)                   # (C, n, n)
    n = basis.shape[-1]
    p_cnt = grid.shape[0]

    if state0 is None:
        state = np.broadcast_to(
            np.eye(n, dtype=basis.dtype), (p_cnt, n, n)).copy()
    else:
        state = np.array(state0, dtype=basis.dtype, copy=True)
        if state.shape != (p_cnt, n, n):
            raise SpecError(
                f"state0 must have shape {(p_cnt, n, n)}, got {state.shape}")

    keep = _record_plan(len(schedule), record)
    keep_set = set(keep.tolist())
    times = [0.0]
    states = [state.copy()]

    bp = schedule.breakpoints()
    # Exponentials are computed in chunks so long schedules stay both
    # vectorized and bounded in memory; the running product is sequential.
    chunk = max(1, int(8_000_000 // max(1, p_cnt * n * n)))
    scaled = schedule.controls * schedule.widths[:, None]   # (N, C)
    for lo in range(0, len(schedule), chunk):
        hi = min(lo + chunk, len(schedule))
        gen = np.einsum("kc,cp,cij->kpij", scaled[lo:hi], weights, basis,
                        optimize=True)
        steps = _expm_batch(gen, spec.group, threads=threads)
        for k in range(hi - lo):
            state = steps[k] @ state
            i = lo + k
            if i in keep_set:
                times.append(float(bp[i + 1]))
                states.append(state.copy())

    return EnsembleTrajectory(
        times=np.array(times), points=grid, states=np.stack(states))


# ---------------------------------------------------------------------
# Scoring
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class EvalReport:
    """Distance between an achieved ensemble state and a target."""

    sup: float
    per_point: np.ndarray
    argmax_index: int
    parts: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "sup_distance": self.sup,
            "argmax_index": int(self.argmax_index),
            "per_point": [float(x) for x in self.per_point],
        }
        for k, v in self.parts.items():
            out[k] = [float(x) for x in v]
        return out


def evaluate(spec: rank.SystemSpec, achieved: EnsembleState,
             target: EnsembleState) -> EvalReport:
    """Score achieved against target on the shared grid.

    Rotation and spin groups use the bi-invariant geodesic distance.
    Rigid motions have no bi-invariant metric, so the rotation block is
    scored geodesically, the translation in the Euclidean norm, and the
    pointwise figure is the max of the two (both parts are reported).

    target may also be a single matrix (broadcast over the grid) or a
    (P, n, n) stack on the same grid as achieved.
    """
    if not isinstance(target, algebra.EnsembleState):
        arr = np.asarray(target)
        if arr.ndim == 2:
            arr = np.broadcast_to(arr, (len(achieved),) + arr.shape)
        target = algebra.EnsembleState(achieved.points, np.array(arr))
    algebra._same_grid(achieved, target)
    p_cnt = len(achieved)
    if spec.group in ("SO", "SU2"):
        per = algebra.ensemble_distance_table(achieved, target)
        return EvalReport(sup=float(per.max()), per_point=per,
                          argmax_index=int(per.argmax()))
    n = spec.n
    rot = np.empty(p_cnt)
    tra = np.empty(p_cnt)
    for p in range(p_cnt):
        ra, ta = algebra.rigid_parts(achieved.values[p])
        rb, tb = algebra.rigid_parts(target.values[p])
        rot[p] = algebra.geodesic_distance(ra, rb)
        tra[p] = float(np.linalg.norm(ta - tb))
    per = np.maximum(rot, tra)
    return EvalReport(sup=float(per.max()), per_point=per,
                      argmax_index=int(per.argmax()),
                      parts={"rotation": rot, "translation": tra})


def membership_drift(spec: rank.SystemSpec, state: EnsembleState) -> float:
    """Worst group-membership defect across the grid (orthogonality /
    unitarity of the rotation part, plus the affine last row for SE)."""
    worst = 0.0
    for p in range(len(state)):
        x = state.values[p]
        if spec.group == "SU2":
            n = x.shape[0]
            worst = max(worst, float(np.abs(x.conj().T @ x - np.eye(n)).max()))
            worst = max(worst, abs(np.linalg.det(x) - 1.0))
            continue
        if spec.group == "SE":
            n = spec.n
            worst = max(worst, float(np.abs(x[n, :n]).max()), abs(x[n, n] - 1.0))
            x = x[:n, :n]
        n = x.shape[0]
        worst = max(worst, float(np.abs(x.T @ x - np.eye(n)).max()))
        worst = max(worst, abs(np.linalg.det(x) - 1.0))
    return worst
