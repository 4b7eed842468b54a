"""Broadcast control synthesis.

Two constructions live here.

Rotation ensembles: every system in the family sees the same three
controls, but its generators are scaled by its own parameter value, so a
control that is right for one member over- or under-rotates the others.
The planner splits the target into three axis rotations (Euler angles in
the frame of the generating triple), approximates each angle profile by
an odd polynomial in the parameter, and realizes each monomial
coefficient with a nested group-commutator schedule whose bracket word
has exactly that parameter degree.  Flows about a single axis commute,
so summing monomials per axis is exact; the only errors are the fit
residual and the commutator approximation, and both are reported.

Rigid motions: translation channels act in the fixed space frame, so a
final rotation about the origin carries the position with it.  Steering
is exact in three phases: rotate to A^-1 X_F, translate straight to a
point z inside the translation span with |z| = |x_F|, then rotate by the
A that maps z onto x_F.  Each phase is a single interval (two when the
first rotation sits at the cut locus), hence no approximation error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from . import algebra, covers, rank, simulate
from .errors import (CompileDepthError, CutLocusError, DegreeInsufficientError,
                     DegreeTooHighError, SpecError, SteeringError)
from .simulate import ControlSchedule

FIT_CONDITION_LIMIT = 1e12
COEFF_SKIP = 1e-14


# ---------------------------------------------------------------------
# Odd polynomial fits
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class OddPolyFit:
    """Least-squares fit of a profile by sum_k c_k beta^(2k+1)."""

    degrees: tuple
    coefficients: np.ndarray
    sup_error: float
    condition: float
    residuals: np.ndarray

    def __call__(self, beta) -> np.ndarray:
        beta = np.asarray(beta, dtype=float)
        out = np.zeros_like(beta)
        for d, c in zip(self.degrees, self.coefficients):
            out = out + c * beta ** d
        return out


def fit_odd_polynomial(beta, values, degree_bound: int) -> OddPolyFit:
    """Fit values(beta) by odd powers of beta up to degree_bound.

    Raises DegreeTooHighError when the design matrix condition number
    passes 1e12, which is the point where the coefficients stop being
    individually meaningful.
    """
    beta = np.asarray(beta, dtype=float).reshape(-1)
    values = np.asarray(values, dtype=float).reshape(-1)
    if beta.shape != values.shape:
        raise ValueError(
            f"{beta.shape[0]} grid values but {values.shape[0]} targets")
    if degree_bound < 1:
        raise ValueError(f"degree bound must be >= 1, got {degree_bound}")
    degrees = tuple(range(1, degree_bound + 1, 2))
    design = np.stack([beta ** d for d in degrees], axis=1)
    condition = float(np.linalg.cond(design))
    if condition > FIT_CONDITION_LIMIT:
        raise DegreeTooHighError(
            f"odd design matrix through degree {degree_bound} has condition "
            f"{condition:.3e} (limit {FIT_CONDITION_LIMIT:.0e}); lower the bound "
            f"or widen the parameter box")
    coeff, *_ = np.linalg.lstsq(design, values, rcond=None)
    resid = design @ coeff - values
    return OddPolyFit(degrees=degrees, coefficients=coeff,
                      sup_error=float(np.abs(resid).max()) if resid.size else 0.0,
                      condition=condition, residuals=resid)


# ---------------------------------------------------------------------
# Euler factorization in a triple frame
# ---------------------------------------------------------------------

def so3_axis(m) -> np.ndarray:
    """Axis vector of a 3x3 skew matrix (inverse of the hat map)."""
    m = np.asarray(m)
    return np.array([m[2, 1], m[0, 2], m[1, 0]], dtype=float)


def triple_frame(mats) -> np.ndarray:
    """Orthogonal frame whose columns are the axes of a cyclic triple.

    A cyclic orthonormal triple in so(3) always has right-handed
    orthonormal axes, so the result lies in SO(3); anything else means
    the input was not such a triple.
    """
    q = np.stack([so3_axis(m) for m in mats], axis=1)
    if np.abs(q.T @ q - np.eye(3)).max() > 1e-9 or np.linalg.det(q) < 0:
        raise SpecError("generators do not form a right-handed orthonormal "
                        "so(3) triple; normalize them first")
    return q


def euler_from_rotation(r, frame=None, gimbal_tol=1e-8):
    """Angles (t1, t2, t3) with r = exp(t1 X1) exp(t2 X2) exp(t3 X3).

    X1, X2, X3 are the cyclic triple whose axes are the columns of
    frame (standard basis axes when frame is None).  At the gimbal
    singularity |cos t2| ~ 0 the split is not unique; t3 is set to 0.
    """
    r = np.asarray(r, dtype=float)
    if frame is not None:
        r = frame.T @ r @ frame
    s2 = min(1.0, max(-1.0, float(r[0, 2])))
    t2 = math.asin(s2)
    if abs(math.cos(t2)) < gimbal_tol:
        t3 = 0.0
        t1 = math.atan2(s2 * r[1, 0], r[1, 1])
    else:
        t1 = math.atan2(-r[1, 2], r[2, 2])
        t3 = math.atan2(-r[0, 1], r[0, 0])
    return np.array([t1, t2, t3])


def euler_decompose(targets, frame=None, gimbal_tol=1e-8):
    """Angle triples for a stack of rotations, with gimbal flags.

    Args:
        targets: (3, 3) rotation or (P, 3, 3) stack.
        frame: optional triple frame; standard axes otherwise.

    Returns:
        (angles, gimbal): angles has shape (P, 3) (or (3,) for a single
        matrix), gimbal marks points where the middle angle sits at its
        range boundary and the split is not unique (third angle set 0).
    """
    arr = np.asarray(targets, dtype=float)
    single = arr.ndim == 2
    if single:
        arr = arr[None]
    angles = np.empty((arr.shape[0], 3))
    gimbal = np.zeros(arr.shape[0], dtype=bool)
    for p in range(arr.shape[0]):
        algebra.check_special_orthogonal(arr[p])
        angles[p] = euler_from_rotation(arr[p], frame=frame,
                                        gimbal_tol=gimbal_tol)
        gimbal[p] = abs(math.cos(angles[p, 1])) < gimbal_tol
    if single:
        return angles[0], bool(gimbal[0])
    return angles, gimbal


def rotation_from_euler(angles, frame=None) -> np.ndarray:
    lx = np.array([[0.0, 0, 0], [0, 0, -1], [0, 1, 0]])
    ly = np.array([[0.0, 0, 1], [0, 0, 0], [-1, 0, 0]])
    lz = np.array([[0.0, -1, 0], [1, 0, 0], [0, 0, 0]])
    t1, t2, t3 = [float(a) for a in np.asarray(angles).reshape(3)]
    r = algebra.expm(t1 * lx) @ algebra.expm(t2 * ly) @ algebra.expm(t3 * lz)
    if frame is not None:
        r = frame @ r @ frame.T
    return r


# ---------------------------------------------------------------------
# Bracket words
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class BracketWord:
    """Iterated bracket of the three scaled triple channels.

    The word's value is sign * beta^degree * X_axis where X_axis is the
    triple slot it lands on.  Leaves are single channels (degree 1).
    """

    axis: int
    degree: int
    sign: int
    depth: int
    left: Optional["BracketWord"] = None
    right: Optional["BracketWord"] = None

    def text(self) -> str:
        if self.left is None:
            return f"C{self.axis}"
        return f"[{self.left.text()}, {self.right.text()}]"


def _eps(a: int, b: int) -> int:
    return 1 if (a, b) in ((1, 2), (2, 3), (3, 1)) else -1


@lru_cache(maxsize=None)
def bracket_word_table(max_degree: int) -> dict:
    """Minimal-depth bracket word for every (axis slot, degree).

    Depth is minimized first, then the imbalance of the top split; the
    balanced splits keep the commutator error constants small.  With all
    three channels present every degree >= 1 is reachable on every axis.
    """
    best: dict = {}
    for a in (1, 2, 3):
        best[(a, 1)] = BracketWord(axis=a, degree=1, sign=1, depth=0)
    for e in range(2, max_degree + 1):
        for c in (1, 2, 3):
            others = [s for s in (1, 2, 3) if s != c]
            pick = None
            key = None
            for p in range(1, e):
                q = e - p
                for a, b in ((others[0], others[1]), (others[1], others[0])):
                    wl = best.get((a, p))
                    wr = best.get((b, q))
                    if wl is None or wr is None:
                        continue
                    depth = 1 + max(wl.depth, wr.depth)
                    k = (depth, abs(p - q), a, p)
                    if key is None or k < key:
                        key = k
                        pick = BracketWord(
                            axis=c, degree=e,
                            sign=_eps(a, b) * wl.sign * wr.sign,
                            depth=depth, left=wl, right=wr)
            if pick is not None:
                best[(c, e)] = pick
    return best


def compiled_interval_count(word: BracketWord, refinement: int) -> int:
    if word.left is None:
        return 1
    return 2 * refinement * (compiled_interval_count(word.left, refinement)
                             + compiled_interval_count(word.right, refinement))


def compile_bracket_flow(word: BracketWord, duration: float, refinement: int,
                         slot_channels, n_channels: int,
                         depth_limit: int = 6) -> ControlSchedule:
    """Schedule realizing exp(duration * value(word)) approximately.

    A bracket [L, R] of flow time u is replaced by `refinement` cycles of
    the group commutator with step s = sqrt(u / refinement); each cycle
    contributes exp(s^2 [L, R]) to leading order.  Negative durations
    swap the operands.  Leaves are exact single intervals.

    slot_channels maps a triple slot (1..3) to (channel index, sign) in
    the spec's channel order.
    """
    if word.depth > depth_limit:
        raise CompileDepthError(
            f"word {word.text()} has depth {word.depth}, limit {depth_limit}")
    if abs(duration) < COEFF_SKIP:
        return ControlSchedule.empty(n_channels)
    if word.left is None:
        idx, sgn = slot_channels[word.axis]
        row = np.zeros(n_channels)
        row[idx] = duration * sgn
        return ControlSchedule.single(1.0, row)
    left, right = word.left, word.right
    if duration < 0:
        left, right = right, left
    m = int(refinement)
    if m < 1:
        raise ValueError(f"refinement must be >= 1, got {refinement}")
    s = math.sqrt(abs(duration) / m)

    def cycle(step):
        # time order realizes exp(step L) exp(step R) exp(-step L) exp(-step R)
        return ControlSchedule.concat([
            compile_bracket_flow(right, -step, m, slot_channels, n_channels,
                                 depth_limit),
            compile_bracket_flow(left, -step, m, slot_channels, n_channels,
                                 depth_limit),
            compile_bracket_flow(right, step, m, slot_channels, n_channels,
                                 depth_limit),
            compile_bracket_flow(left, step, m, slot_channels, n_channels,
                                 depth_limit),
        ])

    # Successive cycles alternate orientation: the (-L, -R) cycle produces
    # the same leading commutator term with the cubic correction negated,
    # so pairs cancel it and the error per pair drops an order.
    pos = cycle(s)
    if m == 1:
        return pos
    neg = cycle(-s)
    pair = ControlSchedule.concat([pos, neg])
    parts = [ControlSchedule(np.tile(pair.widths, m // 2),
                             np.tile(pair.controls, (m // 2, 1)))]
    if m % 2:
        parts.append(pos)
    return ControlSchedule.concat(parts)


def measure_compile_error(spec: rank.SystemSpec, word: BracketWord,
                          duration: float, schedule: ControlSchedule,
                          triple_mats, beta: np.ndarray,
                          grid: np.ndarray) -> float:
    """Sup over the grid of the distance between the compiled flow and
    the exact exp(duration * sign * beta^degree * X_axis)."""
    traj = simulate.integrate_ensemble(spec, schedule, grid=grid, record="final")
    x = triple_mats[word.axis - 1]
    worst = 0.0
    for p in range(beta.shape[0]):
        angle = duration * word.sign * beta[p] ** word.degree
        exact = simulate._expm_so3_batch((angle * x)[None])[0]
        worst = max(worst, algebra.geodesic_distance(traj.states[-1][p], exact))
    return worst


# ---------------------------------------------------------------------
# Ensemble planner
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class FlowStep:
    slot: int
    degree: int
    coefficient: float
    refinement: int
    intervals: int
    measured_error: float
    word_text: str


@dataclass(frozen=True)
class FlowPlan:
    """Planned broadcast schedule plus its error accounting.

    predicted_error is the sum of the three sup fit residuals: the Euler
    split is exact and the metric bi-invariant, so fit residuals add and
    this is the error the schedule would achieve with exact monomial
    flows.  compile_error adds the measured defect of the commutator
    approximations; fit + compile bounds the final sup distance up to
    rounding (error_budget).
    """

    schedule: ControlSchedule
    steps: tuple
    fits: dict
    fit_error: float
    compile_error: float
    frame: np.ndarray
    triple_order: tuple
    triple_signs: tuple
    target_angles: np.ndarray
    gimbal: np.ndarray
    grid: np.ndarray

    @property
    def predicted_error(self) -> float:
        return self.fit_error

    @property
    def error_budget(self) -> float:
        return self.fit_error + self.compile_error

    def summary(self) -> dict:
        return {
            "intervals": int(len(self.schedule)),
            "duration": float(self.schedule.duration),
            "fit_error": float(self.fit_error),
            "compile_error": float(self.compile_error),
            "predicted_error": float(self.predicted_error),
            "error_budget": float(self.error_budget),
            "gimbal_points": int(np.count_nonzero(self.gimbal)),
            "steps": [
                {"slot": s.slot, "degree": s.degree,
                 "coefficient": float(s.coefficient),
                 "refinement": int(s.refinement),
                 "intervals": int(s.intervals),
                 "measured_error": float(s.measured_error),
                 "word": s.word_text}
                for s in self.steps],
        }


def _plan_spec_guard(spec: rank.SystemSpec):
    if spec.group != "SO" or spec.n != 3:
        raise SpecError("ensemble planning is implemented for SO(3) systems")
    if spec.translations:
        raise SpecError("rotation planning takes no translation channels")
    if len(spec.generators) != 3:
        raise SpecError(
            f"planning needs exactly 3 generator channels, got {len(spec.generators)}")
    labels = {g.weight for g in spec.generators}
    if len(labels) != 1 or not isinstance(next(iter(labels)), str):
        raise SpecError("planning requires every channel scaled by one shared "
                        "parameter label")
    if len(spec.labels()) != 1:
        raise SpecError("planning supports exactly one declared parameter")


def _normalize_target(spec: rank.SystemSpec, target, grid: np.ndarray):
    p_cnt = grid.shape[0]
    if callable(target):
        mats = np.stack([np.asarray(target(float(b)), dtype=float)
                         for b in grid[:, 0]])
    elif isinstance(target, algebra.EnsembleState):
        if target.points.shape != grid.shape or \
                not np.array_equal(target.points, grid):
            raise SpecError("target grid does not match the system grid")
        mats = np.asarray(target.values, dtype=float)
    else:
        arr = np.asarray(target, dtype=float)
        if arr.shape == (3, 3):
            mats = np.broadcast_to(arr, (p_cnt, 3, 3)).copy()
        elif arr.shape == (p_cnt, 3, 3):
            mats = arr.copy()
        else:
            raise SpecError(
                f"target must be (3, 3) or ({p_cnt}, 3, 3), got {arr.shape}")
    for p in range(p_cnt):
        algebra.check_special_orthogonal(mats[p])
    return mats


def plan_so3_ensemble(spec: rank.SystemSpec, target, degree_bound: int = 11,
                      tol: Optional[float] = None, refinement: Optional[int] = None,
                      depth_limit: int = 6,
                      step_interval_cap: int = 300_000,
                      total_interval_cap: int = 2_000_000) -> FlowPlan:
    """Plan one broadcast schedule steering the whole SO(3) ensemble.

    Args:
        spec: SO(3) system, three channels scaled by one shared label.
        target: end state; a constant (3, 3) rotation, a (P, 3, 3) stack
            over the grid, an EnsembleState on the same grid, or a
            callable beta -> rotation.
        degree_bound: highest monomial degree the fits may use.
        tol: when given, DegreeInsufficientError if the fits at the
            degree bound cannot reach this sup error.
        refinement: commutator cycles per bracket level; tuned per step
            against the measured error when omitted.
        depth_limit: maximum bracket word depth.
        step_interval_cap / total_interval_cap: schedule size guards for
            the tuner.

    Returns:
        FlowPlan; predicted_error is the fit part alone, error_budget
        adds the measured compile defects and bounds the achieved sup
        distance up to integration rounding.
    """
    _plan_spec_guard(spec)
    grid = spec.grid()
    beta = grid[:, 0]
    basis_mats = [np.asarray(g.element.matrix, dtype=float)
                  for g in spec.generators]
    cert, triple = covers.normalize_triple(basis_mats)
    slot_channels = {k + 1: (cert.order[k], cert.signs[k]) for k in range(3)}
    frame = triple_frame(triple)

    targets = _normalize_target(spec, target, grid)
    angles, gimbal = euler_decompose(targets, frame=frame)
    if grid.shape[0] > 1:
        angles = np.unwrap(angles, axis=0)

    fits = {}
    fit_error = 0.0
    for slot in (1, 2, 3):
        fits[slot] = fit_odd_polynomial(beta, angles[:, slot - 1], degree_bound)
        fit_error += fits[slot].sup_error
    if tol is not None and fit_error > tol:
        raise DegreeInsufficientError(
            f"odd fits through degree {degree_bound} achieve sup error "
            f"{fit_error:.3e}, above the requested tol {tol:.3e}; raise the "
            f"degree bound or relax tol")

    table = bracket_word_table(degree_bound)
    steps = []
    parts = []
    compile_error = 0.0
    total_intervals = 0
    budget = None
    if tol is not None:
        hard = sum(1 for slot in (1, 2, 3) for d, c in
                   zip(fits[slot].degrees, fits[slot].coefficients)
                   if d > 1 and abs(c) > COEFF_SKIP)
        budget = max((tol - fit_error) * 0.9 / max(hard, 1), 1e-12)

    # Rightmost Euler factor acts first, so slot 3 flows lead.
    for slot in (3, 2, 1):
        fit = fits[slot]
        for d, c in sorted(zip(fit.degrees, fit.coefficients), reverse=True):
            if abs(c) < COEFF_SKIP:
                continue
            word = table[(slot, d)]
            duration = c * word.sign
            if word.left is None:
                sched = compile_bracket_flow(word, duration, 1, slot_channels,
                                             3, depth_limit)
                err = 0.0
                m_used = 1
            else:
                sched, err, m_used = _tuned_compile(
                    spec, word, duration, slot_channels, triple, beta, grid,
                    refinement, depth_limit, budget,
                    step_interval_cap,
                    max(total_interval_cap - total_intervals, 1))
            parts.append(sched)
            total_intervals += len(sched)
            compile_error += err
            steps.append(FlowStep(slot=slot, degree=d, coefficient=float(c),
                                  refinement=m_used, intervals=len(sched),
                                  measured_error=err, word_text=word.text()))

    schedule = ControlSchedule.concat(parts) if any(len(p) for p in parts) \
        else ControlSchedule.empty(3)
    return FlowPlan(schedule=schedule, steps=tuple(steps), fits=fits,
                    fit_error=fit_error, compile_error=compile_error,
                    frame=frame, triple_order=tuple(cert.order),
                    triple_signs=tuple(cert.signs),
                    target_angles=angles, gimbal=gimbal, grid=grid)


def _tuned_compile(spec, word, duration, slot_channels, triple, beta, grid,
                   refinement, depth_limit, budget, step_cap, remaining_cap):
    """Pick a refinement for one bracket step by measuring its error."""
    cap = min(step_cap, remaining_cap)
    if refinement is not None:
        m = int(refinement)
        sched = compile_bracket_flow(word, duration, m, slot_channels, 3,
                                     depth_limit)
        err = measure_compile_error(spec, word, duration, sched, triple,
                                    beta, grid)
        return sched, err, m
    target_err = budget if budget is not None else 1e-6
    best = None
    m = 1
    while compiled_interval_count(word, m) <= cap:
        sched = compile_bracket_flow(word, duration, m, slot_channels, 3,
                                     depth_limit)
        err = measure_compile_error(spec, word, duration, sched, triple,
                                    beta, grid)
        if best is None or err < best[1]:
            best = (sched, err, m)
        if err <= target_err:
            break
        m *= 2
    if best is None:
        # even one cycle exceeds the cap; take it anyway and report honestly
        sched = compile_bracket_flow(word, duration, 1, slot_channels, 3,
                                     depth_limit)
        err = measure_compile_error(spec, word, duration, sched, triple,
                                    beta, grid)
        best = (sched, err, 1)
    return best


# ---------------------------------------------------------------------
# Rigid motion steering
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class SteerResult:
    schedule: ControlSchedule
    phases: tuple
    notes: dict = field(default_factory=dict)


def _plane_rotation_log(u: np.ndarray, v: np.ndarray, n: int) -> np.ndarray:
    """Log of the rotation taking unit u to unit v inside their plane.

    Closed form, well defined at angle pi (any completion of u to an
    orthonormal pair serves as the plane there).
    """
    c = float(np.clip(u @ v, -1.0, 1.0))
    w = v - c * u
    nw = np.linalg.norm(w)
    if nw < 1e-13:
        if c > 0:
            return np.zeros((n, n))
        # antipodal: pick any direction orthogonal to u
        e2 = None
        for k in range(n):
            cand = np.eye(n)[k] - (u[k]) * u
            if np.linalg.norm(cand) > 1e-6:
                e2 = cand / np.linalg.norm(cand)
                break
        phi = math.pi
    else:
        e2 = w / nw
        phi = math.atan2(nw, c)
    return phi * (np.outer(e2, u) - np.outer(u, e2))


def _rotation_coords(rot_mats, s: np.ndarray, label: str) -> np.ndarray:
    """Coordinates of skew matrix s in the span of the rotation channels."""
    a = np.stack([m.reshape(-1) for m in rot_mats], axis=1)
    coef, *_ = np.linalg.lstsq(a, s.reshape(-1), rcond=None)
    resid = a @ coef - s.reshape(-1)
    scale = max(np.abs(s).max(), 1.0)
    if np.abs(resid).max() > 1e-9 * scale:
        raise SteeringError(
            f"{label} rotation is outside the span of the rotation channels "
            f"(residual {np.abs(resid).max():.3e}); this steering scheme needs "
            f"channels that linearly span so(n)")
    return coef


def three_step_steer_sen(spec: rank.SystemSpec, x_final, X_final,
                         point=None) -> SteerResult:
    """Exact steering of one rigid-motion system to (X_final, x_final).

    Needs rotation channels that linearly span so(n) (so each rotation
    phase is a single interval) and at least one translation channel.
    Translations act in the space frame, which is why the last rotation
    carries the intermediate position onto x_final.
    """
    if spec.group != "SE":
        raise SteeringError("three phase steering applies to rigid motion systems")
    report = rank.check_classical(spec)
    if not report.controllable:
        tags = ", ".join(report.obstructions) if report.obstructions \
            else "rank-deficit"
        raise SteeringError(f"system fails the controllability check ({tags}); "
                            f"steering refused")
    n = spec.n
    X_final = np.asarray(X_final, dtype=float)
    x_final = np.asarray(x_final, dtype=float).reshape(n)
    algebra.check_special_orthogonal(X_final)

    gen_full = [np.asarray(g.element.matrix, dtype=float)
                for g in spec.generators]
    for g, m in zip(spec.generators, gen_full):
        if np.abs(m[:n, n]).max() > 1e-13:
            raise SteeringError(
                f"generator {g.element.label} mixes rotation and translation; "
                f"the three phase scheme needs pure rotation channels")
    rot_mats = [m[:n, :n] for m in gen_full]
    tr_dirs = [e.matrix[:n, n] for e in rank.translation_elements(spec)]
    span = np.stack(tr_dirs, axis=1)        # (n, K)

    pt = simulate._point_array(spec, point) if (point is not None or spec.labels()) \
        else np.zeros(0)
    grid = pt[None, :] if pt.size else np.zeros((1, 0))
    weights = simulate.channel_weights(spec, grid)[:, 0]
    if np.any(weights <= 0):
        raise SteeringError("channel weight vanishes at this parameter point")
    n_chan = len(spec.generators) + len(spec.translations)

    def rotation_intervals(log_s, label):
        """One exact interval realizing exp(log_s); empty for a zero log."""
        if np.abs(log_s).max() < 1e-15:
            return []
        coef = _rotation_coords(rot_mats, log_s, label)
        row = np.zeros(n_chan)
        row[:len(coef)] = coef / weights[:len(coef)]
        return [(1.0, row)]

    def rotation_logs(r, label):
        try:
            return [algebra.logm(r)]
        except CutLocusError:
            # split off a fixed small rotation; the remainder leaves the
            # cut locus for every angle pattern met here
            s0 = rot_mats[0] / max(np.abs(rot_mats[0]).max(), 1.0)
            for scalef in (0.3, 0.7, 1.1):
                d = algebra.expm(scalef * s0)
                try:
                    rest = algebra.logm(r @ d.T)
                except CutLocusError:
                    continue
                return [scalef * s0, rest]
            raise SteeringError(
                f"{label} rotation stayed at the cut locus after retries")

    norm_x = float(np.linalg.norm(x_final))
    phases = []
    intervals = []

    if norm_x < 1e-13:
        r1 = X_final
        s_a = np.zeros((n, n))
        z = np.zeros(n)
    else:
        xhat = x_final / norm_x
        proj = span @ np.linalg.lstsq(span, xhat, rcond=None)[0]
        if np.linalg.norm(proj) > 1e-9:
            zhat = proj / np.linalg.norm(proj)
        else:
            zhat = span[:, 0] / np.linalg.norm(span[:, 0])
        z = norm_x * zhat
        s_a = _plane_rotation_log(zhat, xhat, n)
        a = algebra.expm(s_a)
        r1 = a.T @ X_final

    # phase 1: attitude
    logs = rotation_logs(r1, "initial")
    for s in logs:
        for width, row in rotation_intervals(s, "initial"):
            intervals.append((width, row))
    phases.append(("rotate", r1))

    if norm_x >= 1e-13:
        # phase 2: straight translation inside the channel span
        zc, *_ = np.linalg.lstsq(span, z, rcond=None)
        if np.abs(span @ zc - z).max() > 1e-10 * max(norm_x, 1.0):
            raise SteeringError("translation target left the channel span")
        row = np.zeros(n_chan)
        ng = len(spec.generators)
        row[ng:] = zc / weights[ng:]
        intervals.append((1.0, row))
        phases.append(("translate", z))

        # phase 3: carry the position onto x_final
        if np.abs(s_a).max() > 0:
            for width, row in rotation_intervals(s_a, "final"):
                intervals.append((width, row))
        phases.append(("rotate", algebra.expm(s_a)))

    widths = np.array([w for w, _ in intervals])
    controls = np.stack([r for _, r in intervals]) if intervals \
        else np.zeros((0, n_chan))
    schedule = ControlSchedule(widths, controls) if intervals \
        else ControlSchedule.empty(n_chan)
    return SteerResult(schedule=schedule, phases=tuple(phases),
                       notes={"translation_point": z.tolist(),
                              "position_norm": norm_x})
