"""Lie closures of parameter-dependent generator families on finite grids.

The ensemble question "which group-valued functions of the parameter can
broadcast controls reach?" has a finite shadow: sample the parameter box
on a grid, treat an algebra-valued function as one long coordinate vector
(basis coordinates per grid point, concatenated in grid order), and close
the generator family under pointwise bracketing.  Saturation of this
finite closure at |grid| * dim(algebra) is the computational signature of
ensemble controllability; stalling strictly below it certifies an
obstruction on that grid.

Grids must stay inside [0.5, 4] per coordinate.  Outside that window high
monomial powers make the orthonormalization struggle against float64 and
verdicts stop being trustworthy, so the module refuses rather than guess.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import algebra, rank
from .errors import GridError

GRID_LO = 0.5
GRID_HI = 4.0
FN_CLOSURE_TOL = 1e-8


@dataclass(frozen=True)
class GridClosureReport:
    """Outcome of a grid closure run.

    dims[k] is the span dimension after bracket depth k (dims[0] counts
    the generators themselves).  saturated means the closure filled
    |grid| * dim(algebra); stalled means two consecutive depths added
    nothing while still short of saturation.
    """

    target_dim: int
    dims: tuple
    saturated: bool
    stalled: bool
    depth_reached: int
    condition: float
    grid: np.ndarray = field(repr=False)

    @property
    def final_dim(self) -> int:
        return self.dims[-1]

    @property
    def deficiency(self) -> int:
        return self.target_dim - self.final_dim

    def saturation_depth(self):
        """First depth whose dimension hits the target, or None."""
        for k, d in enumerate(self.dims):
            if d == self.target_dim:
                return k
        return None


def saturation_report(report: GridClosureReport) -> dict:
    """Plain-dict summary of a closure run, for JSON output."""
    return {
        "target_dim": report.target_dim,
        "final_dim": report.final_dim,
        "deficiency": report.deficiency,
        "dims_per_depth": list(report.dims),
        "saturated": report.saturated,
        "stalled": report.stalled,
        "depth_reached": report.depth_reached,
        "saturation_depth": report.saturation_depth(),
        "condition": report.condition,
        "grid_points": int(report.grid.shape[0]),
    }


def _check_grid(grid: np.ndarray) -> np.ndarray:
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    if grid.size == 0 or grid.shape[0] == 0:
        raise GridError("parameter grid is empty")
    if grid.min() < GRID_LO or grid.max() > GRID_HI:
        raise GridError(
            f"grid coordinates must stay within [{GRID_LO}, {GRID_HI}] "
            f"(got range [{grid.min():.3g}, {grid.max():.3g}]); rescale the box")
    rounded = [tuple(p) for p in grid]
    if len(set(rounded)) != len(rounded):
        raise GridError("parameter grid has duplicate points")
    return grid


def generator_functions(spec: rank.SystemSpec, grid: np.ndarray) -> np.ndarray:
    """Seed coordinate functions, shape (num_channels, P, D).

    Channel order is the spec's: generators first, then translations.
    Entry [c, p, :] holds the ambient-basis coordinates of channel c's
    field evaluated at grid point p.
    """
    basis = spec.ambient_basis()
    dim = len(basis)
    labels = spec.labels()
    col = {l: i for i, l in enumerate(labels)}
    index_of = {b.label: i for i, b in enumerate(basis)}

    chans = []
    for g in spec.generators:
        if isinstance(g.weight, str):
            w = grid[:, col[g.weight]]
        else:
            w = np.full(grid.shape[0], float(g.weight))
        f = np.zeros((grid.shape[0], dim))
        f[:, index_of[g.element.label]] = w
        chans.append(f)
    for k in spec.translations:
        f = np.zeros((grid.shape[0], dim))
        f[:, index_of[f"T[{k}]"]] = 1.0
        chans.append(f)
    return np.stack(chans)


def fn_lie_closure(spec: rank.SystemSpec, grid=None, max_depth: int = 12,
                   tol: float = FN_CLOSURE_TOL) -> GridClosureReport:
    """Close the spec's generator family under pointwise bracketing.

    Depth k brackets every function found so far against the original
    generator channels only (bracketing against the full current family
    adds nothing: nested brackets reduce to generator-anchored ones by the
    Jacobi identity, and the anchored version keeps the growth bounded).
    New directions are absorbed by modified Gram-Schmidt over flattened
    (P * D)-vectors with relative residual cutoff `tol`.

    Args:
        spec: the system; its parameter box supplies the grid by default.
        grid: optional explicit (P, d) grid overriding the spec's.
        max_depth: bracket depth budget.
        tol: orthonormalization residual cutoff.

    Returns:
        GridClosureReport (never raises on stall; grid problems do raise).
    """
    grid = _check_grid(spec.grid() if grid is None else grid)
    labels = spec.labels()
    if grid.shape[1] != len(labels):
        raise GridError(
            f"grid has {grid.shape[1]} coordinates but the spec declares "
            f"{len(labels)} parameter labels")

    basis = spec.ambient_basis()
    dim = len(basis)
    tensor = algebra.structure_tensor(basis)
    seeds = generator_functions(spec, grid)
    n_pts = grid.shape[0]
    target = n_pts * dim

    ortho: list = []
    raw_accepted: list = []

    def absorb(f: np.ndarray) -> bool:
        v = f.ravel()
        nrm = np.linalg.norm(v)
        if nrm <= tol:
            return False
        w = v.copy()
        for u in ortho:
            w -= (u @ w) * u
        if np.linalg.norm(w) <= tol * max(1.0, nrm):
            return False
        for u in ortho:
            w -= (u @ w) * u
        w /= np.linalg.norm(w)
        ortho.append(w)
        raw_accepted.append(v / max(nrm, 1.0))
        return True

    # frontier bracketing: new directions at depth k+1 all arise from
    # bracketing depth-k additions against the seeds (bilinearity plus the
    # Jacobi identity make older functions redundant)
    frontier: list = []
    for f in seeds:
        if absorb(f):
            frontier.append(f)
    dims = [len(ortho)]

    stalled = False
    depth = 0
    zero_rounds = 0
    while depth < max_depth and len(ortho) < target:
        depth += 1
        added: list = []
        for f in frontier:
            for g in seeds:
                # pointwise bracket via the structure tensor
                h = np.einsum("pa,pb,abk->pk", f, g, tensor, optimize=True)
                if absorb(h):
                    added.append(h)
        dims.append(len(ortho))
        if not added:
            zero_rounds += 1
            if zero_rounds >= 2:
                stalled = len(ortho) < target
                break
        else:
            zero_rounds = 0
            frontier = added

    saturated = len(ortho) >= target
    cond = float(np.linalg.cond(np.stack(raw_accepted))) if raw_accepted else 0.0
    return GridClosureReport(
        target_dim=target, dims=tuple(dims), saturated=saturated,
        stalled=stalled, depth_reached=depth, condition=cond, grid=grid)
