"""Lie algebra rank condition and controllability verdicts.

Classical controllability of a right-invariant bilinear system on a compact
connected matrix group reduces to one linear-algebra question: does the Lie
algebra generated by the control directions fill the whole algebra?  This
module computes that closure, applies the group-specific decision rules
(including the sphere-transitivity and translation-reachability conditions
for rigid motions), and layers the ensemble-level obstructions on top:
an abelian so(2) factor and, more generally, a nontrivial center both kill
approximate ensemble controllability no matter how the parameter enters.

For systems whose generators are standard basis elements scaled by
parameter monomials the module also produces certificates: for every
algebra direction the closure reaches, the first parameter monomial that
reaches it under breadth-first bracketing with the generators.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import algebra
from .errors import SpecError

CLOSURE_TOL = 1e-9

GROUPS = ("SO", "SE", "SU2")


# ---------------------------------------------------------------------
# System descriptions
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class ParamRange:
    """Closed positive interval with a sample count for grid work."""

    lo: float
    hi: float
    samples: int = 1

    def __post_init__(self):
        if not (0.0 < self.lo <= self.hi):
            raise SpecError(
                f"parameter range must satisfy 0 < lo <= hi, got [{self.lo}, {self.hi}]")
        if self.samples < 1:
            raise SpecError(f"samples must be >= 1, got {self.samples}")

    def grid(self) -> np.ndarray:
        if self.samples == 1:
            return np.array([0.5 * (self.lo + self.hi)])
        return np.linspace(self.lo, self.hi, self.samples)


@dataclass(frozen=True)
class Generator:
    """One control channel: a basis direction scaled by a parameter weight.

    weight is either a parameter label (str) or a positive constant.
    """

    element: algebra.BasisElement
    weight: object = 1.0

    def __post_init__(self):
        if isinstance(self.weight, str):
            return
        w = float(self.weight)
        if w <= 0:
            raise SpecError(f"constant generator weight must be positive, got {w}")


@dataclass(frozen=True)
class SystemSpec:
    """A broadcast bilinear system on SO(n), SE(n) or SU(2).

    Attributes:
        group: "SO", "SE" or "SU2".
        n: size parameter (2 for SU2).
        generators: rotational / spin control channels.
        translations: 1-based translation channel indices (SE only).
        parameters: label -> ParamRange for every label any generator uses.
    """

    group: str
    n: int
    generators: tuple
    translations: tuple = ()
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.group not in GROUPS:
            raise SpecError(f"group must be one of {GROUPS}, got {self.group!r}")
        if self.group == "SU2" and self.n != 2:
            raise SpecError(f"SU2 systems have n = 2, got n = {self.n}")
        if self.group != "SE" and self.translations:
            raise SpecError("translation channels only make sense for SE systems")
        if not self.generators and not self.translations:
            raise SpecError("system has no control channels at all")
        object.__setattr__(self, "generators", tuple(self.generators))
        object.__setattr__(self, "translations", tuple(self.translations))
        for k in self.translations:
            if not (1 <= k <= self.n):
                raise SpecError(f"translation channel {k} out of range 1..{self.n}")
        for g in self.generators:
            if isinstance(g.weight, str) and g.weight not in self.parameters:
                raise SpecError(
                    f"generator uses undeclared parameter label {g.weight!r}")
        for label, rng in self.parameters.items():
            if not isinstance(rng, ParamRange):
                raise SpecError(f"parameter {label!r} is not a ParamRange")

    @property
    def family(self) -> str:
        return {"SO": "so", "SE": "se", "SU2": "su2"}[self.group]

    def ambient_basis(self) -> list:
        return algebra.standard_basis(self.family, self.n)

    def ambient_dim(self) -> int:
        if self.group == "SO":
            return self.n * (self.n - 1) // 2
        if self.group == "SE":
            return self.n * (self.n - 1) // 2 + self.n
        return 3

    def labels(self) -> list:
        return sorted(self.parameters)

    def grid(self) -> np.ndarray:
        """Cartesian product grid over all parameter labels, shape (P, d)."""
        labels = self.labels()
        if not labels:
            return np.zeros((1, 0))
        axes = [self.parameters[l].grid() for l in labels]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def channel_matrices(self) -> list:
        """All control directions as matrices: generators then translations."""
        mats = [g.element.matrix for g in self.generators]
        basis = self.ambient_basis()
        by_label = {b.label: b.matrix for b in basis}
        for k in self.translations:
            mats.append(by_label[f"T[{k}]"])
        return mats


def translation_elements(spec: SystemSpec) -> list:
    basis = spec.ambient_basis()
    by_label = {b.label: b for b in basis}
    return [by_label[f"T[{k}]"] for k in spec.translations]


# ---------------------------------------------------------------------
# Lie closure
# ---------------------------------------------------------------------

def _flatten(m: np.ndarray) -> np.ndarray:
    if np.iscomplexobj(m):
        return np.concatenate([m.real.ravel(), m.imag.ravel()])
    return np.array(m, dtype=float).ravel()


@dataclass(frozen=True)
class ClosureResult:
    """Orthonormalized Lie closure of a generator set.

    basis holds matrices orthonormal in the flattened Frobenius sense;
    rounds[k] is the cumulative dimension after bracket round k (rounds[0]
    is the span of the generators themselves).
    """

    dim: int
    basis: tuple
    rounds: tuple


def lie_closure(mats, tol: float = CLOSURE_TOL) -> ClosureResult:
    """Smallest Lie algebra containing the given matrices.

    Runs modified Gram-Schmidt over flattened matrices, then repeatedly
    brackets every current basis element with the generators and with each
    other, absorbing any direction whose residual against the current span
    exceeds tol (relative to the candidate's norm).  Terminates when a full
    round adds nothing.

    Returns:
        ClosureResult with the orthonormal basis and per-round dimensions.
    """
    mats = [np.asarray(m) for m in mats]
    if not mats:
        return ClosureResult(dim=0, basis=(), rounds=(0,))
    shape = mats[0].shape

    basis_mats: list = []
    basis_flat: list = []

    def absorb(m) -> bool:
        v = _flatten(m)
        nrm = np.linalg.norm(v)
        if nrm <= tol:
            return False
        for u in basis_flat:
            v = v - (u @ v) * u
        resid = np.linalg.norm(v)
        if resid <= tol * max(1.0, nrm):
            return False
        # re-orthogonalize once; plain MGS drifts when additions pile up
        for u in basis_flat:
            v = v - (u @ v) * u
        v /= np.linalg.norm(v)
        basis_flat.append(v)
        if np.iscomplexobj(mats[0]):
            half = shape[0] * shape[1]
            mm = (v[:half] + 1j * v[half:]).reshape(shape)
        else:
            mm = v.reshape(shape)
        basis_mats.append(mm)
        return True

    for m in mats:
        absorb(m)
    rounds = [len(basis_mats)]

    while True:
        frozen = list(basis_mats)
        added = 0
        for b in frozen:
            for g in mats:
                if absorb(algebra.bracket(b, g)):
                    added += 1
        for i, a in enumerate(frozen):
            for b in frozen[i + 1:]:
                if absorb(algebra.bracket(a, b)):
                    added += 1
        rounds.append(len(basis_mats))
        if added == 0:
            break

    return ClosureResult(dim=len(basis_mats), basis=tuple(basis_mats),
                         rounds=tuple(rounds))


def center_of_closure(mats, tol: float = CLOSURE_TOL) -> list:
    """Basis of the center of Lie({mats}).

    Solves [z, b] = 0 for all closure basis elements b by a single SVD of
    the stacked adjoint action, threshold tol on singular values relative
    to the largest.
    """
    clo = lie_closure(mats, tol=tol)
    if clo.dim == 0:
        return []
    blocks = []
    for b in clo.basis:
        rows = np.stack([_flatten(algebra.bracket(z, b)) for z in clo.basis])
        blocks.append(rows)
    # row i of m is the concatenated action ad_{basis[i]} on every basis element;
    # center coefficient vectors c satisfy c @ m = 0
    m = np.concatenate(blocks, axis=1)
    u, s, _ = np.linalg.svd(m, full_matrices=True)
    rank = int(np.sum(s > tol * max(1.0, s[0] if s.size else 0.0)))
    if rank >= clo.dim:
        return []
    out = []
    for c in u[:, rank:].T:
        out.append(sum(ci * bi for ci, bi in zip(c, clo.basis)))
    return out


# ---------------------------------------------------------------------
# Verdicts
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class ControllabilityReport:
    """Outcome of a classical or ensemble controllability check."""

    kind: str
    controllable: bool
    closure_dim: int
    ambient_dim: int
    obstructions: tuple = ()
    details: dict = field(default_factory=dict)


_SPHERE_SAMPLE_EXTRA = "ones"


def _sphere_samples(n: int) -> list:
    pts = [np.eye(n)[:, k] for k in range(n)]
    pts.append(np.ones(n) / np.sqrt(n))
    return pts


def _rotation_closure(spec: SystemSpec) -> ClosureResult:
    """Closure of the rotational generator directions, in so(n) coordinates."""
    if spec.group == "SE":
        mats = [g.element.matrix[:spec.n, :spec.n] for g in spec.generators]
    else:
        mats = [g.element.matrix for g in spec.generators]
    return lie_closure(mats)


def check_classical(spec: SystemSpec) -> ControllabilityReport:
    """Classical (single-system) controllability via the rank condition.

    SO(n) / SU(2): controllable iff the closure of the generators is the
    whole algebra.  SE(n): controllable iff at least one translation
    channel exists, the rotational closure acts transitively on the unit
    sphere (tangent rank n-1 at the sampled directions), and the smallest
    rotational-closure-invariant subspace containing the translation
    directions is all of R^n.
    """
    obstructions = []
    details: dict = {}

    if spec.group in ("SO", "SU2"):
        clo = lie_closure([g.element.matrix for g in spec.generators])
        ambient = spec.ambient_dim()
        ok = clo.dim == ambient
        if not ok:
            obstructions.append("rank-deficit")
        details["rounds"] = clo.rounds
        return ControllabilityReport(
            kind="classical", controllable=ok, closure_dim=clo.dim,
            ambient_dim=ambient, obstructions=tuple(obstructions),
            details=details)

    # SE(n)
    n = spec.n
    rot = _rotation_closure(spec)
    details["rotation_closure_dim"] = rot.dim
    ambient = spec.ambient_dim()

    if not spec.translations:
        obstructions.append("no-translation-channel")

    sphere_ok = True
    ranks = []
    for x in _sphere_samples(n):
        if rot.dim == 0:
            ranks.append(0)
            sphere_ok = False
            continue
        tangents = np.stack([b @ x for b in rot.basis])
        r = int(np.linalg.matrix_rank(tangents, tol=1e-9))
        ranks.append(r)
        if r < n - 1:
            sphere_ok = False
    details["sphere_tangent_ranks"] = tuple(ranks)
    if not sphere_ok:
        obstructions.append("sphere-intransitive")

    reach_dim = 0
    if spec.translations:
        w = np.stack([np.eye(n)[:, k - 1] for k in spec.translations], axis=1)
        while True:
            cols = [w]
            for b in rot.basis:
                cols.append(b @ w)
            stacked = np.concatenate(cols, axis=1)
            u, s, _ = np.linalg.svd(stacked, full_matrices=False)
            r = int(np.sum(s > 1e-9 * max(1.0, s[0])))
            new_w = u[:, :r]
            if r == w.shape[1]:
                w = new_w
                break
            w = new_w
        reach_dim = w.shape[1]
        if reach_dim < n:
            obstructions.append("translation-reach-deficit")
    details["translation_reach_dim"] = reach_dim

    closure_dim = rot.dim + reach_dim
    ok = not obstructions
    return ControllabilityReport(
        kind="classical", controllable=ok, closure_dim=closure_dim,
        ambient_dim=ambient, obstructions=tuple(obstructions), details=details)


def check_ensemble(spec: SystemSpec) -> ControllabilityReport:
    """Approximate ensemble controllability over the spec's parameter box.

    Starts from the classical verdict and applies the obstructions that are
    specific to parameter-dependent families: a (rotational) so(2) factor
    is abelian, so brackets generate no new parameter dependence and a
    continuum of phases cannot be matched; more generally any nontrivial
    center of the closure is flowed through identically for every parameter
    value, which contradicts approximating parameter-dependent targets.
    """
    base = check_classical(spec)
    obstructions = list(base.obstructions)
    details = dict(base.details)

    rotational_is_so2 = (spec.group in ("SO", "SE")) and spec.n == 2

    if rotational_is_so2:
        if "so2-nilpotent" not in obstructions:
            obstructions.append("so2-nilpotent")
    else:
        if spec.group == "SE":
            mats = spec.channel_matrices()
        else:
            mats = [g.element.matrix for g in spec.generators]
        center = center_of_closure(mats)
        details["center_dim"] = len(center)
        if center:
            obstructions.append("nontrivial-center")

    ok = base.controllable and not any(
        o in ("so2-nilpotent", "nontrivial-center") for o in obstructions)
    return ControllabilityReport(
        kind="ensemble", controllable=ok, closure_dim=base.closure_dim,
        ambient_dim=base.ambient_dim, obstructions=tuple(obstructions),
        details=details)


# ---------------------------------------------------------------------
# Monomial certificates
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class Certificate:
    """First parameter monomial reaching one algebra direction.

    exponents maps parameter label -> power; sign is the coefficient sign
    of the bracket word relative to the ambient basis element; word is the
    bracket word spelled with generator labels, for reports.
    """

    element: str
    sign: int
    exponents: tuple
    word: str
    depth: int

    def monomial(self) -> str:
        if not self.exponents:
            return "1"
        return "*".join(
            l if e == 1 else f"{l}^{e}" for l, e in self.exponents)


def monomial_certificates(spec: SystemSpec, max_depth: int = 32) -> dict:
    """Breadth-first monomial certificates for every reachable direction.

    Requires every generator to be a standard-basis direction (the SpecFile
    formats guarantee this), so each bracket with a generator lands on
    plus/minus a single basis element and monomials simply multiply.

    Returns:
        dict label -> Certificate, insertion-ordered by discovery.
    """
    basis = spec.ambient_basis()
    table = algebra.structure_table(basis)
    index_of = {b.label: i for i, b in enumerate(basis)}

    def exp_of(weight) -> tuple:
        if isinstance(weight, str):
            return ((weight, 1),)
        return ()

    def merge(e1: tuple, e2: tuple) -> tuple:
        d = dict(e1)
        for l, e in e2:
            d[l] = d.get(l, 0) + e
        return tuple(sorted(d.items()))

    seeds = []
    for g in spec.generators:
        seeds.append((index_of[g.element.label], 1, exp_of(g.weight), g.element.label))
    for k in spec.translations:
        seeds.append((index_of[f"T[{k}]"], 1, (), f"T[{k}]"))

    found: dict = {}
    queue: list = []
    for idx, sign, exps, word in seeds:
        label = basis[idx].label
        if label not in found:
            cert = Certificate(element=label, sign=sign, exponents=exps,
                               word=word, depth=0)
            found[label] = cert
            queue.append((idx, sign, exps, word, 0))

    head = 0
    while head < len(queue):
        idx, sign, exps, word, depth = queue[head]
        head += 1
        if depth >= max_depth:
            continue
        for gi, (sidx, ssign, sexps, sword) in enumerate(seeds):
            entry = table[idx, sidx]
            if entry == 0:
                continue
            nidx = abs(entry) - 1
            nsign = sign * ssign * (1 if entry > 0 else -1)
            nlabel = basis[nidx].label
            if nlabel in found:
                continue
            nexps = merge(exps, sexps)
            nword = f"[{word}, {sword}]"
            cert = Certificate(element=nlabel, sign=nsign, exponents=nexps,
                               word=nword, depth=depth + 1)
            found[nlabel] = cert
            queue.append((nidx, nsign, nexps, nword, depth + 1))

    return found
