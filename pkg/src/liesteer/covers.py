"""Subalgebra covers: so(3)-patterned triples inside bigger algebras.

The constructive route to ensemble results on SO(n) and on other compact
semisimple groups runs through covering the algebra by three-element
subalgebras that bracket exactly like so(3).  This module builds the
standard covers of so(n) from index triangles, normalizes and certifies
arbitrary triples, and manufactures spin triples from sl(2) root data.

A triple (X1, X2, X3) is "cyclic" when [X1,X2] = X3, [X2,X3] = X1 and
[X3,X1] = X2 hold to tolerance.  For standard so(n) elements with indices
a < b < c the ordering (O[a,b], O[b,c], O[a,c]) is cyclic with all plus
signs; general triples get a certificate recording the permutation and
sign flips that make them cyclic.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import algebra
from .errors import CoverIncompleteError, RootDataError

SPIN_TOL = 1e-10


@dataclass(frozen=True)
class TripleCheck:
    """Residuals of the three cyclic bracket relations."""

    ok: bool
    residuals: tuple
    violations: tuple

    @property
    def max_residual(self) -> float:
        return max(self.residuals)


def spin_triple_check(b1, b2, b3, tol: float = SPIN_TOL) -> TripleCheck:
    """Verify [b1,b2]=b3, [b2,b3]=b1, [b3,b1]=b2 to within tol.

    Residuals are sup-norm deviations; any residual above tol lands in
    `violations` with the offending relation spelled out.
    """
    mats = [np.asarray(algebra._as_matrix(b)) for b in (b1, b2, b3)]
    names = ("[X1,X2]=X3", "[X2,X3]=X1", "[X3,X1]=X2")
    pairs = ((0, 1, 2), (1, 2, 0), (2, 0, 1))
    residuals = []
    violations = []
    for (i, j, k), name in zip(pairs, names):
        r = float(np.abs(algebra.bracket(mats[i], mats[j]) - mats[k]).max())
        residuals.append(r)
        if r > tol:
            violations.append(f"{name} fails with residual {r:.3e}")
    return TripleCheck(ok=not violations, residuals=tuple(residuals),
                       violations=tuple(violations))


@dataclass(frozen=True)
class TripleCertificate:
    """How to rearrange a stored triple into cyclic form.

    Applying `signs[t] * triple[order[t]]` for t = 0,1,2 yields a triple
    passing spin_triple_check with max residual `residual`.
    """

    order: tuple
    signs: tuple
    residual: float


def normalize_triple(mats, tol: float = SPIN_TOL):
    """Search sign flips and permutations making a triple cyclic.

    Returns:
        (certificate, cyclic_matrices) on success.

    Raises:
        ValueError: no arrangement passes; the message carries the best
            arrangement's violated relations.
    """
    mats = [np.asarray(algebra._as_matrix(m)) for m in mats]
    if len(mats) != 3:
        raise ValueError(f"a triple needs exactly 3 elements, got {len(mats)}")
    best = None
    for order in itertools.permutations(range(3)):
        for signs in itertools.product((1, -1), repeat=3):
            cand = [signs[t] * mats[order[t]] for t in range(3)]
            chk = spin_triple_check(*cand, tol=tol)
            if chk.ok:
                cert = TripleCertificate(order=order, signs=signs,
                                         residual=chk.max_residual)
                return cert, cand
            if best is None or chk.max_residual < best[0].max_residual:
                best = (chk, order, signs)
    chk, order, signs = best
    raise ValueError(
        f"no sign/permutation arrangement of the triple is cyclic "
        f"(best attempt order={order} signs={signs}): {'; '.join(chk.violations)}")


@dataclass(frozen=True)
class Cover:
    """A family of cyclic triples drawn from a basis.

    Attributes:
        basis: the ambient basis elements the indices refer to.
        triples: tuples of 3 indices into `basis`, each listed in an order
            that is already cyclic together with its certificate signs.
        certificates: one TripleCertificate per triple (for triples built
            by this module the certificate is the identity arrangement).
    """

    basis: tuple
    triples: tuple
    certificates: tuple

    def triple_labels(self, t: int) -> tuple:
        return tuple(self.basis[i].label for i in self.triples[t])

    def triple_sets(self) -> list:
        return [frozenset(tr) for tr in self.triples]


def _triangle_indices(n: int, a: int, b: int, c: int, index_of: dict) -> tuple:
    # cyclic order for a < b < c: (O[a,b], O[b,c], O[a,c])
    return (index_of[(a, b)], index_of[(b, c)], index_of[(a, c)])


def cover_so_n(n: int, mode: str = "minimal") -> Cover:
    """Cover so(n) by index-triangle triples.

    full mode lists, for every pair (i, j), all n-2 triangles through that
    pair (pair-major order, so each distinct triangle shows up three
    times).  minimal mode emits a deterministic spanning subfamily: the n
    cyclic windows {i, i+1, i+2} around the index circle, deduplicated and
    sorted, plus, for any index pair the windows miss (first missed at
    n = 6), the triangle completing that pair with the smallest third
    index.  At n = 4 the windows are exactly the four triangles on four
    indices.

    Raises:
        ValueError: n < 3 (so(2) contains no such triple).
    """
    if n < 3:
        raise ValueError(f"so({n}) admits no three-dimensional simple cover; need n >= 3")
    if mode not in ("minimal", "full"):
        raise ValueError(f"mode must be 'minimal' or 'full', got {mode!r}")
    basis = algebra.standard_basis("so", n)
    index_of = {b.indices: i for i, b in enumerate(basis)}

    triangles = []
    if mode == "full":
        for i in range(1, n + 1):
            for j in range(i + 1, n + 1):
                for k in range(1, n + 1):
                    if k in (i, j):
                        continue
                    a, b, c = sorted((i, j, k))
                    triangles.append((a, b, c))
    else:
        seen = set()
        for i in range(n):
            window = tuple(sorted({(i + d) % n + 1 for d in range(3)}))
            if window not in seen:
                seen.add(window)
                triangles.append(window)
        covered = {p for tri in triangles for p in itertools.combinations(tri, 2)}
        for i in range(1, n + 1):
            for j in range(i + 1, n + 1):
                if (i, j) in covered:
                    continue
                k = min(m for m in range(1, n + 1) if m not in (i, j))
                tri = tuple(sorted((i, j, k)))
                if tri not in seen:
                    seen.add(tri)
                    triangles.append(tri)
                covered.update(itertools.combinations(tri, 2))
        triangles.sort()

    triples = tuple(_triangle_indices(n, *tri, index_of) for tri in triangles)
    certs = tuple(
        TripleCertificate(order=(0, 1, 2), signs=(1, 1, 1), residual=0.0)
        for _ in triples)
    return Cover(basis=tuple(basis), triples=triples, certificates=certs)


def cover_from_triples(basis, index_triples, tol: float = SPIN_TOL) -> Cover:
    """Certify a user-supplied family of triples and check it spans.

    Each triple is normalized (signs and ordering searched) before the
    spin check; a triple with no cyclic arrangement raises ValueError
    naming it.  The union of all triples must span the space spanned by
    `basis`.

    Raises:
        CoverIncompleteError: names the first basis direction outside the
            span of the union.
    """
    basis = list(basis)
    mats = [algebra._as_matrix(b) for b in basis]
    triples = []
    certs = []
    for t, tri in enumerate(index_triples):
        tri = tuple(int(i) for i in tri)
        if len(tri) != 3 or len(set(tri)) != 3:
            raise ValueError(f"triple #{t + 1} must hold 3 distinct indices, got {tri}")
        for i in tri:
            if not (0 <= i < len(basis)):
                raise ValueError(f"triple #{t + 1} index {i} out of range")
        try:
            cert, _ = normalize_triple([mats[i] for i in tri], tol=tol)
        except ValueError as exc:
            labels = tuple(algebra._label_of(basis[i], i) for i in tri)
            raise ValueError(f"triple #{t + 1} {labels} is not so(3)-patterned: {exc}") from exc
        triples.append(tuple(tri[cert.order[t2]] for t2 in range(3)))
        # after reordering the stored triple is cyclic under the certificate signs
        certs.append(TripleCertificate(order=(0, 1, 2), signs=cert.signs,
                                       residual=cert.residual))

    used = sorted({i for tri in triples for i in tri})
    ortho = None
    if used:
        flat = np.stack([_flatten(mats[i]) for i in used])
        u, s, _ = np.linalg.svd(flat.T, full_matrices=False)
        rank = int(np.sum(s > 1e-9 * max(1.0, s[0])))
        ortho = u[:, :rank]
    for i, m in enumerate(mats):
        if i in used:
            continue
        # a basis direction no triple touches can still be spanned only if
        # it is linearly dependent on the used ones; check by projection
        v = _flatten(m)
        resid = np.linalg.norm(v - ortho @ (ortho.T @ v)) if ortho is not None \
            else np.linalg.norm(v)
        if resid > 1e-9 * max(1.0, np.linalg.norm(v)):
            label = algebra._label_of(basis[i], i)
            raise CoverIncompleteError(
                f"cover misses direction {label}: union of triples does not span it")
    return Cover(basis=tuple(basis), triples=tuple(triples), certificates=tuple(certs))


def _flatten(m: np.ndarray) -> np.ndarray:
    if np.iscomplexobj(m):
        return np.concatenate([m.real.ravel(), m.imag.ravel()])
    return np.asarray(m, dtype=float).ravel()


# ---------------------------------------------------------------------
# Root data
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class RootDatum:
    """One sl(2) triple presented by its coroot and raising element.

    The lowering element is derived as y = -conj(x) (entrywise complex
    conjugate).  Validity means, to within `tol` in sup norm:

        [h, x] = 2x        [h, y] = -2y        [x, y] = h

    The caller supplies h already normalized for the first relation; no
    normalization is attempted here.
    """

    h: np.ndarray = field(repr=False)
    x: np.ndarray = field(repr=False)

    def __post_init__(self):
        h = np.asarray(self.h, dtype=complex)
        x = np.asarray(self.x, dtype=complex)
        if h.shape != x.shape or h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise RootDataError(
                f"h and x must be square matrices of equal size, got {h.shape} and {x.shape}")
        h.setflags(write=False)
        x.setflags(write=False)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "x", x)

    @property
    def y(self) -> np.ndarray:
        return -np.conj(self.x)

    def validate(self, tol: float = SPIN_TOL) -> None:
        h, x, y = self.h, self.x, self.y
        checks = (
            ("[h, x] = 2x", algebra.bracket(h, x) - 2.0 * x),
            ("[h, y] = -2y", algebra.bracket(h, y) + 2.0 * y),
            ("[x, y] = h", algebra.bracket(x, y) - h),
        )
        for name, resid in checks:
            r = float(np.abs(resid).max())
            if r > tol:
                raise RootDataError(
                    f"root datum violates {name}: residual {r:.3e} > {tol:.1e}")


def su2_triple_from_root(datum: RootDatum, tol: float = SPIN_TOL) -> tuple:
    """Spin triple of the compact form attached to one root.

    Maps (h, x, y) to

        B1 = i h / 2,   B2 = i (x + y) / 2,   B3 = (y - x) / 2,

    which is cyclic whenever the datum satisfies the sl(2) relations;
    the spin check is run as a posteriori confirmation.

    Raises:
        RootDataError: the datum fails its bracket relations, or the
            derived triple unexpectedly fails the spin check.
    """
    datum.validate(tol=tol)
    h, x, y = datum.h, datum.x, datum.y
    b1 = 0.5j * h
    b2 = 0.5j * (x + y)
    b3 = 0.5 * (y - x)
    chk = spin_triple_check(b1, b2, b3, tol=max(tol, SPIN_TOL))
    if not chk.ok:
        raise RootDataError(
            f"derived spin triple fails cyclic relations: {'; '.join(chk.violations)}")
    return b1, b2, b3
