"""Matrix Lie algebra and Lie group primitives.

This module owns the raw material everything else is built from: standard
bases for so(n), se(n) and the su(2) spin presentation, numerically exact
bracket and structure-table computation, the bi-invariant inner product,
matrix exponential / principal logarithm, and the geodesic and ensemble
distances used to score steering results.

Conventions
-----------
* so(n) basis elements are O[i,j] = E_ij - E_ji for 1 <= i < j <= n,
  ordered lexicographically by (i, j).  dim so(n) = n(n-1)/2.
* se(n) elements live in (n+1)x(n+1) homogeneous form.  Rotations R[i,j]
  embed O[i,j] in the upper-left block; translations T[k] put e_k in the
  last column.  Rotations come first in the basis, then translations.
* su(2) uses the spin triple S1, S2, S3 (i/2 times the Pauli matrices,
  with the sign pattern chosen so the table is cyclic: [S1,S2] = S3,
  [S2,S3] = S1, [S3,S1] = S2, exactly in floating point).
* The inner product is <A, B> = tr(A^T B)/2 on real algebras, which makes
  the so(n) basis orthonormal, and 2 Re tr(A^H B) on su(2), which makes
  the spin triple orthonormal.  Geodesic distance on the group is the
  norm of the principal log pulled back through this metric.

All matrices are float64 (complex128 for su(2)); no tolerance anywhere
is looser than 1e-8.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg

from .errors import CutLocusError, GridError, NonClosedBasisError

# Tolerance ladder: construction identities are exact to rounding,
# group membership allows a little drift under products, round trips
# through exp/log a little more.
TOL_CONSTRUCTION = 1e-12
TOL_GROUP = 1e-10
TOL_ROUNDTRIP = 1e-9

# Principal log refuses inputs whose rotation angle is within this margin
# of pi (eigenvalue -1): the log is not unique there and the nearby
# conditioning is unbounded.
CUT_LOCUS_MARGIN = 1e-8


# =====================================================================
# Basis elements
# =====================================================================

@dataclass(frozen=True)
class BasisElement:
    """One named generator direction of a matrix Lie algebra.

    Attributes:
        label: human-readable name, e.g. "O[1,2]", "R[1,3]", "T[2]", "S1".
        kind: "rotation", "translation" or "spin".
        indices: the defining index tuple, 1-based: (i, j) for rotations,
            (k,) for translations, (a,) for spin directions.
        matrix: the concrete matrix, never mutated.
    """

    label: str
    kind: str
    indices: tuple
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = self.matrix
        m.setflags(write=False)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def _so_matrix(n: int, i: int, j: int) -> np.ndarray:
    m = np.zeros((n, n))
    m[i - 1, j - 1] = 1.0
    m[j - 1, i - 1] = -1.0
    return m


@lru_cache(maxsize=None)
def _standard_basis_cached(group: str, n: int) -> tuple:
    if group == "so":
        if n < 2:
            raise ValueError(f"so(n) needs n >= 2, got n={n}")
        out = []
        for i in range(1, n + 1):
            for j in range(i + 1, n + 1):
                out.append(BasisElement(
                    label=f"O[{i},{j}]", kind="rotation", indices=(i, j),
                    matrix=_so_matrix(n, i, j)))
        return tuple(out)

    if group == "se":
        if n < 2:
            raise ValueError(f"se(n) needs n >= 2, got n={n}")
        out = []
        for i in range(1, n + 1):
            for j in range(i + 1, n + 1):
                m = np.zeros((n + 1, n + 1))
                m[:n, :n] = _so_matrix(n, i, j)
                out.append(BasisElement(
                    label=f"R[{i},{j}]", kind="rotation", indices=(i, j),
                    matrix=m))
        for k in range(1, n + 1):
            m = np.zeros((n + 1, n + 1))
            m[k - 1, n] = 1.0
            out.append(BasisElement(
                label=f"T[{k}]", kind="translation", indices=(k,), matrix=m))
        return tuple(out)

    if group == "su2":
        if n not in (0, 2):
            raise ValueError(f"su2 basis is fixed at n=2, got n={n}")
        # i/2 times the Pauli matrices with the sign pattern that makes
        # the bracket table cyclic with coefficient exactly +1.
        s1 = 0.5 * np.array([[0, 1j], [1j, 0]])
        s2 = 0.5 * np.array([[0, -1], [1, 0]], dtype=complex)
        s3 = 0.5 * np.array([[1j, 0], [0, -1j]])
        return tuple(
            BasisElement(label=f"S{a}", kind="spin", indices=(a,), matrix=m)
            for a, m in ((1, s1), (2, s2), (3, s3)))

    raise ValueError(f"unknown group family {group!r}; expected 'so', 'se' or 'su2'")


def standard_basis(group: str, n: int = 0) -> list:
    """Return the standard ordered basis of so(n), se(n) or su(2).

    Args:
        group: "so", "se" or "su2".
        n: matrix size parameter; ignored for "su2".

    Returns:
        List of BasisElement in the documented canonical order.
    """
    return list(_standard_basis_cached(group, n))


def _as_matrix(x) -> np.ndarray:
    return x.matrix if isinstance(x, BasisElement) else np.asarray(x)


# =====================================================================
# Bracket, inner product, structure table
# =====================================================================

def bracket(a, b) -> np.ndarray:
    """Matrix commutator [a, b] = ab - ba.

    Accepts BasisElement or plain ndarray on either side.
    """
    am, bm = _as_matrix(a), _as_matrix(b)
    return am @ bm - bm @ am


def inner_product(a, b) -> float:
    """Bi-invariant inner product.

    tr(a^T b)/2 for real matrices; 2 Re tr(a^H b) for complex ones.  Both
    scalings normalize the respective standard basis: so(n) elements and
    the su(2) spin triple all have norm 1.  (se(n) translations have norm
    1/sqrt(2) under the real formula; coordinates over se(n) therefore go
    through a Gram solve, not bare projections.)
    """
    am, bm = _as_matrix(a), _as_matrix(b)
    if np.iscomplexobj(am) or np.iscomplexobj(bm):
        return float(2.0 * np.real(np.trace(am.conj().T @ bm)))
    return float(np.trace(am.T @ bm) / 2.0)


def norm(a) -> float:
    """Metric norm sqrt(<a, a>)."""
    return float(np.sqrt(max(inner_product(a, a), 0.0)))


def gram_matrix(basis) -> np.ndarray:
    mats = [_as_matrix(b) for b in basis]
    g = np.empty((len(mats), len(mats)))
    for i, a in enumerate(mats):
        for j, b in enumerate(mats):
            g[i, j] = inner_product(a, b)
    return g


def coordinates(m, basis, tol: float = TOL_ROUNDTRIP) -> np.ndarray:
    """Coordinates of matrix m over the given basis.

    Solves the Gram system, so the basis need not be orthonormal (se(n)
    mixes norms).  Raises ValueError if m is not in the span to within tol.
    """
    mats = [_as_matrix(b) for b in basis]
    mm = _as_matrix(m)
    g = gram_matrix(basis)
    rhs = np.array([inner_product(b, mm) for b in mats])
    coords = np.linalg.solve(g, rhs)
    recon = from_coordinates(coords, basis)
    resid = np.abs(recon - mm).max()
    if resid > tol:
        raise ValueError(
            f"matrix is not in the span of the basis: residual {resid:.3e} > {tol:.1e}")
    return coords


def from_coordinates(coords, basis) -> np.ndarray:
    mats = np.stack([_as_matrix(b) for b in basis])
    return np.tensordot(np.asarray(coords), mats, axes=1)


def structure_table(basis, tol: float = TOL_CONSTRUCTION * 10) -> np.ndarray:
    """Integer bracket table of a closed basis with +-1 structure constants.

    Entry [a, b] is the signed 1-based index c such that
    [basis[a], basis[b]] = sign(c) * basis[|c|-1], or 0 when the bracket
    vanishes.  Raises NonClosedBasisError when some bracket is neither
    zero nor +-1 times a single basis element: that is the regime for
    structure_tensor, not for this table.
    """
    mats = [_as_matrix(b) for b in basis]
    dim = len(mats)
    table = np.zeros((dim, dim), dtype=int)
    norms = [norm(m) for m in mats]
    for a in range(dim):
        for b in range(a + 1, dim):
            br = bracket(mats[a], mats[b])
            mag = np.abs(br).max()
            if mag <= tol:
                continue
            hit = 0
            for c in range(dim):
                if np.abs(br - mats[c]).max() <= tol * max(1.0, norms[c]):
                    hit = c + 1
                    break
                if np.abs(br + mats[c]).max() <= tol * max(1.0, norms[c]):
                    hit = -(c + 1)
                    break
            if hit == 0:
                la, lb = _label_of(basis[a], a), _label_of(basis[b], b)
                raise NonClosedBasisError(
                    f"[{la}, {lb}] is not 0 or +-1 times a basis element; "
                    f"the basis is not closed with unit structure constants")
            table[a, b] = hit
            table[b, a] = -hit
    return table


def structure_tensor(basis) -> np.ndarray:
    """Dense structure constants c[a, b, k] with [B_a, B_b] = sum_k c[a,b,k] B_k.

    Works for any closed basis (coefficients need not be +-1); raises
    NonClosedBasisError if a bracket leaves the span.
    """
    mats = [_as_matrix(b) for b in basis]
    dim = len(mats)
    tensor = np.zeros((dim, dim, dim))
    for a in range(dim):
        for b in range(a + 1, dim):
            br = bracket(mats[a], mats[b])
            try:
                coords = coordinates(br, basis)
            except ValueError as exc:
                la, lb = _label_of(basis[a], a), _label_of(basis[b], b)
                raise NonClosedBasisError(
                    f"[{la}, {lb}] leaves the span of the basis: {exc}") from exc
            tensor[a, b] = coords
            tensor[b, a] = -coords
    return tensor


def _label_of(b, idx: int) -> str:
    return b.label if isinstance(b, BasisElement) else f"#{idx + 1}"


# =====================================================================
# exp / log and group membership
# =====================================================================

def expm(a) -> np.ndarray:
    """Matrix exponential (scaling-and-squaring via scipy)."""
    return scipy.linalg.expm(_as_matrix(a))


def logm(x, margin: float = CUT_LOCUS_MARGIN) -> np.ndarray:
    """Principal logarithm of a special orthogonal or special unitary matrix.

    Uses the complex Schur form (diagonal for these normal matrices), takes
    the principal branch of the eigenvalue logs, and projects the result
    back onto the algebra (skew / skew-Hermitian part).

    Raises:
        CutLocusError: some eigenvalue angle is within `margin` of pi, where
            the principal log stops being unique.
    """
    xm = _as_matrix(x)
    t, z = scipy.linalg.schur(xm.astype(complex), output="complex")
    ev = np.diag(t)
    ang = np.angle(ev)
    worst = np.abs(np.abs(ang) - np.pi).min()
    if worst < margin:
        raise CutLocusError(
            f"eigenvalue angle within {worst:.3e} of pi; principal log undefined "
            f"(margin {margin:.1e})")
    offdiag = np.abs(t - np.diag(ev)).max()
    if offdiag > TOL_GROUP * 100:
        raise ValueError(
            f"input is not normal enough to be a rotation/unitary matrix "
            f"(Schur off-diagonal {offdiag:.3e})")
    la = (z * (1j * ang)) @ z.conj().T
    if not np.iscomplexobj(xm):
        la = np.real(la)
        return 0.5 * (la - la.T)
    return 0.5 * (la - la.conj().T)


def check_special_orthogonal(x, tol: float = TOL_GROUP) -> None:
    """Raise ValueError unless x is in SO(n) to within tol."""
    xm = _as_matrix(x)
    n = xm.shape[0]
    defect = np.abs(xm.T @ xm - np.eye(n)).max()
    if defect > tol:
        raise ValueError(f"not orthogonal: ||X^T X - I|| = {defect:.3e} > {tol:.1e}")
    det = np.linalg.det(xm)
    if abs(det - 1.0) > tol * n:
        raise ValueError(f"not special: det = {det!r}")


def check_special_unitary(x, tol: float = TOL_GROUP) -> None:
    """Raise ValueError unless x is in SU(n) to within tol."""
    xm = _as_matrix(x)
    n = xm.shape[0]
    defect = np.abs(xm.conj().T @ xm - np.eye(n)).max()
    if defect > tol:
        raise ValueError(f"not unitary: ||X^H X - I|| = {defect:.3e} > {tol:.1e}")
    det = np.linalg.det(xm)
    if abs(det - 1.0) > tol * n:
        raise ValueError(f"det = {det!r}, not 1")


def check_rigid_motion(x, tol: float = TOL_GROUP) -> None:
    """Raise ValueError unless x is in SE(n) homogeneous form to within tol."""
    xm = _as_matrix(x)
    n = xm.shape[0] - 1
    bottom = np.abs(xm[n, :n]).max() if n else 0.0
    if bottom > tol or abs(xm[n, n] - 1.0) > tol:
        raise ValueError("last row is not (0, ..., 0, 1)")
    check_special_orthogonal(xm[:n, :n], tol=tol)


def rigid_parts(x) -> tuple:
    """Split an SE(n) homogeneous matrix into (rotation block, translation)."""
    xm = _as_matrix(x)
    n = xm.shape[0] - 1
    return xm[:n, :n].copy(), xm[:n, n].copy()


# =====================================================================
# Distances
# =====================================================================

def geodesic_distance(x, y) -> float:
    """Bi-invariant geodesic distance between two rotations or SU(2) elements.

    Equals the metric norm of logm(x^-1 y) inside the injectivity radius and
    extends continuously through the cut locus by reading the principal
    angles off the eigenvalue spectrum, so it never raises where the log
    would.  Formula: sqrt(sum angle_i^2 / 2) over all eigenvalue angles for
    real inputs, scaled by 2 on su(2) to match its metric normalization.
    """
    xm, ym = _as_matrix(x), _as_matrix(y)
    rel = xm.conj().T @ ym if np.iscomplexobj(xm) or np.iscomplexobj(ym) else xm.T @ ym
    ev = np.linalg.eigvals(rel.astype(complex))
    ang = np.angle(ev)
    ssq = float(np.sum(ang ** 2))
    if np.iscomplexobj(xm) or np.iscomplexobj(ym):
        return float(np.sqrt(2.0 * ssq))
    return float(np.sqrt(0.5 * ssq))


@dataclass(frozen=True)
class EnsembleState:
    """A group-valued function sampled on a finite parameter grid.

    Attributes:
        points: (P, d) array of parameter samples (d = number of labels).
        values: (P, n, n) stacked group elements, one per grid point.
    """

    points: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        vals = np.asarray(self.values)
        if pts.ndim != 2:
            raise GridError(f"points must be (P, d), got shape {pts.shape}")
        if vals.ndim != 3 or vals.shape[0] != pts.shape[0]:
            raise GridError(
                f"values must be (P, n, n) matching {pts.shape[0]} grid points, "
                f"got shape {vals.shape}")
        pts.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return self.points.shape[0]


def _same_grid(f: EnsembleState, g: EnsembleState) -> None:
    if f.points.shape != g.points.shape or not np.allclose(
            f.points, g.points, atol=0, rtol=0):
        raise GridError("ensemble states are sampled on different grids")


def ensemble_distance(f: EnsembleState, g: EnsembleState) -> float:
    """Sup over the grid of the pointwise geodesic distance."""
    _same_grid(f, g)
    return max(
        geodesic_distance(f.values[p], g.values[p]) for p in range(len(f)))


def ensemble_distance_table(f: EnsembleState, g: EnsembleState) -> np.ndarray:
    """Pointwise geodesic distances, one entry per grid point."""
    _same_grid(f, g)
    return np.array(
        [geodesic_distance(f.values[p], g.values[p]) for p in range(len(f))])
