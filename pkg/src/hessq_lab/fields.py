"""Discrete calculus on gridded scalar fields.

Provides the pieces needed to evaluate the operator inequalities on
actual functions rather than single eigenvalue tuples: second-order
central-difference Hessians, a cyclic-rotation symmetric eigensolver
with multiplicity bookkeeping, the largest-eigenvalue log field
b = ln lambda_1, a gap estimator for the differential inequality
sum_i F^{ii} b_ii >= c sum_i F^{ii} b_i^2 - C, the row divergence of
Newton tensors sigma_k^{ij}(D^2 u), and a discrete shifted Legendre
transform with its gradient-map diagnostics.

Grids are vertex-centered boxes: ``values[i1, ..., in]`` samples the
point lo + idx * h.  Operations state how many interior cells their
stencils consume.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConditioningError,
    DomainError,
    EmptyDomainError,
    StencilError,
)
from .operator import QuotientOperator
from .symfun import EigenTuple, elementary_all_batch

__all__ = [
    "ScalarField",
    "SpectralPoint",
    "JacobiGapReport",
    "DivergenceReport",
    "LegendreReport",
    "fd_hessian",
    "eigen_sym",
    "b_field",
    "jacobi_gap",
    "jacobi_c_estimate",
    "jacobi_source_sup",
    "newton_tensor",
    "newton_divergence",
    "legendre_field",
]


# ---------------------------------------------------------------------------
# gridded fields
# ---------------------------------------------------------------------------

@dataclass
class ScalarField:
    """A function sampled on a uniform vertex grid over a box."""

    lo: np.ndarray
    hi: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=float)
        self.hi = np.asarray(self.hi, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        n = self.values.ndim
        if self.lo.shape != (n,) or self.hi.shape != (n,):
            raise DomainError("box bounds must match the grid dimension")
        if any(s < 2 for s in self.values.shape):
            raise DomainError("need at least 2 samples per axis")
        if np.any(self.hi <= self.lo):
            raise DomainError("box must have positive extent")

    @property
    def n(self) -> int:
        return self.values.ndim

    @property
    def shape(self) -> tuple:
        return self.values.shape

    @property
    def h(self) -> np.ndarray:
        """Grid spacing per axis."""
        return (self.hi - self.lo) / (np.array(self.shape) - 1)

    def point(self, idx) -> np.ndarray:
        """Coordinates of the grid node ``idx``."""
        return self.lo + np.asarray(idx, dtype=float) * self.h

    def axis_coords(self, a: int) -> np.ndarray:
        return self.lo[a] + self.h[a] * np.arange(self.shape[a])

    @classmethod
    def from_function(cls, fn, lo, hi, shape) -> "ScalarField":
        """Sample ``fn`` (vectorized over a trailing coordinate axis)."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        shape = tuple(int(s) for s in shape)
        axes = [np.linspace(lo[a], hi[a], shape[a]) for a in range(len(shape))]
        grids = np.meshgrid(*axes, indexing="ij")
        pts = np.stack(grids, axis=-1)
        return cls(lo=lo, hi=hi, values=np.asarray(fn(pts), dtype=float))

    # -- flat text import/export (layout documented in the cli module) -----

    def to_file(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(f"{self.n}\n")
            for a in range(self.n):
                fh.write(f"{self.lo[a]:.17g} {self.hi[a]:.17g} {self.shape[a]}\n")
            flat = self.values.ravel()
            fh.write(f"{flat.size}\n")
            for v in flat:
                fh.write(f"{v:.17g}\n")

    @classmethod
    def from_file(cls, path) -> "ScalarField":
        with open(path) as fh:
            n = int(fh.readline())
            lo = np.empty(n)
            hi = np.empty(n)
            shape = []
            for a in range(n):
                parts = fh.readline().split()
                lo[a], hi[a] = float(parts[0]), float(parts[1])
                shape.append(int(parts[2]))
            count = int(fh.readline())
            vals = np.fromstring(fh.read(), sep="\n")
        if vals.size != count or count != int(np.prod(shape)):
            raise DomainError("field file value count does not match header")
        return cls(lo=lo, hi=hi, values=vals.reshape(shape))

    def interior_slices(self, margin: int) -> tuple:
        if any(s <= 2 * margin for s in self.shape):
            raise StencilError(f"grid too small for margin {margin}")
        return tuple(slice(margin, s - margin) for s in self.shape)


# ---------------------------------------------------------------------------
# finite-difference Hessians
# ---------------------------------------------------------------------------

def fd_hessian(fld: ScalarField, idx) -> np.ndarray:
    """Second-order central-difference Hessian at an interior node.

    Consumes one cell in every direction (the mixed stencil uses the
    four diagonal neighbours); exactly symmetric by construction and
    exact on quadratics.
    """
    idx = tuple(int(i) for i in idx)
    shp = fld.shape
    if any(not 1 <= idx[a] <= shp[a] - 2 for a in range(fld.n)):
        raise StencilError(f"index {idx} too close to the boundary")
    return _hessian_stack(fld)[
        tuple(i - 1 for i in idx)
    ]


def _shift(vals: np.ndarray, a: int, o: int, margin: int) -> np.ndarray:
    """Interior view shifted by ``o`` cells along axis ``a``."""
    sl = [slice(margin, s - margin) for s in vals.shape]
    sl[a] = slice(margin + o, vals.shape[a] - margin + o or None)
    return vals[tuple(sl)]


def _hessian_stack(fld: ScalarField, margin: int = 1) -> np.ndarray:
    """Hessians at every interior node; shape (*inner, n, n)."""
    v = fld.values
    n = fld.n
    h = fld.h
    inner = tuple(s - 2 * margin for s in v.shape)
    H = np.empty(inner + (n, n))
    c = _shift(v, 0, 0, margin)
    for a in range(n):
        H[..., a, a] = (_shift(v, a, 1, margin) - 2.0 * c + _shift(v, a, -1, margin)) / h[a] ** 2
    for a in range(n):
        for b in range(a + 1, n):
            pp = _shift(_shift_raw(v, a, 1), b, 1, margin)
            pm = _shift(_shift_raw(v, a, 1), b, -1, margin)
            mp = _shift(_shift_raw(v, a, -1), b, 1, margin)
            mm = _shift(_shift_raw(v, a, -1), b, -1, margin)
            H[..., a, b] = H[..., b, a] = (pp - pm - mp + mm) / (4.0 * h[a] * h[b])
    return H


def _shift_raw(vals: np.ndarray, a: int, o: int) -> np.ndarray:
    """Whole-array roll-free shift; pairs with a later interior crop."""
    return np.roll(vals, -o, axis=a)


def _gradient_stack(vals: np.ndarray, h: np.ndarray, margin: int = 1) -> np.ndarray:
    """Central-difference gradients at interior nodes; (*inner, n)."""
    n = vals.ndim
    inner = tuple(s - 2 * margin for s in vals.shape)
    G = np.empty(inner + (n,))
    for a in range(n):
        G[..., a] = (_shift(vals, a, 1, margin) - _shift(vals, a, -1, margin)) / (2.0 * h[a])
    return G


# ---------------------------------------------------------------------------
# small symmetric eigensolver (cyclic rotations)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectralPoint:
    """Eigen-decomposition of a small symmetric matrix.

    ``eigenvalues`` are sorted descending with matching ``frame``
    columns; ``multiplicity_groups`` partitions indices into clusters
    of eigenvalues closer than the grouping tolerance.
    """

    eigenvalues: EigenTuple
    frame: np.ndarray
    multiplicity_groups: list

    @property
    def lambda1_multiplicity(self) -> int:
        return len(self.multiplicity_groups[0])


def default_mult_tol(lam1: float) -> float:
    """Grouping tolerance 1e-6 * (1 + |lambda_1|)."""
    return 1e-6 * (1.0 + abs(lam1))


def eigen_sym(M, mult_tol: float | None = None) -> SpectralPoint:
    """Diagonalize a symmetric matrix by cyclic plane rotations.

    Sweeps annihilate off-diagonal mass down to 1e-12 * ||M||_F; the
    returned frame is orthonormal to 1e-10 and reconstructs M to
    1e-10 * ||M||.  Raises DomainError on non-symmetric input.
    """
    A = np.asarray(M, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DomainError("expected a square matrix")
    n = A.shape[0]
    norm = np.linalg.norm(A)
    if np.linalg.norm(A - A.T) > 1e-12 * max(norm, 1e-300):
        raise DomainError("matrix is not symmetric within tolerance")
    A = 0.5 * (A + A.T)
    V = np.eye(n)
    if norm == 0.0:
        lam = np.zeros(n)
    else:
        for _ in range(60):
            off = np.sqrt(np.sum(A**2) - np.sum(np.diag(A) ** 2))
            if off <= 1e-12 * norm:
                break
            for p in range(n - 1):
                for q in range(p + 1, n):
                    apq = A[p, q]
                    if abs(apq) <= 1e-16 * norm:
                        continue
                    tau = (A[q, q] - A[p, p]) / (2.0 * apq)
                    t = np.sign(tau) / (abs(tau) + np.sqrt(1.0 + tau * tau)) if tau != 0 else 1.0
                    c = 1.0 / np.sqrt(1.0 + t * t)
                    s = t * c
                    rp, rq = A[p, :].copy(), A[q, :].copy()
                    A[p, :] = c * rp - s * rq
                    A[q, :] = s * rp + c * rq
                    cp, cq = A[:, p].copy(), A[:, q].copy()
                    A[:, p] = c * cp - s * cq
                    A[:, q] = s * cp + c * cq
                    vp, vq = V[:, p].copy(), V[:, q].copy()
                    V[:, p] = c * vp - s * vq
                    V[:, q] = s * vp + c * vq
        else:
            raise ConditioningError("rotation sweeps failed to converge")
        lam = np.diag(A).copy()
    order = np.argsort(lam)[::-1]
    lam = lam[order]
    V = V[:, order]
    Mv = 0.5 * (np.asarray(M, dtype=float) + np.asarray(M, dtype=float).T)
    if np.linalg.norm(V.T @ V - np.eye(n)) > 1e-10:
        raise ConditioningError("frame lost orthonormality")
    if np.linalg.norm(V @ np.diag(lam) @ V.T - Mv) > 1e-10 * max(norm, 1.0):
        raise ConditioningError("reconstruction error above tolerance")
    tol = default_mult_tol(lam[0]) if mult_tol is None else mult_tol
    groups = []
    start = 0
    for i in range(1, n + 1):
        if i == n or lam[i - 1] - lam[i] > tol:
            groups.append(list(range(start, i)))
            start = i
    return SpectralPoint(eigenvalues=EigenTuple(lam), frame=V, multiplicity_groups=groups)


# ---------------------------------------------------------------------------
# b = ln(lambda_1) field and the differential-inequality gap
# ---------------------------------------------------------------------------

@dataclass
class BField:
    """ln(largest Hessian eigenvalue) on the one-cell-shrunk grid.

    ``mult_mask`` marks points where lambda_1 has multiplicity > 1 per
    the grouping tolerance (the inequality is only classical at simple
    lambda_1); ``nonconvex_mask`` marks points failing lambda_n >= 0
    within tolerance.  Flagged points are excluded from gap statistics,
    never extrapolated.
    """

    b: ScalarField
    mult_mask: np.ndarray
    nonconvex_mask: np.ndarray
    lam: np.ndarray          # (*inner, n) sorted descending
    frames: np.ndarray       # (*inner, n, n)


def b_field(fld: ScalarField, mult_tol: float | None = None, conv_tol: float = 1e-10) -> BField:
    """Pointwise b = ln lambda_1(D^2 u) at interior nodes (margin 1)."""
    H = _hessian_stack(fld)
    inner = H.shape[:-2]
    n = fld.n
    lam = np.empty(inner + (n,))
    frames = np.empty(inner + (n, n))
    mult = np.zeros(inner, dtype=bool)
    nonconv = np.zeros(inner, dtype=bool)
    for idx in itertools.product(*map(range, inner)):
        sp = eigen_sym(H[idx], mult_tol=mult_tol)
        lam[idx] = sp.eigenvalues.values
        frames[idx] = sp.frame
        mult[idx] = sp.lambda1_multiplicity > 1
        lam1 = sp.eigenvalues[0]
        nonconv[idx] = sp.eigenvalues[-1] < -conv_tol * (1.0 + abs(lam1))
    if np.any(lam[..., 0] <= 0):
        raise DomainError("largest eigenvalue must be positive to take its log")
    b = ScalarField(
        lo=fld.lo + fld.h, hi=fld.hi - fld.h, values=np.log(lam[..., 0])
    )
    return BField(b=b, mult_mask=mult, nonconvex_mask=nonconv, lam=lam, frames=frames)


@dataclass(frozen=True)
class JacobiGapReport:
    """Minimum of  sum_i F^{ii} b_ii - c sum_i F^{ii} b_i^2 + C  over
    admitted points, evaluated in the Hessian eigenframe per point."""

    min_gap: float
    witness_index: tuple
    witness_point: np.ndarray
    admitted: int
    flagged_multiplicity: int
    flagged_nonconvex: int
    c: float
    C: float

    @property
    def passed(self) -> bool:
        return self.min_gap >= -1e-9 * (1.0 + abs(self.C))


def _jacobi_pointwise(fld: ScalarField, op: QuotientOperator, mult_tol):
    """Shared assembly: per admitted inner-2 point, (F, b_i, b_ii, lam)."""
    if fld.n != op.n:
        raise DomainError("field dimension must match the operator")
    bf = b_field(fld, mult_tol=mult_tol)
    bv = bf.b.values
    h = fld.h
    grad_b = _gradient_stack(bv, h)           # margin 1 into the b-grid
    hess_b = _hessian_stack(bf.b)
    inner2 = grad_b.shape[:-1]
    flags = bf.mult_mask | bf.nonconvex_mask
    out = []
    for idx in itertools.product(*map(range, inner2)):
        bidx = tuple(i + 1 for i in idx)      # same node in the b-grid
        if flags[bidx]:
            continue
        lam = bf.lam[bidx]
        if lam[-1] <= 0:
            continue
        Q = bf.frames[bidx]
        F = op.grad_diag(EigenTuple(lam))
        bg = Q.T @ grad_b[idx]
        bh = Q.T @ hess_b[idx] @ Q
        out.append((idx, F, bg, np.diag(bh), lam))
    n_mult = int(np.count_nonzero(bf.mult_mask))
    n_nonconv = int(np.count_nonzero(bf.nonconvex_mask))
    if not out:
        raise EmptyDomainError("no admitted points after flag filtering")
    return out, n_mult, n_nonconv


def jacobi_gap(
    fld: ScalarField,
    op: QuotientOperator,
    c: float,
    C: float,
    mult_tol: float | None = None,
) -> JacobiGapReport:
    """Verify the differential inequality on a field at given (c, C).

    Admits only interior points (margin 2) that are unflagged; b and
    its derivatives come from central differences of the b field, then
    rotate into the local eigenframe.
    """
    pts, n_mult, n_nonconv = _jacobi_pointwise(fld, op, mult_tol)
    best = None
    for idx, F, bg, bhd, _lam in pts:
        gap = float(F @ bhd - c * F @ bg**2 + C)
        if best is None or gap < best[0]:
            best = (gap, idx)
    gap, idx = best
    point = fld.point(tuple(i + 2 for i in idx))
    return JacobiGapReport(
        min_gap=gap,
        witness_index=idx,
        witness_point=point,
        admitted=len(pts),
        flagged_multiplicity=n_mult,
        flagged_nonconvex=n_nonconv,
        c=c,
        C=C,
    )


def jacobi_c_estimate(
    fld: ScalarField,
    op: QuotientOperator,
    C: float,
    mult_tol: float | None = None,
) -> tuple[float, JacobiGapReport]:
    """Largest c with a nonnegative minimum gap for the given C.

    c* = min over admitted points of
         (sum_i F^{ii} b_ii + C) / (sum_i F^{ii} b_i^2),
    restricted to points with a nonvanishing denominator.
    """
    pts, n_mult, n_nonconv = _jacobi_pointwise(fld, op, mult_tol)
    c_star = np.inf
    for _idx, F, bg, bhd, _lam in pts:
        den = float(F @ bg**2)
        if den <= 1e-300:
            continue
        c_star = min(c_star, (float(F @ bhd) + C) / den)
    if not np.isfinite(c_star):
        raise EmptyDomainError("no admitted point has a nonzero gradient term")
    return float(c_star), jacobi_gap(fld, op, float(c_star), C, mult_tol=mult_tol)


def jacobi_source_sup(fld: ScalarField, op: QuotientOperator, mult_tol: float | None = None) -> float:
    """Empirical sup of the data term 2 f_1^2 / (lambda_1 F) over admitted points.

    f is the operator value field and f_1 its derivative along the top
    eigendirection; this is the term a constant C must dominate for the
    differential inequality, so it is the natural empirical choice of C.
    """
    bf = b_field(fld, mult_tol=mult_tol)
    inner = bf.lam.shape[:-1]
    fvals = np.empty(inner)
    for idx in itertools.product(*map(range, inner)):
        lam = bf.lam[idx]
        if lam[-1] <= 0:
            fvals[idx] = np.nan
            continue
        fvals[idx] = op.value(EigenTuple(lam))
    grad_f = _gradient_stack(fvals, fld.h)
    flags = bf.mult_mask | bf.nonconvex_mask
    sup = 0.0
    inner2 = grad_f.shape[:-1]
    for idx in itertools.product(*map(range, inner2)):
        bidx = tuple(i + 1 for i in idx)
        if flags[bidx] or not np.all(np.isfinite(grad_f[idx])):
            continue
        lam = bf.lam[bidx]
        Q = bf.frames[bidx]
        f1 = float((Q.T @ grad_f[idx])[0])
        fval = fvals[bidx]
        sup = max(sup, 2.0 * f1**2 / (lam[0] * fval))
    return sup


# ---------------------------------------------------------------------------
# Newton tensors and their row divergence
# ---------------------------------------------------------------------------

def newton_tensor(M: np.ndarray, m: int) -> np.ndarray:
    """m-th Newton tensor stack T_m = sigma_m I - M T_{m-1}, T_0 = I.

    Accepts a single matrix or a stack (..., n, n); the (i, j) entry of
    T_{k-1} is the derivative of sigma_k with respect to the matrix
    entry (i, j).
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[-1]
    if not 0 <= m <= n - 1:
        raise DomainError(f"tensor order m={m} out of range [0, {n - 1}]")
    lam = np.linalg.eigvalsh(M)
    e = elementary_all_batch(lam.reshape(-1, n)).reshape(M.shape[:-2] + (n + 1,))
    eye = np.broadcast_to(np.eye(n), M.shape)
    T = np.array(np.broadcast_to(np.eye(n), M.shape))
    for j in range(1, m + 1):
        T = e[..., j, None, None] * eye - M @ T
    return T


@dataclass(frozen=True)
class DivergenceReport:
    """Row divergence of the Newton tensor field sigma_k^{ij}(D^2 u)."""

    residual: np.ndarray   # (*inner2, n)
    max_abs: float
    scale: float           # max |tensor entry| / min grid spacing
    k: int
    h: np.ndarray

    @property
    def relative(self) -> float:
        return self.max_abs / self.scale if self.scale > 0 else 0.0


def divergence_refinement_slope(fn, lo, hi, shapes, k: int, core_fraction: float = 0.5):
    """Order of the divergence residual under grid refinement.

    Samples ``fn`` at each grid size, measures the max residual over the
    fixed core sub-box (the central ``core_fraction`` of the box, so the
    statistic compares identical physical regions across levels), and
    returns (slope, [(h_min, max_residual)]).
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    mid = 0.5 * (lo + hi)
    half = 0.5 * core_fraction * (hi - lo)
    rows = []
    for shape in shapes:
        fld = ScalarField.from_function(fn, lo, hi, shape)
        rep = newton_divergence(fld, k)
        axes = [fld.axis_coords(a)[2:-2] for a in range(fld.n)]
        grids = np.meshgrid(*axes, indexing="ij")
        mask = np.ones(grids[0].shape, dtype=bool)
        for a, G in enumerate(grids):
            mask &= np.abs(G - mid[a]) <= half[a]
        rows.append((float(np.min(fld.h)), float(np.max(np.abs(rep.residual[mask])))))
    hs = np.log([r[0] for r in rows])
    vs = np.log([max(r[1], 1e-300) for r in rows])
    slope = float(np.polyfit(hs, vs, 1)[0])
    return slope, rows


def newton_divergence(fld: ScalarField, k: int) -> DivergenceReport:
    """Discrete residual of the divergence-free identity
    sum_j d_j sigma_k^{ij}(D^2 u) = 0.

    The tensor is evaluated from central-difference Hessians (margin 1);
    its rows are then differenced centrally (margin 2 total).  For
    k = 1 the tensor is the identity and the residual vanishes exactly;
    for analytic u whose tensor entries are not captured exactly by the
    stencils the residual decays at second order under refinement.
    """
    if not 1 <= k <= fld.n:
        raise DomainError(f"k={k} out of range [1, {fld.n}]")
    H = _hessian_stack(fld)
    T = newton_tensor(H, k - 1)
    h = fld.h
    n = fld.n
    inner2 = tuple(s - 2 for s in T.shape[:-2])
    res = np.zeros(inner2 + (n,))
    for j in range(n):
        Tj = T[..., :, j]
        res += (_shift(Tj, j, 1, 1) - _shift(Tj, j, -1, 1)) / (2.0 * h[j])
    scale = float(np.max(np.abs(T)) / np.min(h))
    return DivergenceReport(
        residual=res, max_abs=float(np.max(np.abs(res))), scale=scale, k=k, h=h
    )


# ---------------------------------------------------------------------------
# discrete shifted Legendre transform
# ---------------------------------------------------------------------------

def _conjugate_1d(x: np.ndarray, g: np.ndarray, y: np.ndarray) -> np.ndarray:
    """max_j (x_j * y - g_j) for ascending x and y, via the lower hull."""
    m = x.size
    hull = []
    for j in range(m):
        while len(hull) >= 2:
            j1, j2 = hull[-2], hull[-1]
            if (g[j2] - g[j1]) * (x[j] - x[j2]) >= (g[j] - g[j2]) * (x[j2] - x[j1]):
                hull.pop()
            else:
                break
        hull.append(j)
    hx = x[hull]
    hg = g[hull]
    slopes = np.diff(hg) / np.diff(hx)
    out = np.empty(y.size)
    i = 0
    for t, yv in enumerate(y):
        while i < slopes.size and slopes[i] <= yv:
            i += 1
        out[t] = hx[i] * yv - hg[i]
    return out


@dataclass(frozen=True)
class LegendreReport:
    """Gradient-map diagnostics of the shifted transform.

    ``matched_x``/``matched_y`` pair interior nodes with their image
    y(x) = Du(x) + K x; ``d2w`` holds the Hessian of the conjugate at
    each matched point, obtained by differencing the inverse map (the
    inverse of the forward-map Jacobian), which is exact on quadratics.
    """

    shift: float
    matched_x: np.ndarray   # (P, n)
    matched_y: np.ndarray   # (P, n)
    d2w: np.ndarray         # (P, n, n)

    def monotonicity_violations(self, pairs: int, seed: int) -> int:
        """Count sampled pairs with |y(x1)-y(x2)| < K |x1-x2|."""
        rng = np.random.Generator(np.random.Philox(seed))
        P = self.matched_x.shape[0]
        i = rng.integers(0, P, size=pairs)
        j = rng.integers(0, P, size=pairs)
        keep = i != j
        dx = np.linalg.norm(self.matched_x[i[keep]] - self.matched_x[j[keep]], axis=1)
        dy = np.linalg.norm(self.matched_y[i[keep]] - self.matched_y[j[keep]], axis=1)
        return int(np.count_nonzero(dy < self.shift * dx * (1.0 - 1e-12)))


def legendre_field(
    fld: ScalarField,
    K: float,
    dual_lo=None,
    dual_hi=None,
    dual_shape=None,
) -> tuple[ScalarField, LegendreReport]:
    """Discrete conjugate of u + K|x|^2/2 plus gradient-map diagnostics.

    The conjugate w(y) = max over grid x of (x . y - u(x) - K|x|^2/2)
    is computed by dimension-by-dimension lower-envelope transforms
    (exact for the sampled sup, O(N) per line).  The dual grid defaults
    to the bounding box of the mapped interior gradients with the same
    point counts as the primal grid.

    Requires K > 0 and a convex field (checked through the minimum
    Hessian eigenvalue at interior nodes).
    """
    if K <= 0:
        raise DomainError(f"shift K must be > 0, got {K}")
    H = _hessian_stack(fld)
    lam_min = np.linalg.eigvalsh(H)[..., 0]
    scale = 1.0 + float(np.max(np.abs(H)))
    if np.min(lam_min) < -1e-8 * scale:
        raise DomainError("field is not convex on its box")

    n = fld.n
    h = fld.h
    grad_u = _gradient_stack(fld.values, h)
    axes_inner = [fld.axis_coords(a)[1:-1] for a in range(n)]
    mesh = np.meshgrid(*axes_inner, indexing="ij")
    X = np.stack(mesh, axis=-1)
    Y = grad_u + K * X

    # matched interior points, margin 2, with map-Jacobian based D2w
    inner2 = tuple(s - 4 for s in fld.shape)
    if any(s < 1 for s in inner2):
        raise StencilError("grid too small for matched-point diagnostics")
    xs, ys, d2 = [], [], []
    for idx in itertools.product(*map(range, inner2)):
        c = tuple(i + 1 for i in idx)   # index into the margin-1 arrays
        J = np.empty((n, n))
        for a in range(n):
            up = list(c)
            dn = list(c)
            up[a] += 1
            dn[a] -= 1
            J[:, a] = (Y[tuple(up)] - Y[tuple(dn)]) / (2.0 * h[a])
        W = np.linalg.inv(J)
        xs.append(X[c])
        ys.append(Y[c])
        d2.append(0.5 * (W + W.T))
    report = LegendreReport(
        shift=float(K),
        matched_x=np.array(xs),
        matched_y=np.array(ys),
        d2w=np.array(d2),
    )

    # dual grid and the conjugate field
    if dual_lo is None or dual_hi is None:
        ymin = report.matched_y.min(axis=0)
        ymax = report.matched_y.max(axis=0)
        dual_lo = ymin if dual_lo is None else np.asarray(dual_lo, float)
        dual_hi = ymax if dual_hi is None else np.asarray(dual_hi, float)
    else:
        dual_lo = np.asarray(dual_lo, dtype=float)
        dual_hi = np.asarray(dual_hi, dtype=float)
    dual_shape = fld.shape if dual_shape is None else tuple(dual_shape)

    axes_x = [fld.axis_coords(a) for a in range(n)]
    mesh_full = np.meshgrid(*axes_x, indexing="ij")
    sq = sum(m**2 for m in mesh_full)
    g = fld.values + 0.5 * K * sq
    axes_y = [np.linspace(dual_lo[a], dual_hi[a], dual_shape[a]) for a in range(n)]

    cur = g
    for a in range(n):
        src = cur if a == 0 else -cur
        arr = np.moveaxis(src, a, 0)
        flat = arr.reshape(arr.shape[0], -1)
        out = np.empty((dual_shape[a], flat.shape[1]))
        for line in range(flat.shape[1]):
            out[:, line] = _conjugate_1d(axes_x[a], flat[:, line], axes_y[a])
        cur = np.moveaxis(out.reshape((dual_shape[a],) + arr.shape[1:]), 0, a)
    w = ScalarField(lo=dual_lo, hi=dual_hi, values=cur)
    return w, report
