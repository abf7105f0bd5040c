"""Sampling verifiers for the quotient-operator concavity inequalities.

For k = n-1 and k = n-2 the quadratic form of the second-derivative
tensor dominates a gradient-square correction:

    -sum_{i,j} F^{ii,jj} xi_i xi_j - F^{11} xi_1^2 / lam_1
        >= -(2/F) (sum_i F^{ii} xi_i)^2 + factor * F^{11} xi_1^2 / lam_1

with factor = 1 for k = n-1 and factor = 1/(2(n-1)) for k = n-2.  The
verifiers evaluate both sides through the general tensor formulas and
report the gap (left minus right), which must be nonnegative up to
rounding.  Closed-form rewritings of the gap (which make nonnegativity
manifest) are provided separately as independent cross-checks and are
never used inside the verifier path.

Sampling uses the counter-based Philox generator with a recorded 64-bit
seed, so any negative-gap witness is replayable bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConditioningError, DomainError, UnsupportedRegimeError
from .operator import QuotientOperator
from .symfun import (
    EigenTuple,
    deleted_minors,
    deleted_minors_batch,
    elementary,
    elementary_all_batch,
    pair_minor_batch,
)

__all__ = [
    "GapReport",
    "gap_nm1",
    "gap_nm2",
    "gap_nm1_direct",
    "gap_nm2_direct",
    "gap_batch",
    "verify_gap",
    "sample_tuples",
    "sample_sphere",
    "fd_hessian_oracle",
    "fd_hessian_oracle_batch",
    "induction_c0",
    "induction_c0_sup",
    "induction_sweep",
]

LOG10_RANGE = (-3.0, 3.0)


@dataclass(frozen=True)
class GapReport:
    """Outcome of an inequality verification batch.

    ``min_gap`` is the smallest gap over the batch and ``gap`` the same
    quantity recomputed through the scalar path at the witness (the two
    agree up to rounding, which is itself a cross-check).  ``eta`` holds
    the rescaled witness direction xi_i / lam_i^2 and ``i_term`` the
    envelope quantity entering the k = n-2 proof route; both are
    diagnostics only.
    """

    gap: float
    witness_lam: np.ndarray
    witness_xi: np.ndarray
    samples: int
    min_gap: float
    scale: float
    tol: float
    violations: int
    seed: int | None = None
    eta: np.ndarray | None = None
    i_term: float | None = None

    @property
    def passed(self) -> bool:
        return self.violations == 0


# ---------------------------------------------------------------------------
# scalar gaps through the tensor route
# ---------------------------------------------------------------------------

def _gap_scalar(op: QuotientOperator, lam: EigenTuple, xi: np.ndarray, factor: float) -> float:
    lamv = lam.values
    f = op.value(lam)
    grad = op.grad_diag(lam)
    tensor = op.hess_entries(lam)
    top = grad[0] * xi[0] ** 2 / lamv[0]
    lhs = -tensor.quadratic_form(xi) - top
    rhs = -(2.0 / f) * float(grad @ xi) ** 2 + factor * top
    return lhs - rhs


def gap_nm1(lam, xi) -> float:
    """Concavity gap for k = n-1 (n >= 2); nonnegative up to rounding.

    ``xi[0]`` pairs with the largest eigenvalue; eigenvalues are sorted
    descending at construction, so pass ``xi`` in that order.
    """
    et = lam if isinstance(lam, EigenTuple) else EigenTuple(lam)
    et.require_positive()
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (et.n,):
        raise DomainError(f"xi must have shape ({et.n},)")
    op = QuotientOperator(et.n, et.n - 1)
    return _gap_scalar(op, et, xi, 1.0)


def gap_nm2(lam, xi) -> float:
    """Concavity gap for k = n-2 (n >= 3); nonnegative up to rounding."""
    et = lam if isinstance(lam, EigenTuple) else EigenTuple(lam)
    if et.n < 3:
        raise UnsupportedRegimeError("k = n-2 needs n >= 3")
    et.require_positive()
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (et.n,):
        raise DomainError(f"xi must have shape ({et.n},)")
    op = QuotientOperator(et.n, et.n - 2)
    return _gap_scalar(op, et, xi, 1.0 / (2.0 * (et.n - 1)))


# ---------------------------------------------------------------------------
# closed-form rewritings (independent cross-checks)
# ---------------------------------------------------------------------------

def gap_nm1_direct(lam, xi) -> float:
    """k = n-1 gap in its manifestly nonnegative form 2 sum_{i>=2} F^{ii} xi_i^2 / lam_i."""
    et = lam if isinstance(lam, EigenTuple) else EigenTuple(lam)
    et.require_positive()
    xi = np.asarray(xi, dtype=float)
    grad = QuotientOperator(et.n, et.n - 1).grad_diag(et)
    return float(2.0 * np.sum(grad[1:] * xi[1:] ** 2 / et.values[1:]))


def eta_of(lam, xi) -> np.ndarray:
    """Rescaled direction eta_i = xi_i / lam_i^2."""
    et = lam if isinstance(lam, EigenTuple) else EigenTuple(lam)
    return np.asarray(xi, dtype=float) / et.values**2


def i_term_of(lam, xi) -> float:
    """Envelope quantity of the k = n-2 route.

    I = sum_{i != j} eta_i eta_j
        + lam_1 (sum_{k != 1} 1/lam_k) eta_1^2
        + sum_{i != 1} 2 lam_i (sum_{k != i} 1/lam_k) eta_i^2

    and the tensor identity  lhs = -(2/F)(sum F^{ii} xi_i)^2 + F^2 I
    holds exactly; tests verify it.
    """
    et = lam if isinstance(lam, EigenTuple) else EigenTuple(lam)
    et.require_positive()
    lamv = et.values
    eta = eta_of(et, xi)
    inv_sums = np.sum(1.0 / lamv) - 1.0 / lamv
    cross = float(np.sum(eta) ** 2 - np.sum(eta**2))
    val = cross + lamv[0] * inv_sums[0] * eta[0] ** 2
    val += float(np.sum(2.0 * lamv[1:] * inv_sums[1:] * eta[1:] ** 2))
    return val


def gap_nm2_direct(lam, xi) -> float:
    """k = n-2 gap via the envelope identity F^2 I - F^{11} xi_1^2 / (2(n-1) lam_1)."""
    et = lam if isinstance(lam, EigenTuple) else EigenTuple(lam)
    et.require_positive()
    op = QuotientOperator(et.n, et.n - 2)
    f = op.value(et)
    grad = op.grad_diag(et)
    xi = np.asarray(xi, dtype=float)
    top = grad[0] * xi[0] ** 2 / et.values[0]
    return f**2 * i_term_of(et, xi) - top / (2.0 * (et.n - 1))


# ---------------------------------------------------------------------------
# batched tensor route
# ---------------------------------------------------------------------------

def _tensor_diag_block_batch(k: int, L: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-row (diag_block, grad, f) for sorted positive rows L of shape (B, n)."""
    B, n = L.shape
    e = elementary_all_batch(L)
    sk = e[:, k]
    sn = e[:, n]
    f = sn / sk
    sk_p = deleted_minors_batch(L, k - 1)
    skk_p = deleted_minors_batch(L, k)
    grad = f[:, None] * skk_p / (L * sk[:, None])

    sn_p = sn[:, None] / L
    sn_pr = sn[:, None, None] / (L[:, :, None] * L[:, None, :])
    sk_pr = pair_minor_batch(L, k - 2)
    sk2 = sk**2
    diag = (
        sn_pr / sk[:, None, None]
        - sn_p[:, :, None] * sk_p[:, None, :] / sk2[:, None, None]
        - sn_p[:, None, :] * sk_p[:, :, None] / sk2[:, None, None]
        - sn[:, None, None] * sk_pr / sk2[:, None, None]
        + 2.0 * sn[:, None, None] * sk_p[:, :, None] * sk_p[:, None, :] / (sk2 * sk)[:, None, None]
    )
    ii = np.arange(n)
    diag[:, ii, ii] = -2.0 * grad * sk_p / sk[:, None]
    return diag, grad, f


def gap_batch(k_offset: int, L: np.ndarray, Xi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gaps and scales for a batch; ``k_offset`` is 1 (k=n-1) or 2 (k=n-2).

    Rows of L must be sorted descending and strictly positive; rows of
    Xi pair index-wise with the sorted eigenvalues.  Returns
    (gap, scale) with scale = |lhs| + |rhs| + 1.
    """
    L = np.asarray(L, dtype=float)
    Xi = np.asarray(Xi, dtype=float)
    B, n = L.shape
    if k_offset not in (1, 2):
        raise UnsupportedRegimeError("k_offset must be 1 (k=n-1) or 2 (k=n-2)")
    if k_offset == 2 and n < 3:
        raise UnsupportedRegimeError("k = n-2 needs n >= 3")
    k = n - k_offset
    factor = 1.0 if k_offset == 1 else 1.0 / (2.0 * (n - 1))
    diag, grad, f = _tensor_diag_block_batch(k, L)
    quad = np.einsum("bij,bi,bj->b", diag, Xi, Xi)
    top = grad[:, 0] * Xi[:, 0] ** 2 / L[:, 0]
    lhs = -quad - top
    rhs = -(2.0 / f) * np.einsum("bi,bi->b", grad, Xi) ** 2 + factor * top
    return lhs - rhs, np.abs(lhs) + np.abs(rhs) + 1.0


def sample_tuples(n: int, samples: int, seed: int, log10_range=LOG10_RANGE) -> np.ndarray:
    """Sorted-descending positive tuples, entries log-uniform in the range."""
    rng = np.random.Generator(np.random.Philox(seed))
    lo, hi = log10_range
    L = 10.0 ** rng.uniform(lo, hi, size=(samples, n))
    return np.sort(L, axis=1)[:, ::-1]


def sample_sphere(n: int, samples: int, seed: int) -> np.ndarray:
    """Directions uniform on the unit sphere (the gap is quadratic in xi)."""
    rng = np.random.Generator(np.random.Philox(seed))
    X = rng.standard_normal(size=(samples, n))
    return X / np.linalg.norm(X, axis=1, keepdims=True)


def verify_gap(
    n: int,
    k: int,
    samples: int,
    seed: int,
    tol: float = 1e-9,
    chunk: int = 20000,
) -> GapReport:
    """Batch-verify the concavity gap for (n, k) with k in {n-1, n-2}.

    The directions are drawn from seed+1 so eigenvalues and directions
    come from independent streams; both streams are recorded through
    the single report seed.
    """
    if k not in (n - 1, n - 2):
        raise UnsupportedRegimeError(f"k={k} not in {{n-1, n-2}} for n={n}")
    k_offset = n - k
    L = sample_tuples(n, samples, seed)
    Xi = sample_sphere(n, samples, seed + 1)
    min_gap = np.inf
    witness = (L[0], Xi[0])
    wit_scale = 1.0
    violations = 0
    for s in range(0, samples, chunk):
        gs, scales = gap_batch(k_offset, L[s : s + chunk], Xi[s : s + chunk])
        violations += int(np.count_nonzero(gs < -tol * scales))
        j = int(np.argmin(gs))
        if gs[j] < min_gap:
            min_gap = float(gs[j])
            witness = (L[s + j].copy(), Xi[s + j].copy())
            wit_scale = float(scales[j])
    wl, wx = witness
    et = EigenTuple(wl)
    scalar_gap = gap_nm1(et, wx) if k_offset == 1 else gap_nm2(et, wx)
    return GapReport(
        gap=scalar_gap,
        witness_lam=wl,
        witness_xi=wx,
        samples=samples,
        min_gap=min_gap,
        scale=wit_scale,
        tol=tol,
        violations=violations,
        seed=seed,
        eta=eta_of(et, wx),
        i_term=i_term_of(et, wx) if k_offset == 2 else None,
    )


# ---------------------------------------------------------------------------
# finite-difference oracle for the second-derivative tensor
# ---------------------------------------------------------------------------

_D1_OFFSETS = np.array([-2.0, -1.0, 1.0, 2.0])
_D1_WEIGHTS = np.array([1.0, -8.0, 8.0, -1.0]) / 12.0
_D2_OFFSETS = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
_D2_WEIGHTS = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0


def fd_hessian_oracle(op: QuotientOperator, lam, rel_step: float = 1e-4) -> np.ndarray:
    """Fourth-order central-difference estimate of the F^{pp,rr} block.

    Steps are per-axis, h_p = rel_step * lam_p, so the stencil stays
    well conditioned across wide spectra.  Used only as an independent
    cross-check of the analytic tensor.
    """
    et = lam if isinstance(lam, EigenTuple) else EigenTuple(lam)
    et.require_positive()
    return fd_hessian_oracle_batch(op, et.values[None, :], rel_step)[0]


def fd_hessian_oracle_batch(op: QuotientOperator, L: np.ndarray, rel_step: float = 1e-4) -> np.ndarray:
    """Vectorized oracle over rows of L; returns (B, n, n) diag-block estimates."""
    L = np.asarray(L, dtype=float)
    B, n = L.shape
    if n != op.n:
        raise DomainError(f"expected {op.n} eigenvalues per row, got {n}")
    if rel_step >= 0.25:
        raise DomainError("rel_step too large: stencil would leave the positive cone")
    if rel_step < 1e3 * np.finfo(float).eps:
        raise ConditioningError("rel_step underflows double-precision spacing")
    H = rel_step * L
    out = np.empty((B, n, n))
    for p in range(n):
        vals = np.zeros(B)
        for o, w in zip(_D2_OFFSETS, _D2_WEIGHTS):
            Lp = L.copy()
            Lp[:, p] += o * H[:, p]
            vals += w * op.value_batch(Lp)
        out[:, p, p] = vals / H[:, p] ** 2
        for r in range(p + 1, n):
            vals = np.zeros(B)
            for oa, wp in zip(_D1_OFFSETS, _D1_WEIGHTS):
                for ob, wr in zip(_D1_OFFSETS, _D1_WEIGHTS):
                    Lp = L.copy()
                    Lp[:, p] += oa * H[:, p]
                    Lp[:, r] += ob * H[:, r]
                    vals += wp * wr * op.value_batch(Lp)
            out[:, p, r] = vals / (H[:, p] * H[:, r])
            out[:, r, p] = out[:, p, r]
    return out


# ---------------------------------------------------------------------------
# induction constant for the gradient/Newton-tensor bound
# ---------------------------------------------------------------------------

def induction_c0(op: QuotientOperator, lam, b_grad, l: int, eps: float, f_range=None) -> float:
    """Smallest C0 with  sum_i |b_i sigma_l^{ii}|
        <= C0 * eps * sum_i H^{ii} b_i^2 + (C0/eps) * sigma_k
    for this particular input, i.e. the ratio of the two sides at C0 = 1.

    ``sigma_l^{ii}`` is the derivative of sigma_l with respect to the
    i-th diagonal entry, sigma_{l-1}(lam|i).  Inputs whose operator
    value falls outside ``f_range`` are rejected, not clamped.
    """
    if op.k not in (op.n - 1, op.n - 2):
        raise UnsupportedRegimeError("induction bound needs k in {n-1, n-2}")
    if not 1 <= l <= op.k:
        raise DomainError(f"l={l} out of range [1, {op.k}]")
    if eps <= 0:
        raise DomainError("eps must be positive")
    et = lam if isinstance(lam, EigenTuple) else EigenTuple(lam)
    et.require_positive()
    if f_range is not None:
        f = op.value(et)
        if not f_range[0] <= f <= f_range[1]:
            raise DomainError(f"operator value {f} outside pinned range {f_range}")
    b = np.asarray(b_grad, dtype=float)
    a = deleted_minors(et.values, l - 1)
    h = op.h_diag(et)
    num = float(np.sum(np.abs(b * a)))
    den = eps * float(np.sum(h * b**2)) + elementary(et.values, op.k) / eps
    return num / den


def induction_c0_sup(op: QuotientOperator, lam, l: int) -> float:
    """Exact supremum of ``induction_c0`` over all gradients b (and eps).

    Optimizing the ratio over the scale of b removes eps and leaves
    sqrt(sum_i sigma_l^{ii}^2 / H^{ii}) / (2 sqrt(sigma_k)), the closed
    form used as the deterministic sweep statistic.
    """
    if not 1 <= l <= op.k:
        raise DomainError(f"l={l} out of range [1, {op.k}]")
    et = lam if isinstance(lam, EigenTuple) else EigenTuple(lam)
    et.require_positive()
    a = deleted_minors(et.values, l - 1)
    h = op.h_diag(et)
    sk = elementary(et.values, op.k)
    return float(np.sqrt(np.sum(a**2 / h)) / (2.0 * np.sqrt(sk)))


def induction_sweep(
    op: QuotientOperator,
    l: int,
    f_target: float,
    lam1_values,
    samples: int = 2000,
    seed: int = 0,
) -> np.ndarray:
    """Sweep lam_1 at pinned operator value; columns
    (lam1, tail, c0_sampled_max, c0_closed_form).

    Each lam_1 is completed to (lam_1, t, ..., t) hitting ``f_target``.
    The sampled statistic optimizes the gradient scale analytically per
    direction (the ratio at the optimal scale is A / (2 sqrt(sigma_k Q))
    with A = sum_i a_i |u_i| and Q = sum_i H^{ii} u_i^2, independent of
    eps) and draws directions both uniformly on the sphere and jittered
    around the analytic maximizer u_i ~ a_i / H^{ii}; every sampled
    direction is a valid lower bound of the supremum, so the max tracks
    the closed form from below.  The closed form is the exact supremum
    over all gradients.
    """
    rng = np.random.Generator(np.random.Philox(seed))
    rows = []
    for lam1 in lam1_values:
        t = op.complete_tail(float(lam1), f_target)
        lamv = np.full(op.n, t)
        lamv[0] = lam1
        et = EigenTuple(lamv)
        a = deleted_minors(et.values, l - 1)
        h = op.h_diag(et)
        sk = elementary(et.values, op.k)
        half = samples // 2
        U = rng.standard_normal(size=(half, op.n))
        opt = a / h
        J = opt[None, :] * np.exp(0.5 * rng.standard_normal(size=(samples - half, op.n)))
        U = np.vstack([U / np.linalg.norm(U, axis=1, keepdims=True),
                       J / np.linalg.norm(J, axis=1, keepdims=True)])
        A = np.abs(U) @ a
        Q = U**2 @ h
        c0s = float(np.max(A / (2.0 * np.sqrt(sk * Q))))
        rows.append([lam1, t, c0s, induction_c0_sup(op, et, l)])
    return np.array(rows)
