"""The Hessian quotient operator F = sigma_n/sigma_k in its eigenframe.

Everything here is expressed through eigenvalues of the (diagonalized)
Hessian: the operator value, its first and second derivative tensors
with respect to matrix entries, the divergence-friendly rescaling
H^{ii} = sigma_k * F^{ii}, the pinch bounds on the small eigenvalues in
the k = n-1 and k = n-2 regimes, and the diagonal of the transformed
operator that appears after a shifted Legendre transform.

On the positive cone every formula below is assembled from
cancellation-free positive pieces:

    F^{pp}      = f * sigma_k(lam|p) / (lam_p * sigma_k)
    -F^{pq,qp}  = f * [(lam_p + lam_q) sigma_{k-1}(lam|pq)
                       + sigma_k(lam|pq)] / (lam_p lam_q sigma_k)

The second form is valid for every p != q including equal eigenvalues,
where the divided difference (F^{pp} - F^{qq})/(lam_q - lam_p) would be
0/0; the divided-difference relation is kept as a test property instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, InfeasibleError, UnsupportedRegimeError
from .symfun import EigenTuple, deleted_minors, elementary_all, pair_minor

__all__ = [
    "QuotientOperator",
    "SecondDerivativeTensor",
    "EigenBoundsReport",
    "EllipticitySweep",
    "spectral_constant",
]


def spectral_constant(n: int, k: int) -> float:
    """Dimensional constant C(n) used in the pinch bounds.

    Instantiated as binomial(n, k), justified by
    sigma_k <= binomial(n, k) * lam_1 ... lam_k on the ordered cone.
    Every report that relies on it echoes this choice.
    """
    return float(math.comb(n, k))


@dataclass(frozen=True)
class SecondDerivativeTensor:
    """Second derivatives of F with respect to matrix entries.

    ``diag_block[p, r]`` holds F^{pp,rr}; ``offdiag[p, q]`` holds
    F^{pq,qp} for p != q (zero on the diagonal).  On the positive cone
    the off-diagonal entries are strictly negative.
    """

    diag_block: np.ndarray
    offdiag: np.ndarray

    def quadratic_form(self, xi: np.ndarray) -> float:
        """sum_{p,r} F^{pp,rr} xi_p xi_r."""
        xi = np.asarray(xi, dtype=float)
        return float(xi @ self.diag_block @ xi)


@dataclass(frozen=True)
class EigenBoundsReport:
    """Outcome of the small-eigenvalue pinch check.

    ``slack`` entries are (bound - violating side) and must be >= 0 up
    to rounding when the operator equation holds.
    """

    n: int
    k: int
    f: float
    constant: float
    bounds: dict
    slack: np.ndarray
    constant_choice: str = "C(n) = binomial(n, k)"

    @property
    def passed(self) -> bool:
        scale = max(1.0, float(np.max(np.abs(list(self.bounds.values())))))
        return bool(np.all(self.slack >= -1e-12 * scale))


@dataclass(frozen=True)
class EllipticitySweep:
    """Table of transformed-operator diagonal ranges along a lam_1 sweep."""

    n: int
    k: int
    f_target: float
    shift: float
    rows: np.ndarray  # columns: lam1, tail, min_g, max_g, ratio
    columns: tuple = ("lam1", "tail", "min_g", "max_g", "ratio")

    def ratio_variation(self) -> float:
        """Relative spread of the max/min ratio across the sweep."""
        r = self.rows[:, 4]
        return float((r.max() - r.min()) / r.min())


@dataclass(frozen=True)
class QuotientOperator:
    """The pair (n, k) defining F = sigma_n / sigma_k, 1 <= k < n."""

    n: int
    k: int

    def __post_init__(self):
        if self.n < 2:
            raise DomainError(f"dimension n={self.n} must be >= 2")
        if not 1 <= self.k <= self.n - 1:
            raise DomainError(f"k={self.k} out of range [1, {self.n - 1}]")

    # -- helpers ---------------------------------------------------------

    def _coerce(self, lam) -> EigenTuple:
        et = lam if isinstance(lam, EigenTuple) else EigenTuple(lam)
        if et.n != self.n:
            raise DomainError(f"expected {self.n} eigenvalues, got {et.n}")
        et.require_positive()
        return et

    def _require_pinch_regime(self):
        if self.k not in (self.n - 1, self.n - 2):
            raise UnsupportedRegimeError(
                f"operation supports k in {{n-1, n-2}}, got (n, k) = ({self.n}, {self.k})"
            )

    # -- value and derivative tensors ------------------------------------

    def value(self, lam) -> float:
        """f = sigma_n(lam) / sigma_k(lam) on the positive cone."""
        et = self._coerce(lam)
        e = elementary_all(et.values)
        return float(e[self.n] / e[self.k])

    def value_batch(self, L: np.ndarray) -> np.ndarray:
        """Vectorized value over rows of a positive (B, n) array."""
        L = np.asarray(L, dtype=float)
        num = np.prod(L, axis=1)
        from .symfun import elementary_batch

        return num / elementary_batch(L, self.k)

    def grad_diag(self, lam) -> np.ndarray:
        """F^{pp} for p = 1..n; strictly positive on the positive cone."""
        et = self._coerce(lam)
        lamv = et.values
        e = elementary_all(lamv)
        f = e[self.n] / e[self.k]
        return f * deleted_minors(lamv, self.k) / (lamv * e[self.k])

    def hess_entries(self, lam) -> SecondDerivativeTensor:
        """All F^{pq,rs} cases that survive in the eigenframe.

        diag_block carries the p=q, r=s block (both p=r and p!=r);
        offdiag carries F^{pq,qp} for p != q; all other index patterns
        vanish identically.
        """
        et = self._coerce(lam)
        lamv = et.values
        n, k = self.n, self.k
        e = elementary_all(lamv)
        sk = e[k]
        sn = e[n]
        f = sn / sk
        sk_p = deleted_minors(lamv, k - 1)   # sigma_k^{pp}
        skk_p = deleted_minors(lamv, k)      # sigma_k(lam|p)
        sn_p = sn / lamv                     # sigma_n^{pp}
        grad = f * skk_p / (lamv * sk)

        diag = np.empty((n, n))
        off = np.zeros((n, n))
        for p in range(n):
            # p = q = r = s: reduces to -2 F^{pp} sigma_k^{pp} / sigma_k
            diag[p, p] = -2.0 * grad[p] * sk_p[p] / sk
            for r in range(p + 1, n):
                sk_pr = pair_minor(lamv, k - 2, p, r)  # sigma_k^{pp,rr}
                sn_pr = sn / (lamv[p] * lamv[r])       # sigma_n^{pp,rr}
                v = (
                    sn_pr / sk
                    - sn_p[p] * sk_p[r] / sk**2
                    - sn_p[r] * sk_p[p] / sk**2
                    - sn * sk_pr / sk**2
                    + 2.0 * sn * sk_p[p] * sk_p[r] / sk**3
                )
                diag[p, r] = v
                diag[r, p] = v
                # p = s, q = r: cancellation-free expansion of
                # f (sigma_k - lam_p lam_q sigma_k^{pp,qq}) / (lam_p lam_q sigma_k)
                core = (lamv[p] + lamv[r]) * pair_minor(lamv, k - 1, p, r) + pair_minor(
                    lamv, k, p, r
                )
                w = -f * core / (lamv[p] * lamv[r] * sk)
                off[p, r] = w
                off[r, p] = w
        return SecondDerivativeTensor(diag_block=diag, offdiag=off)

    def h_diag(self, lam) -> np.ndarray:
        """H^{ii} = f * sigma_k(lam|i) / lam_i  (equals sigma_k * F^{ii})."""
        et = self._coerce(lam)
        lamv = et.values
        e = elementary_all(lamv)
        f = e[self.n] / e[self.k]
        return f * deleted_minors(lamv, self.k) / lamv

    # -- pinch bounds ------------------------------------------------------

    def eigen_bounds_check(self, lam) -> EigenBoundsReport:
        """Check the small-eigenvalue pinch bounds for k = n-1 / n-2.

        k = n-1:  f <= lam_n <= C f
        k = n-2:  lam_n <= sqrt(C f)  and  lam_{n-1} >= sqrt(f / C)

        with C = binomial(n, k).  Returns the slack of each inequality.
        """
        self._require_pinch_regime()
        et = self._coerce(lam)
        f = self.value(et)
        C = spectral_constant(self.n, self.k)
        lam_n = et.values[-1]
        lam_nm1 = et.values[-2]
        if self.k == self.n - 1:
            bounds = {"lower": f, "lam_n": lam_n, "upper": C * f}
            slack = np.array([lam_n - f, C * f - lam_n])
        else:
            up = math.sqrt(C * f)
            lo = math.sqrt(f / C)
            bounds = {"lam_n": lam_n, "upper": up, "lam_nm1": lam_nm1, "lower": lo}
            slack = np.array([up - lam_n, lam_nm1 - lo])
        return EigenBoundsReport(
            n=self.n, k=self.k, f=f, constant=C, bounds=bounds, slack=slack
        )

    # -- shifted Legendre transform ---------------------------------------

    def legendre_diag(self, lam, K: float) -> np.ndarray:
        """Diagonal G^{ii} = F^{ii} (K + lam_i)^2 of the transformed operator.

        Computed in the closed form
        f * sigma_k(lam|i) / (lam_i sigma_k) * (K + lam_i)^2.
        """
        if K <= 0:
            raise DomainError(f"shift K must be > 0, got {K}")
        et = self._coerce(lam)
        lamv = et.values
        e = elementary_all(lamv)
        f = e[self.n] / e[self.k]
        return f * deleted_minors(lamv, self.k) / (lamv * e[self.k]) * (K + lamv) ** 2

    def complete_tail(self, lam1: float, f_target: float) -> float:
        """Solve for t so that (lam1, t, ..., t) hits value == f_target.

        The value is strictly increasing in t on the positive cone; the
        root is found by bracketing + brentq.  Raises InfeasibleError
        when no positive t attains the target (for k = n-1 the value is
        capped by lam1).
        """
        if lam1 <= 0 or f_target <= 0:
            raise DomainError("lam1 and f_target must be positive")

        def g(t: float) -> float:
            lamv = np.full(self.n, t)
            lamv[0] = lam1
            e = elementary_all(lamv)
            return e[self.n] / e[self.k] - f_target

        t_lo = 1e-12
        if g(t_lo) >= 0:
            raise InfeasibleError("target value too small to bracket")
        t_hi = 1.0
        while g(t_hi) < 0:
            t_hi *= 10.0
            if t_hi > 1e18:
                raise InfeasibleError(
                    f"no tail completion reaches f={f_target} with lam1={lam1}"
                )
        return float(brentq(g, t_lo, t_hi, xtol=1e-300, rtol=8.9e-16, maxiter=200))

    def eigen_bounds_slack_batch(self, L: np.ndarray) -> np.ndarray:
        """Vectorized pinch-bound slacks over sorted positive rows; (B, 2).

        Column order matches ``eigen_bounds_check``; every entry must be
        nonnegative up to rounding relative to the bound magnitudes.
        """
        self._require_pinch_regime()
        L = np.asarray(L, dtype=float)
        f = self.value_batch(L)
        C = spectral_constant(self.n, self.k)
        lam_n = L[:, -1]
        if self.k == self.n - 1:
            return np.stack([lam_n - f, C * f - lam_n], axis=1)
        lam_nm1 = L[:, -2]
        return np.stack(
            [np.sqrt(C * f) - lam_n, lam_nm1 - np.sqrt(f / C)], axis=1
        )

    def ellipticity_sweep(self, f_target: float, K: float, lam1_values) -> EllipticitySweep:
        """Range of the transformed diagonal across a lam_1 sweep at fixed f.

        Each lam_1 is completed to (lam_1, t, ..., t) with t solved so
        the operator value equals ``f_target``; the row records min/max
        of G^{ii} and their ratio.  For k = n-1 the ratio itself must
        stay bounded as lam_1 grows; for k = n-2 the bounded quantity is
        the ratio of G^{ii}/lam_{n-1}, which coincides with max/min.
        """
        self._require_pinch_regime()
        if K <= 0:
            raise DomainError(f"shift K must be > 0, got {K}")
        rows = []
        for lam1 in lam1_values:
            t = self.complete_tail(float(lam1), float(f_target))
            lamv = np.full(self.n, t)
            lamv[0] = lam1
            g = self.legendre_diag(EigenTuple(lamv), K)
            rows.append([lam1, t, g.min(), g.max(), g.max() / g.min()])
        return EllipticitySweep(
            n=self.n, k=self.k, f_target=float(f_target), shift=float(K),
            rows=np.array(rows),
        )
