"""A convex solution family with bounded gradient but unbounded Hessian.

For dimensions n >= 4 and 1 <= k <= n-3 the family

    u_sigma(x) = (1 + x_1^2) * (sigma + |x'|^2)^(alpha/2),
    x' = (x_2, ..., x_n),  alpha = 2 - 2/(n-k),

solves  sigma_n(D^2 u) / sigma_k(D^2 u) = f_sigma  with f_sigma smooth,
positive and bounded below near the origin; the exponent choice makes
the radial prefactor of the quotient cancel exactly.  As sigma -> 0 the
limit u_0 is Lipschitz and convex on a small ball but its gradient is
no better than Holder with exponent alpha - 1 = 1 - 2/(n-k), which this
module estimates numerically, along with the convexity radius and the
locally uniform convergence of u_sigma and f_sigma.

Everything depends on x only through (x_1, rho = |x'|): the family is
rotation invariant in x'.  Grid scans therefore run on the reduced
(x_1, rho) half-plane, which covers the full n-dimensional ball exactly
(a test checks Hessian-spectrum invariance under rotations of x').
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    ConditioningError,
    DomainError,
    InsufficientDataError,
    SingularPointError,
)
from .symfun import elementary_all

__all__ = ["SingularFamily", "Jet", "ConvexRadiusReport", "ViscosityReport"]


@dataclass(frozen=True)
class Jet:
    u: float
    grad: np.ndarray
    hess: np.ndarray


@dataclass(frozen=True)
class ConvexRadiusReport:
    r_hat: float
    resolution: int
    scan_radius: float
    guard_cells: int
    min_eig_inside: float

    def __float__(self) -> float:
        return self.r_hat


@dataclass(frozen=True)
class ViscosityReport:
    """Sup-distances to the sigma = 0 limit on shrinking regularizations.

    ``sup_u`` is measured on a cell-centered sample of the ball (cell
    centers keep the scan off the x' = 0 axis, consistently with the
    quotient scan which must avoid it; the reported sup is the usual
    grid lower estimate of the true sup).  ``sup_f`` is measured on the
    annulus rho in [r/2, r] of the same ball.
    """

    sigmas: np.ndarray
    sup_u: np.ndarray
    sup_f: np.ndarray
    radius: float
    tol_u: float
    tol_f: float

    @property
    def u_monotone(self) -> bool:
        return bool(np.all(np.diff(self.sup_u) < 0))

    @property
    def f_monotone(self) -> bool:
        return bool(np.all(np.diff(self.sup_f) < 0))

    @property
    def passed(self) -> bool:
        return (
            self.u_monotone
            and self.f_monotone
            and self.sup_u[-1] < self.tol_u
            and self.sup_f[-1] < self.tol_f
        )


def _pow(base, expo):
    """exp(expo * log(base)) for strictly positive base (log-domain)."""
    return np.exp(expo * np.log(base))


@dataclass(frozen=True)
class SingularFamily:
    """Parameters (n, k, sigma) of the regularized singular family."""

    n: int
    k: int
    sigma: float = 0.0

    def __post_init__(self):
        if self.n < 4 or not 1 <= self.k <= self.n - 3:
            raise DomainError(
                f"family needs n >= 4 and 1 <= k <= n-3, got (n, k) = ({self.n}, {self.k})"
            )
        if self.sigma < 0:
            raise DomainError(f"sigma must be >= 0, got {self.sigma}")

    @property
    def alpha(self) -> float:
        """Derived exponent 2 - 2/(n-k); always strictly between 1 and 2."""
        return 2.0 - 2.0 / (self.n - self.k)

    @property
    def holder_threshold(self) -> float:
        """Sharp gradient Holder exponent alpha - 1 = 1 - 2/(n-k)."""
        return 1.0 - 2.0 / (self.n - self.k)

    def limit(self) -> "SingularFamily":
        return replace(self, sigma=0.0)

    # -- closed-form jet ---------------------------------------------------

    def _check_point(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise DomainError(f"point must have shape ({self.n},)")
        return x

    def value(self, x) -> float:
        x = self._check_point(x)
        s = self.sigma + float(np.sum(x[1:] ** 2))
        g = _pow(s, 0.5 * self.alpha) if s > 0 else 0.0
        return (1.0 + x[0] ** 2) * g

    def gradient(self, x) -> np.ndarray:
        x = self._check_point(x)
        a = self.alpha
        s = self.sigma + float(np.sum(x[1:] ** 2))
        out = np.zeros(self.n)
        if s == 0.0:
            return out  # alpha > 1 makes the gradient vanish on the axis
        g = _pow(s, 0.5 * a)
        gm1 = _pow(s, 0.5 * a - 1.0)
        out[0] = 2.0 * x[0] * g
        out[1:] = (1.0 + x[0] ** 2) * a * x[1:] * gm1
        return out

    def hessian(self, x) -> np.ndarray:
        x = self._check_point(x)
        a = self.alpha
        s = self.sigma + float(np.sum(x[1:] ** 2))
        if s == 0.0:
            raise SingularPointError(
                "second derivatives blow up on the x' = 0 axis at sigma = 0"
            )
        g = _pow(s, 0.5 * a)
        gm1 = _pow(s, 0.5 * a - 1.0)
        gm2 = _pow(s, 0.5 * a - 2.0)
        xp = x[1:]
        H = np.empty((self.n, self.n))
        H[0, 0] = 2.0 * g
        H[0, 1:] = H[1:, 0] = 2.0 * a * x[0] * xp * gm1
        block = (1.0 + x[0] ** 2) * gm2 * (a * (a - 2.0)) * np.outer(xp, xp)
        block[np.diag_indices(self.n - 1)] += (1.0 + x[0] ** 2) * a * s * gm2
        H[1:, 1:] = block
        return H

    def eval_jet(self, x) -> Jet:
        """Closed-form (u, Du, D^2u) at a point.

        Raises SingularPointError for the Hessian on the sigma = 0 axis
        (value and gradient are defined everywhere).
        """
        return Jet(self.value(x), self.gradient(x), self.hessian(x))

    # -- finite-difference cross-check --------------------------------------

    def fd_jet_check(self, x, h: float = 1e-4) -> float:
        """Max relative residual of the closed-form jet against
        fourth-order central differences of the value.

        Requires the point to sit at least 10*h away from the sigma = 0
        axis so every stencil point stays in the smooth region.
        """
        x = self._check_point(x)
        rho = math.sqrt(float(np.sum(x[1:] ** 2)))
        if self.sigma == 0.0 and rho < 10.0 * h:
            raise ConditioningError(
                f"point is {rho:.3g} from the singular axis; need >= {10 * h:.3g}"
            )
        jet = self.eval_jet(x)
        d1_off = np.array([-2.0, -1.0, 1.0, 2.0])
        d1_w = np.array([1.0, -8.0, 8.0, -1.0]) / 12.0
        d2_off = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
        d2_w = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0

        def at(dx):
            return self.value(x + dx)

        n = self.n
        grad = np.zeros(n)
        hess = np.zeros((n, n))
        for p in range(n):
            e = np.zeros(n)
            e[p] = 1.0
            grad[p] = sum(w * at(o * h * e) for o, w in zip(d1_off, d1_w)) / h
            hess[p, p] = sum(w * at(o * h * e) for o, w in zip(d2_off, d2_w)) / h**2
            for q in range(p + 1, n):
                eq = np.zeros(n)
                eq[q] = 1.0
                acc = 0.0
                for oa, wa in zip(d1_off, d1_w):
                    for ob, wb in zip(d1_off, d1_w):
                        acc += wa * wb * at(oa * h * e + ob * h * eq)
                hess[p, q] = hess[q, p] = acc / h**2
        scale_g = np.max(np.abs(jet.grad)) + 1.0
        scale_h = np.max(np.abs(jet.hess)) + 1.0
        res_g = np.max(np.abs(grad - jet.grad)) / scale_g
        res_h = np.max(np.abs(hess - jet.hess)) / scale_h
        return float(max(res_g, res_h))

    # -- the quotient along the family --------------------------------------

    def quotient_f(self, x) -> float:
        """f_sigma(x) = sigma_n(D^2 u) / sigma_k(D^2 u) at a point."""
        lam = np.linalg.eigvalsh(self.hessian(x))
        e = elementary_all(lam)
        return float(e[self.n] / e[self.k])

    def _reduced_spectrum(self, x1, rho):
        """Hessian eigenvalue stacks over reduced coordinates (x1, rho > 0).

        At (x1, rho e_2) the Hessian splits into a 2x2 block in the
        (e_1, radial) plane plus n-2 equal tangential eigenvalues.
        """
        x1 = np.asarray(x1, dtype=float)
        rho = np.asarray(rho, dtype=float)
        a = self.alpha
        s = self.sigma + rho**2
        gm1 = _pow(s, 0.5 * a - 1.0)
        gm2 = _pow(s, 0.5 * a - 2.0)
        h11 = 2.0 * _pow(s, 0.5 * a)
        h12 = 2.0 * a * x1 * rho * gm1
        h22 = (1.0 + x1**2) * gm2 * (a * (a - 2.0) * rho**2 + a * s)
        tang = (1.0 + x1**2) * a * gm1
        tr = h11 + h22
        disc = np.sqrt((h11 - h22) ** 2 + 4.0 * h12**2)
        lam_lo = 0.5 * (tr - disc)
        lam_hi = 0.5 * (tr + disc)
        return lam_lo, lam_hi, tang

    def quotient_profile(self, rs) -> np.ndarray:
        """f_sigma along the ray x = (0, r, 0, ..., 0); columns (r, f)."""
        rs = np.asarray(rs, dtype=float)
        lam_lo, lam_hi, tang = self._reduced_spectrum(np.zeros_like(rs), rs)
        out = np.empty((rs.size, 2))
        for i, r in enumerate(rs):
            lam = np.concatenate([[lam_lo[i], lam_hi[i]], np.full(self.n - 2, tang[i])])
            e = elementary_all(lam)
            out[i] = (r, e[self.n] / e[self.k])
        return out

    def quotient_log_slope(self, rs) -> float:
        """Least-squares slope of log f_sigma against log r along the ray."""
        prof = self.quotient_profile(rs)
        return float(np.polyfit(np.log(prof[:, 0]), np.log(prof[:, 1]), 1)[0])

    # -- convexity radius ----------------------------------------------------

    def convex_radius(
        self,
        resolution: int = 96,
        scan_radius: float = 1.0,
        guard_cells: int = 10,
    ) -> ConvexRadiusReport:
        """Largest sampled radius with a positive-semidefinite Hessian.

        Scans the reduced (x_1, rho) half-disc on a resolution^2 grid.
        For sigma = 0 a guard band of ``guard_cells`` cells along the
        axis is excluded from second-derivative sampling (derivatives
        are unbounded there by design); convexity at excluded points
        holds only in the limiting sense.  Finer grids can shrink the
        reported radius but never grow it by more than one cell.
        """
        if resolution < 8:
            raise DomainError("resolution too small for a meaningful scan")
        step = scan_radius / resolution
        x1 = np.linspace(-scan_radius, scan_radius, 2 * resolution + 1)
        rho = np.linspace(0.0, scan_radius, resolution + 1)
        if self.sigma == 0.0:
            rho = rho[rho >= guard_cells * step - 1e-15]
        else:
            rho = rho[1:]  # rho = 0 handled by continuity of the block
        X1, RHO = np.meshgrid(x1, rho, indexing="ij")
        R = np.sqrt(X1**2 + RHO**2)
        inside = R <= scan_radius
        lam_lo, lam_hi, tang = self._reduced_spectrum(X1[inside], RHO[inside])
        min_eig = np.minimum(lam_lo, tang)
        radii = R[inside]
        bad = min_eig < 0.0
        r_bad = float(np.min(radii[bad])) if np.any(bad) else np.inf
        good_radii = radii[radii < r_bad]
        r_hat = float(np.max(good_radii)) if good_radii.size else 0.0
        min_inside = float(np.min(min_eig[radii <= r_hat])) if r_hat > 0 else 0.0
        return ConvexRadiusReport(
            r_hat=r_hat,
            resolution=resolution,
            scan_radius=scan_radius,
            guard_cells=guard_cells,
            min_eig_inside=min_inside,
        )

    # -- gradient Holder exponent --------------------------------------------

    def holder_estimate(self, radii) -> float:
        """Exponent of the gradient increment along the x' radial ray.

        Least-squares slope of log |Du(0, r e_2) - Du(0)| against log r;
        the family makes the increment an exact power of r, so the slope
        converges to alpha - 1 = 1 - 2/(n-k), the sharp threshold past
        which the gradient is not Holder continuous.  Requires sigma = 0
        and at least 3 radii.
        """
        if self.sigma != 0.0:
            raise DomainError("the threshold estimate is for the sigma = 0 limit")
        rs = np.asarray(radii, dtype=float)
        if rs.size < 3:
            raise InsufficientDataError("need at least 3 radii for a regression")
        if np.any(rs <= 0) or np.any(np.diff(rs) >= 0):
            raise DomainError("radii must be positive and strictly decreasing")
        g0 = self.gradient(np.zeros(self.n))
        incr = np.empty(rs.size)
        for i, r in enumerate(rs):
            x = np.zeros(self.n)
            x[1] = r
            incr[i] = np.linalg.norm(self.gradient(x) - g0)
        return float(np.polyfit(np.log(rs), np.log(incr), 1)[0])

    # -- locally uniform convergence as sigma -> 0 ----------------------------

    def viscosity_limit_check(
        self,
        sigmas,
        radius: float,
        tol_u: float = 1e-4,
        tol_f: float = 1e-3,
        resolution: int = 48,
    ) -> ViscosityReport:
        """Sup-distances of u_sigma and f_sigma to their sigma = 0 limits.

        ``sigmas`` must decrease to small values.  The u-distance is the
        max of |u_sigma - u_0| over a cell-centered sample of the ball
        of the given radius; the f-distance is over the annulus
        rho in [radius/2, radius], which stays clear of the axis where
        f_0 is defined only as a limit.
        """
        sig = np.asarray(sigmas, dtype=float)
        if np.any(np.diff(sig) >= 0):
            raise DomainError("sigma list must be strictly decreasing")
        lim = self.limit()
        m = resolution
        step = radius / m
        x1c = (np.arange(-m, m) + 0.5) * step
        rhoc = (np.arange(m) + 0.5) * step
        X1, RHO = np.meshgrid(x1c, rhoc, indexing="ij")
        ball = X1**2 + RHO**2 <= radius**2
        ann = ball & (RHO >= 0.5 * radius)
        bx1, brho = X1[ball], RHO[ball]
        ax1, arho = X1[ann], RHO[ann]

        def u_vals(fam, x1, rho):
            s = fam.sigma + rho**2
            return (1.0 + x1**2) * _pow(s, 0.5 * fam.alpha)

        def f_vals(fam, x1, rho):
            lam_lo, lam_hi, tang = fam._reduced_spectrum(x1, rho)
            out = np.empty(x1.size)
            for i in range(x1.size):
                lam = np.concatenate(
                    [[lam_lo[i], lam_hi[i]], np.full(fam.n - 2, tang[i])]
                )
                e = elementary_all(lam)
                out[i] = e[fam.n] / e[fam.k]
            return out

        u0 = u_vals(lim, bx1, brho)
        f0 = f_vals(lim, ax1, arho)
        sup_u = np.empty(sig.size)
        sup_f = np.empty(sig.size)
        for j, s in enumerate(sig):
            fam_s = replace(self, sigma=float(s))
            sup_u[j] = np.max(np.abs(u_vals(fam_s, bx1, brho) - u0))
            sup_f[j] = np.max(np.abs(f_vals(fam_s, ax1, arho) - f0))
        return ViscosityReport(
            sigmas=sig, sup_u=sup_u, sup_f=sup_f, radius=radius,
            tol_u=tol_u, tol_f=tol_f,
        )
