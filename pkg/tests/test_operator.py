import math

import numpy as np
import pytest

from hessq_lab.errors import DomainError, InfeasibleError, UnsupportedRegimeError
from hessq_lab.operator import QuotientOperator, spectral_constant
from hessq_lab.concavity import fd_hessian_oracle, sample_tuples
from hessq_lab.symfun import EigenTuple


def test_value_frozen_examples():
    assert QuotientOperator(3, 2).value([1, 1, 1]) == pytest.approx(1 / 3, rel=1e-15)
    assert QuotientOperator(3, 1).value([3, 2, 1]) == pytest.approx(1.0, rel=1e-15)
    assert QuotientOperator(2, 1).value([2, 1]) == pytest.approx(2 / 3, rel=1e-15)


def test_value_rejects_nonpositive():
    with pytest.raises(DomainError):
        QuotientOperator(3, 2).value([1.0, 1.0, 0.0])
    with pytest.raises(DomainError):
        QuotientOperator(3, 2).value([1.0, 1.0, -1.0])


def test_operator_validation():
    with pytest.raises(DomainError):
        QuotientOperator(3, 3)
    with pytest.raises(DomainError):
        QuotientOperator(3, 0)
    with pytest.raises(DomainError):
        QuotientOperator(1, 1)


def test_grad_frozen_examples():
    np.testing.assert_allclose(
        QuotientOperator(3, 2).grad_diag([1, 1, 1]), [1 / 9] * 3, rtol=1e-15
    )
    np.testing.assert_allclose(
        QuotientOperator(3, 1).grad_diag([1, 1, 1]), [2 / 9] * 3, rtol=1e-15
    )
    np.testing.assert_allclose(
        QuotientOperator(2, 1).grad_diag([2, 1]), [1 / 9, 4 / 9], rtol=1e-15
    )


def test_grad_positive_on_cone():
    rng = np.random.default_rng(3)
    for n in range(2, 7):
        for k in range(1, n):
            op = QuotientOperator(n, k)
            for _ in range(25):
                lam = 10.0 ** rng.uniform(-3, 3, size=n)
                assert np.all(op.grad_diag(lam) > 0)


def test_grad_reduced_forms():
    # k = n-1: F^{ii} = F^2 / lam_i^2;  k = n-2: (F^2/lam_i^2) sum_{m != i} 1/lam_m
    rng = np.random.default_rng(5)
    for _ in range(20):
        lam = np.sort(10.0 ** rng.uniform(-2, 2, size=4))[::-1]
        op1 = QuotientOperator(4, 3)
        f = op1.value(lam)
        np.testing.assert_allclose(op1.grad_diag(lam), f**2 / lam**2, rtol=1e-12)
        op2 = QuotientOperator(4, 2)
        f = op2.value(lam)
        inv = np.sum(1 / lam) - 1 / lam
        np.testing.assert_allclose(op2.grad_diag(lam), f**2 / lam**2 * inv, rtol=1e-12)


def test_hess_frozen_examples():
    t = QuotientOperator(2, 1).hess_entries([2, 1])
    assert -t.offdiag[0, 1] == pytest.approx(1 / 3, rel=1e-14)
    t = QuotientOperator(3, 2).hess_entries([1, 1, 1])
    np.testing.assert_allclose(
        t.diag_block, 2 / 27 - (2 / 9) * np.eye(3), rtol=0, atol=1e-16
    )


def test_hess_offdiag_negative_everywhere():
    rng = np.random.default_rng(17)
    for n in range(2, 6):
        for k in range(1, n):
            op = QuotientOperator(n, k)
            lam = 10.0 ** rng.uniform(-2, 2, size=n)
            off = op.hess_entries(lam).offdiag
            mask = ~np.eye(n, dtype=bool)
            assert np.all(off[mask] < 0)


def test_hess_divided_difference_relation():
    rng = np.random.default_rng(29)
    for n in range(2, 6):
        for k in range(1, n):
            op = QuotientOperator(n, k)
            for _ in range(20):
                lam = np.sort(10.0 ** rng.uniform(-3, 3, size=n))[::-1]
                if np.min(np.abs(np.diff(lam))) < 1e-3:
                    continue
                grad = op.grad_diag(lam)
                off = op.hess_entries(lam).offdiag
                for p in range(n):
                    for q in range(p + 1, n):
                        dd = (grad[p] - grad[q]) / (lam[q] - lam[p])
                        scale = max(
                            abs(off[p, q]),
                            (grad[p] + grad[q]) / abs(lam[p] - lam[q]),
                        )
                        assert abs(-off[p, q] - dd) <= 1e-10 * scale


def test_hess_equal_eigenvalue_entries_continuous():
    # the closed form at lam_p == lam_q is the limit of the divided difference
    op = QuotientOperator(3, 1)
    base = np.array([2.0, 1.0, 1.0])
    off_eq = op.hess_entries(base).offdiag[1, 2]
    eps_off = op.hess_entries([2.0, 1.0 + 1e-9, 1.0]).offdiag[1, 2]
    assert off_eq == pytest.approx(eps_off, rel=1e-6)


def test_hess_matches_fd_oracle():
    rng = np.random.default_rng(41)
    for n in range(2, 6):
        for k in range(1, n):
            op = QuotientOperator(n, k)
            lam = np.sort(10.0 ** rng.uniform(-1, 1, size=n))[::-1]
            analytic = op.hess_entries(lam).diag_block
            oracle = fd_hessian_oracle(op, lam)
            np.testing.assert_allclose(analytic, oracle, rtol=1e-6, atol=1e-12)


def test_h_diag_examples_and_cross_check():
    np.testing.assert_allclose(
        QuotientOperator(3, 2).h_diag([1, 1, 1]), [1 / 3] * 3, rtol=1e-15
    )
    np.testing.assert_allclose(
        QuotientOperator(2, 1).h_diag([2, 1]), [1 / 3, 4 / 3], rtol=1e-15
    )
    np.testing.assert_allclose(
        QuotientOperator(3, 1).h_diag([1, 1, 1]), [2 / 3] * 3, rtol=1e-15
    )
    rng = np.random.default_rng(43)
    for n in range(2, 7):
        for k in range(1, n):
            op = QuotientOperator(n, k)
            lam = np.sort(10.0 ** rng.uniform(-3, 3, size=n))[::-1]
            from hessq_lab.symfun import elementary

            np.testing.assert_allclose(
                op.h_diag(lam),
                elementary(lam, k) * op.grad_diag(lam),
                rtol=1e-12,
            )


def test_eigen_bounds_examples():
    rep = QuotientOperator(3, 2).eigen_bounds_check([2.0, 2.0, 2.0])
    assert rep.constant == spectral_constant(3, 2) == 3.0
    assert rep.slack[1] == pytest.approx(0.0, abs=1e-15)  # upper bound tight
    assert rep.passed
    rep = QuotientOperator(4, 2).eigen_bounds_check([5.0, 5.0, 5.0, 5.0])
    assert rep.constant == 6.0
    assert rep.slack[0] == pytest.approx(0.0, abs=1e-12)  # lam_n = sqrt(C f)
    assert rep.passed
    rep = QuotientOperator(3, 2).eigen_bounds_check([100.0, 1.0, 1.0])
    assert rep.f == pytest.approx(100 / 201, rel=1e-14)
    assert rep.passed


def test_eigen_bounds_random_batch():
    L = sample_tuples(5, 2000, seed=77)
    for k in (4, 3):
        op = QuotientOperator(5, k)
        slack = op.eigen_bounds_slack_batch(L)
        f = op.value_batch(L)
        scale = np.maximum(1.0, np.maximum(L[:, 0], op.value_batch(L) * spectral_constant(5, k)))
        assert np.all(slack >= -1e-12 * scale[:, None])


def test_eigen_bounds_regime_gate():
    with pytest.raises(UnsupportedRegimeError):
        QuotientOperator(5, 2).eigen_bounds_check([4, 3, 2, 1, 1])


def test_legendre_diag_examples():
    np.testing.assert_allclose(
        QuotientOperator(3, 2).legendre_diag([1, 1, 1], 1.0), [4 / 9] * 3, rtol=1e-15
    )
    np.testing.assert_allclose(
        QuotientOperator(3, 1).legendre_diag([1, 1, 1], 1.0), [8 / 9] * 3, rtol=1e-15
    )
    with pytest.raises(DomainError):
        QuotientOperator(3, 2).legendre_diag([1, 1, 1], 0.0)


def test_legendre_diag_equals_grad_times_square():
    rng = np.random.default_rng(59)
    for n in range(2, 7):
        for k in range(1, n):
            op = QuotientOperator(n, k)
            lam = np.sort(10.0 ** rng.uniform(-3, 3, size=n))[::-1]
            K = float(10.0 ** rng.uniform(-1, 1))
            np.testing.assert_allclose(
                op.legendre_diag(lam, K),
                op.grad_diag(lam) * (K + lam) ** 2,
                rtol=1e-12,
            )


def test_legendre_diag_small_shift_limit():
    op = QuotientOperator(4, 2)
    lam = np.array([3.0, 2.0, 1.5, 1.0])
    g = op.legendre_diag(lam, 1e-9)
    np.testing.assert_allclose(g, op.grad_diag(lam) * lam**2, rtol=1e-8)


def test_value_homogeneity():
    rng = np.random.default_rng(61)
    for n in range(2, 7):
        for k in range(1, n):
            op = QuotientOperator(n, k)
            lam = 10.0 ** rng.uniform(-2, 2, size=n)
            t = float(10.0 ** rng.uniform(-2, 2))
            assert op.value(t * lam) == pytest.approx(
                t ** (n - k) * op.value(lam), rel=1e-12
            )


def test_ellipticity_sweep_isotropic_row():
    op = QuotientOperator(3, 2)
    sweep = op.ellipticity_sweep(f_target=1 / 3, K=1.0, lam1_values=[1.0])
    lam1, tail, gmin, gmax, ratio = sweep.rows[0]
    assert tail == pytest.approx(1.0, rel=1e-12)
    assert ratio == pytest.approx(1.0, rel=1e-12)


def test_ellipticity_sweep_bounded_ratio():
    op = QuotientOperator(3, 2)
    sweep = op.ellipticity_sweep(f_target=1 / 3, K=1.0, lam1_values=[1e3, 1e6])
    assert sweep.ratio_variation() <= 0.05
    op = QuotientOperator(4, 2)
    sweep = op.ellipticity_sweep(f_target=0.5, K=1.0, lam1_values=[1e3, 1e6])
    assert sweep.ratio_variation() <= 0.05


def test_ellipticity_infeasible_target():
    op = QuotientOperator(3, 2)
    # for k = n-1 the value is capped by lam_1
    with pytest.raises(InfeasibleError):
        op.complete_tail(lam1=1.0, f_target=2.0)


def test_complete_tail_hits_target():
    rng = np.random.default_rng(67)
    for n, k in [(3, 2), (4, 2), (5, 4), (6, 3)]:
        op = QuotientOperator(n, k)
        for _ in range(5):
            lam1 = float(10.0 ** rng.uniform(0, 5))
            f_t = float(10.0 ** rng.uniform(-1, 0))
            t = op.complete_tail(lam1, f_t)
            lam = np.full(n, t)
            lam[0] = lam1
            assert op.value(EigenTuple(lam)) == pytest.approx(f_t, rel=1e-10)
