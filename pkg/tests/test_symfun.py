import itertools

import numpy as np
import pytest

from hessq_lab.errors import DomainError
from hessq_lab.symfun import (
    EigenTuple,
    deleted_minors,
    deleted_minors_batch,
    elementary,
    elementary_all,
    elementary_batch,
    elementary_minor,
    identity_residuals,
    identity_residuals_batch,
    pair_minor,
    pair_minor_batch,
)


def brute_sigma(vals, k):
    """Independent oracle: explicit sum over all k-subsets."""
    vals = list(vals)
    if k == 0:
        return 1.0
    return float(sum(np.prod(c) for c in itertools.combinations(vals, k)))


def test_elementary_frozen_examples():
    assert elementary([1, 1, 1], 2) == 3.0
    assert elementary([3, 2, 1], 2) == 11.0
    assert elementary([3, 2, 1], 0) == 1.0


def test_elementary_matches_subset_enumeration():
    rng = np.random.default_rng(101)
    for n in range(2, 9):
        for _ in range(20):
            lam = 10.0 ** rng.uniform(-3, 3, size=n)
            for k in range(n + 1):
                ref = brute_sigma(lam, k)
                assert elementary(lam, k) == pytest.approx(ref, rel=1e-12)


def test_elementary_rejects_out_of_range():
    with pytest.raises(DomainError):
        elementary([1, 2, 3], 4)
    with pytest.raises(DomainError):
        elementary([1, 2, 3], -1)


def test_minor_frozen_examples():
    # indices are 0-based: dropping the middle entry of (3, 2, 1)
    assert elementary_minor([3, 2, 1], 1, (1,)) == 4.0
    assert elementary_minor([1, 1, 1], 2, (0,)) == 1.0
    assert elementary_minor([3, 2, 1], 0, (0, 2)) == 1.0


def test_minor_equals_explicit_deletion():
    rng = np.random.default_rng(7)
    for _ in range(50):
        n = rng.integers(3, 8)
        lam = 10.0 ** rng.uniform(-2, 2, size=n)
        i = int(rng.integers(0, n))
        j = int(rng.integers(0, n - 1))
        j = j if j != i else n - 1
        for k in range(n):
            assert elementary_minor(lam, k, (i,)) == elementary(np.delete(lam, i), k)
        for k in range(n - 1):
            assert elementary_minor(lam, k, (i, j)) == elementary(
                np.delete(lam, (i, j)), k
            )


def test_minor_rejects_bad_drops():
    with pytest.raises(DomainError):
        elementary_minor([1, 2, 3], 1, (0, 0))
    with pytest.raises(DomainError):
        elementary_minor([1, 2, 3], 1, (5,))
    with pytest.raises(DomainError):
        elementary_minor([1, 2, 3], 3, (0,))


def test_deleted_minors_table():
    lam = np.array([4.0, 2.5, 1.5, 0.5])
    for m in range(4):
        tbl = deleted_minors(lam, m)
        for i in range(4):
            assert tbl[i] == pytest.approx(brute_sigma(np.delete(lam, i), m), rel=1e-14)


def test_pair_minor_out_of_slots_is_zero():
    assert pair_minor([2.0, 1.0], 1, 0, 1) == 0.0
    assert pair_minor([2.0, 1.0], -1, 0, 1) == 0.0


def test_identity_residuals_frozen_examples():
    assert np.all(identity_residuals([3, 2, 1], 1) <= 1e-14)
    assert np.all(identity_residuals([1, 1, 1], 2) == 0.0)
    assert np.all(identity_residuals([5, 1e-3], 1) <= 1e-14)


def test_identity_hand_expansion():
    # identity 2 at (3,2,1), k=1: (2+1)+(3+1)+(3+2) = 12 = 2 * sigma_1
    lam = np.array([3.0, 2.0, 1.0])
    assert np.sum(deleted_minors(lam, 1)) == 12.0 == 2 * elementary(lam, 1)


def test_identity_residuals_random_scaled():
    rng = np.random.default_rng(11)
    for n in range(2, 9):
        lam = 10.0 ** rng.uniform(-3, 3, size=(200, n))
        for k in range(1, n):
            res = identity_residuals_batch(lam, k)
            scale = np.maximum(1.0, np.abs(elementary_batch(lam, k)))
            assert np.all(res <= 1e-12 * scale[:, None])


def test_batch_matches_scalar():
    rng = np.random.default_rng(23)
    L = 10.0 ** rng.uniform(-2, 2, size=(40, 5))
    for k in range(6):
        ref = np.array([elementary(row, k) for row in L])
        np.testing.assert_allclose(elementary_batch(L, k), ref, rtol=1e-14)
    for m in range(4):
        ref = np.array([deleted_minors(row, m) for row in L])
        np.testing.assert_allclose(deleted_minors_batch(L, m), ref, rtol=1e-14)
        tbl = pair_minor_batch(L, m)
        for i in range(5):
            for j in range(i + 1, 5):
                ref = np.array([pair_minor(row, m, i, j) for row in L])
                np.testing.assert_allclose(tbl[:, i, j], ref, rtol=1e-14)
                np.testing.assert_allclose(tbl[:, j, i], ref, rtol=1e-14)


def test_eigentuple_sorts_and_validates():
    et = EigenTuple([1.0, 3.0, 2.0])
    assert list(et.values) == [3.0, 2.0, 1.0]
    assert et.n == 3 and et.max() == 3.0 and et.min() == 1.0
    with pytest.raises(DomainError):
        EigenTuple([1.0])
    with pytest.raises(DomainError):
        EigenTuple([1.0, np.inf])
    with pytest.raises(DomainError):
        EigenTuple([1.0, -1.0]).require_positive()
