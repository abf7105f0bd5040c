"""Elementary symmetric functions of eigenvalue tuples.

All evaluation is based on the one-pass prefix recurrence

    e_m <- e_m + lam_i * e_{m-1},

which costs O(n*k) and, on the positive cone, only ever adds terms of
equal sign, so there is no subset enumeration and no cancellation.
Deleted-index minors sigma_m(lam|i) and sigma_m(lam|ij) are computed by
convolving prefix and suffix coefficient tables, which is likewise
cancellation-free.

Batch variants operate on arrays of shape (B, n) and are used by the
sampling verifiers; the scalar functions are the reference API.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError

__all__ = [
    "EigenTuple",
    "elementary",
    "elementary_all",
    "elementary_minor",
    "deleted_minors",
    "pair_minor",
    "identity_residuals",
    "identity_residuals_batch",
    "elementary_batch",
    "elementary_all_batch",
    "deleted_minors_batch",
    "pair_minor_batch",
]


class EigenTuple:
    """Sorted eigenvalue list lam_1 >= ... >= lam_n of a Hessian.

    Values are stored sorted descending at construction; every
    inequality downstream assumes that order.  Positivity is *not*
    required here -- operations working on the convex cone check it
    themselves.
    """

    __slots__ = ("values",)

    def __init__(self, values):
        arr = np.asarray(values, dtype=float)
        if arr.ndim != 1 or arr.size < 2:
            raise DomainError("an eigenvalue tuple needs at least 2 entries")
        if not np.all(np.isfinite(arr)):
            raise DomainError("eigenvalues must be finite")
        self.values = np.sort(arr)[::-1].copy()
        self.values.flags.writeable = False

    @property
    def n(self) -> int:
        return self.values.size

    def __len__(self) -> int:
        return self.values.size

    def __getitem__(self, i):
        return self.values[i]

    def __iter__(self):
        return iter(self.values)

    def __repr__(self) -> str:
        return f"EigenTuple({self.values.tolist()})"

    def min(self) -> float:
        return float(self.values[-1])

    def max(self) -> float:
        return float(self.values[0])

    def require_positive(self) -> None:
        if self.values[-1] <= 0.0:
            raise DomainError(
                f"operation requires all eigenvalues > 0, got min {self.values[-1]}"
            )


def _as_array(lam) -> np.ndarray:
    if isinstance(lam, EigenTuple):
        return lam.values
    arr = np.asarray(lam, dtype=float)
    if arr.ndim != 1:
        raise DomainError("expected a 1-d eigenvalue tuple")
    if not np.all(np.isfinite(arr)):
        raise DomainError("eigenvalues must be finite")
    return arr


def elementary_all(lam) -> np.ndarray:
    """All sigma_0 .. sigma_n of a tuple, by the prefix recurrence."""
    arr = _as_array(lam)
    n = arr.size
    e = np.zeros(n + 1)
    e[0] = 1.0
    for i, x in enumerate(arr):
        top = i + 1
        e[1 : top + 1] = e[1 : top + 1] + x * e[0:top]
    return e


def elementary(lam, k: int) -> float:
    """sigma_k(lam); sigma_0 == 1.

    Raises DomainError unless 0 <= k <= n.
    """
    arr = _as_array(lam)
    n = arr.size
    k = int(k)
    if not 0 <= k <= n:
        raise DomainError(f"k={k} out of range [0, {n}]")
    if k == 0:
        return 1.0
    e = np.zeros(k + 1)
    e[0] = 1.0
    for x in arr:
        e[1 : k + 1] = e[1 : k + 1] + x * e[0:k]
    return float(e[k])


def elementary_minor(lam, k: int, drop) -> float:
    """sigma_k of the tuple with one or two entries deleted.

    ``drop`` holds one or two distinct 0-based indices.
    """
    arr = _as_array(lam)
    n = arr.size
    idx = sorted({int(i) for i in (drop if np.iterable(drop) else (drop,))})
    if len(idx) != len(list(drop if np.iterable(drop) else (drop,))):
        raise DomainError("drop indices must be distinct")
    if not 1 <= len(idx) <= 2:
        raise DomainError("drop must contain 1 or 2 indices")
    if idx[0] < 0 or idx[-1] >= n:
        raise DomainError(f"drop index out of range for n={n}")
    k = int(k)
    if not 0 <= k <= n - len(idx):
        raise DomainError(f"k={k} out of range for a {n - len(idx)}-tuple")
    return elementary(np.delete(arr, idx), k)


def _prefix_table(arr: np.ndarray, kmax: int) -> np.ndarray:
    """P[i, m] = sigma_m(arr[:i]) for 0 <= m <= kmax."""
    n = arr.size
    P = np.zeros((n + 1, kmax + 1))
    P[:, 0] = 1.0
    for i in range(n):
        P[i + 1] = P[i]
        P[i + 1, 1 : kmax + 1] += arr[i] * P[i, 0:kmax]
    return P


def deleted_minors(lam, m: int) -> np.ndarray:
    """sigma_m(lam|i) for every i, via prefix/suffix convolution.

    Returns an array of length n.  m == -1 returns zeros (the empty
    symmetric function of negative order), which keeps derivative
    formulas uniform.
    """
    arr = _as_array(lam)
    n = arr.size
    if m < 0:
        return np.zeros(n)
    if m > n - 1:
        raise DomainError(f"m={m} out of range for minors of an n={n} tuple")
    P = _prefix_table(arr, m)
    S = _prefix_table(arr[::-1], m)[::-1]  # S[i, m] = sigma_m(arr[i:])
    out = np.zeros(n)
    for a in range(m + 1):
        out += P[:n, a] * S[1:, m - a]
    return out


def pair_minor(lam, m: int, i: int, j: int) -> float:
    """sigma_m(lam|ij) for one index pair (0-based, distinct).

    Unlike ``elementary_minor`` this follows the polynomial convention
    sigma_m == 0 for m outside [0, tuple length], which keeps the
    derivative-tensor formulas uniform in k.
    """
    if i == j:
        raise DomainError("pair minor needs distinct indices")
    arr = _as_array(lam)
    if m < 0 or m > arr.size - 2:
        return 0.0
    return elementary_minor(arr, m, (i, j))


def identity_residuals(lam, k: int) -> np.ndarray:
    """Absolute residuals of the four classical sigma_k identities.

    For 1 <= k <= n-1 the identities are

        sigma_k = lam_i sigma_{k-1}(lam|i) + sigma_k(lam|i)        (max over i)
        sum_i sigma_k(lam|i)              = (n-k) sigma_k
        sum_i lam_i sigma_{k-1}(lam|i)    = k sigma_k
        sum_i lam_i^2 sigma_{k-1}(lam|i)  = sigma_1 sigma_k - (k+1) sigma_{k+1}

    and each residual must vanish up to rounding relative to
    max(1, |sigma_k|).
    """
    arr = _as_array(lam)
    n = arr.size
    k = int(k)
    if not 1 <= k <= n - 1:
        raise DomainError(f"k={k} out of range [1, {n - 1}]")
    e = elementary_all(arr)
    mk = deleted_minors(arr, k)
    mkm1 = deleted_minors(arr, k - 1)
    r1 = np.max(np.abs(e[k] - (arr * mkm1 + mk)))
    r2 = abs(np.sum(mk) - (n - k) * e[k])
    r3 = abs(np.sum(arr * mkm1) - k * e[k])
    r4 = abs(np.sum(arr**2 * mkm1) - (e[1] * e[k] - (k + 1) * e[k + 1]))
    return np.array([r1, r2, r3, r4])


def identity_residuals_batch(L: np.ndarray, k: int) -> np.ndarray:
    """Per-row identity residuals, shape (B, n) -> (B, 4)."""
    L = np.asarray(L, dtype=float)
    B, n = L.shape
    k = int(k)
    if not 1 <= k <= n - 1:
        raise DomainError(f"k={k} out of range [1, {n - 1}]")
    e = elementary_all_batch(L)
    mk = deleted_minors_batch(L, k)
    mkm1 = deleted_minors_batch(L, k - 1)
    r1 = np.max(np.abs(e[:, k, None] - (L * mkm1 + mk)), axis=1)
    r2 = np.abs(np.sum(mk, axis=1) - (n - k) * e[:, k])
    r3 = np.abs(np.sum(L * mkm1, axis=1) - k * e[:, k])
    r4 = np.abs(
        np.sum(L**2 * mkm1, axis=1) - (e[:, 1] * e[:, k] - (k + 1) * e[:, k + 1])
    )
    return np.stack([r1, r2, r3, r4], axis=1)


# ---------------------------------------------------------------------------
# batch variants, shapes (B, n) -> (B, ...)
# ---------------------------------------------------------------------------

def elementary_all_batch(L: np.ndarray) -> np.ndarray:
    """sigma_0..sigma_n per row; input (B, n), output (B, n+1)."""
    L = np.asarray(L, dtype=float)
    B, n = L.shape
    e = np.zeros((B, n + 1))
    e[:, 0] = 1.0
    for i in range(n):
        top = i + 1
        e[:, 1 : top + 1] = e[:, 1 : top + 1] + L[:, i, None] * e[:, 0:top]
    return e


def elementary_batch(L: np.ndarray, k: int) -> np.ndarray:
    """sigma_k per row of L, shape (B, n) -> (B,)."""
    L = np.asarray(L, dtype=float)
    n = L.shape[1]
    k = int(k)
    if not 0 <= k <= n:
        raise DomainError(f"k={k} out of range [0, {n}]")
    return elementary_all_batch(L)[:, k]


def deleted_minors_batch(L: np.ndarray, m: int) -> np.ndarray:
    """sigma_m(lam|i) for every row and index; (B, n) -> (B, n)."""
    L = np.asarray(L, dtype=float)
    B, n = L.shape
    if m < 0:
        return np.zeros((B, n))
    if m > n - 1:
        raise DomainError(f"m={m} out of range for minors of an n={n} tuple")
    out = np.empty((B, n))
    cols = np.arange(n)
    for i in range(n):
        sub = L[:, cols != i]
        out[:, i] = elementary_batch(sub, m) if m > 0 else 1.0
    return out


def pair_minor_batch(L: np.ndarray, m: int) -> np.ndarray:
    """sigma_m(lam|ij) tables; (B, n) -> (B, n, n), symmetric, diag 0.

    Returns zeros for m outside [0, n-2] (polynomial convention).
    """
    L = np.asarray(L, dtype=float)
    B, n = L.shape
    out = np.zeros((B, n, n))
    if m < 0 or m > n - 2:
        return out
    cols = np.arange(n)
    for i in range(n):
        for j in range(i + 1, n):
            sub = L[:, (cols != i) & (cols != j)]
            v = elementary_batch(sub, m) if m > 0 else np.ones(B)
            out[:, i, j] = v
            out[:, j, i] = v
    return out
