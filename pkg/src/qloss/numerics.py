"""Dense complex linear algebra helpers: permanents, Haar and Fourier unitaries.

Matrices are plain ``numpy.ndarray`` objects of dtype ``complex128``. Indexing
follows the optics convention ``M[i, j]`` = amplitude from input ``j`` to
output ``i``.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

MAX_PERMANENT_SIZE = 20
DEFAULT_TOL = 1e-10

# Recorded in experiment metadata so (algorithm, seed) pins a sample.
RNG_ALGORITHM = "numpy.random.PCG64"


def as_matrix(m, *, square: bool = False) -> np.ndarray:
    """Coerce to a finite 2-D complex array."""
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {a.shape}")
    if square and a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def adjoint(m: np.ndarray) -> np.ndarray:
    return np.conj(np.asarray(m)).T


def permanent(m, method: str = "ryser") -> complex:
    """Permanent of a square matrix of side at most 20.

    ``method`` is ``"ryser"`` (Gray-code Ryser formula with running row sums)
    or ``"glynn"`` (Gray-code Glynn formula). Both are O(2^n n).
    """
    a = as_matrix(m, square=True)
    n = a.shape[0]
    if n > MAX_PERMANENT_SIZE:
        raise ValueError(f"permanent limited to n <= {MAX_PERMANENT_SIZE}, got {n}")
    if n == 0:
        return 1.0 + 0j
    if n == 1:
        return complex(a[0, 0])
    if method == "ryser":
        return _ryser(a)
    if method == "glynn":
        return _glynn(a)
    raise ValueError(f"unknown permanent method {method!r}")


def _ryser(a: np.ndarray) -> complex:
    n = a.shape[0]
    cols = [a[:, j].tolist() for j in range(n)]
    row_sums = [0j] * n
    total = 0j
    in_set = [False] * n
    size = 0
    for k in range(1, 1 << n):
        # Gray code: flip the bit at the position of the lowest set bit of k.
        j = (k & -k).bit_length() - 1
        col = cols[j]
        if in_set[j]:
            in_set[j] = False
            size -= 1
            for i in range(n):
                row_sums[i] -= col[i]
        else:
            in_set[j] = True
            size += 1
            for i in range(n):
                row_sums[i] += col[i]
        prod = 1 + 0j
        for s in row_sums:
            prod *= s
        total += prod if (n - size) % 2 == 0 else -prod
    return complex(total)


def _glynn(a: np.ndarray) -> complex:
    n = a.shape[0]
    rows = [a[i, :].tolist() for i in range(n)]
    # delta = (1, 1, ..., 1) initially; column sums of delta_i * a_ij
    col_sums = [sum(rows[i][j] for i in range(n)) for j in range(n)]
    delta = [1] * n
    sign = 1
    prod = 1 + 0j
    for s in col_sums:
        prod *= s
    total = prod
    # flip delta_1..delta_{n-1} in Gray-code order; delta_0 stays +1
    for k in range(1, 1 << (n - 1)):
        i = (k & -k).bit_length()  # rows 1..n-1
        row = rows[i]
        if delta[i] == 1:
            for j in range(n):
                col_sums[j] -= 2 * row[j]
        else:
            for j in range(n):
                col_sums[j] += 2 * row[j]
        delta[i] = -delta[i]
        sign = -sign
        prod = 1 + 0j
        for s in col_sums:
            prod *= s
        total += sign * prod
    return complex(total / (1 << (n - 1)))


def permanent_bruteforce(m) -> complex:
    """Sum over all permutations. Test oracle only; keep n small."""
    a = as_matrix(m, square=True)
    n = a.shape[0]
    total = 0j
    for perm in itertools.permutations(range(n)):
        p = 1 + 0j
        for i, j in enumerate(perm):
            p *= a[i, j]
        total += p
    return complex(total)


def haar_unitary(m: int, seed: int) -> np.ndarray:
    """Haar-random m x m unitary, deterministic in ``seed``."""
    if m < 1:
        raise ValueError("m must be >= 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    z = (rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))) / math.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    # without this phase fix QR output is not Haar distributed
    return q * (d / np.abs(d))[np.newaxis, :]


def fourier_unitary(n: int) -> np.ndarray:
    """N-mode discrete Fourier matrix, F[j, k] = exp(2 pi i j k / N) / sqrt(N)."""
    if n < 1:
        raise ValueError("N must be >= 1")
    jk = np.outer(np.arange(n), np.arange(n)) % n
    return np.exp(2j * np.pi * jk / n) / math.sqrt(n)


def is_unitary(m, tol: float = DEFAULT_TOL) -> bool:
    a = as_matrix(m, square=True)
    err = np.abs(adjoint(a) @ a - np.eye(a.shape[0]))
    return bool(err.max(initial=0.0) <= tol)


def is_subunitary(t, tol: float = DEFAULT_TOL) -> bool:
    """True when the largest eigenvalue of T^dagger T is at most 1 + tol."""
    a = as_matrix(t, square=True)
    if a.shape[0] == 0:
        return True
    top = np.linalg.eigvalsh(adjoint(a) @ a)[-1]
    return bool(top <= 1.0 + tol)
