"""Dense linear algebra for real and complex skew-symmetric matrices.

Three kernels live here:

* :func:`canonical_decompose` -- ``A = W^T S W`` with ``S`` block diagonal,
  blocks ``[[0, lam], [-lam, 0]]``, ``W`` real orthogonal.
* :func:`skew_exp` -- ``exp(-A t)`` assembled from the canonical form.
* :func:`pfaffian` -- Parlett-Reid elimination with partial pivoting, vectorised
  over any leading batch dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = [
    "CanonicalForm",
    "as_skew",
    "block_matrix",
    "canonical_decompose",
    "skew_exp",
    "pfaffian",
    "pfaffian_matching_oracle",
]

PFAFFIAN_ZERO_TOL = 1e-14


def as_skew(a) -> np.ndarray:
    """Validate a square, even-dimensional real matrix and antisymmetrize it.

    The returned array is ``(a - a.T) / 2`` so antisymmetry and the zero
    diagonal hold exactly, whatever rounding the caller left behind.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if a.shape[0] % 2:
        raise ValueError(f"dimension must be even, got {a.shape[0]}")
    return 0.5 * (a - a.T)


def block_matrix(values, fn) -> np.ndarray:
    """Block-diagonal ``2n x 2n`` matrix with ``fn(v)`` (a 2x2 array) per value."""
    values = np.asarray(values, dtype=float)
    out = np.zeros((2 * len(values), 2 * len(values)))
    for j, v in enumerate(values):
        out[2 * j : 2 * j + 2, 2 * j : 2 * j + 2] = fn(v)
    return out


@dataclass(frozen=True)
class CanonicalForm:
    """``A = w.T @ S @ w`` with ``S = BlockDiag([[0, lam_j], [-lam_j, 0]])``."""

    w: np.ndarray
    lambdas: np.ndarray

    def block_diagonal(self) -> np.ndarray:
        return block_matrix(self.lambdas, lambda lam: [[0.0, lam], [-lam, 0.0]])

    def reconstruct(self) -> np.ndarray:
        return self.w.T @ self.block_diagonal() @ self.w


def canonical_decompose(a) -> CanonicalForm:
    """Canonical block-diagonal form of a real skew-symmetric matrix.

    Uses the real Schur form, which for a normal matrix is block diagonal.
    Two-by-two blocks give the rotation planes; 1x1 (zero) blocks are paired
    up in order of appearance. Blocks are sorted by descending ``lam`` with
    ties resolved by the position of the block in the Schur output.
    """
    a = as_skew(a)
    dim = a.shape[0]
    if dim == 0:
        return CanonicalForm(np.zeros((0, 0)), np.zeros(0))
    s, z = scipy.linalg.schur(a, output="real")

    planes = []  # (lam, first_col, second_col)
    singles = []
    i = 0
    while i < dim:
        if i + 1 < dim and s[i + 1, i] != 0.0:
            lam = 0.5 * (s[i, i + 1] - s[i + 1, i])
            if lam >= 0:
                planes.append((lam, i, i + 1))
            else:
                planes.append((-lam, i + 1, i))
            i += 2
        else:
            singles.append(i)
            i += 1
    for p, q in zip(singles[0::2], singles[1::2]):
        planes.append((0.0, p, q))

    planes.sort(key=lambda blk: (-blk[0], min(blk[1], blk[2])))
    w = np.empty((dim, dim))
    lambdas = np.empty(dim // 2)
    for j, (lam, p, q) in enumerate(planes):
        w[2 * j] = z[:, p]
        w[2 * j + 1] = z[:, q]
        lambdas[j] = lam
    return CanonicalForm(w, lambdas)


def _rotation(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def skew_exp(a, t: float = 1.0) -> np.ndarray:
    """Return ``exp(-a * t)`` for real skew-symmetric ``a``.

    Computed as ``W^T BlockRot(lam_j t) W`` where ``BlockRot(x)`` is
    ``[[cos x, -sin x], [sin x, cos x]]``. The result is orthogonal with
    determinant +1.
    """
    form = canonical_decompose(a)
    rot = block_matrix(form.lambdas * t, _rotation)
    return form.w.T @ rot @ form.w


def _as_complex_skew(m) -> np.ndarray:
    m = np.asarray(m)
    if m.ndim < 2 or m.shape[-1] != m.shape[-2]:
        raise ValueError(f"expected square matrices, got shape {m.shape}")
    if m.shape[-1] % 2:
        raise ValueError(f"Pfaffian needs an even dimension, got {m.shape[-1]}")
    return np.array(m, dtype=complex)


def pfaffian(m, zero_tol: float = PFAFFIAN_ZERO_TOL):
    """Pfaffian of a complex skew-symmetric matrix (or a stack of them).

    Skew-symmetric Gaussian elimination to tridiagonal form (Parlett-Reid).
    At step ``k`` the largest-magnitude entry of column ``k`` below the
    diagonal is pivoted into row ``k+1``; each interchange flips the sign.
    The Pfaffian is the product of the super-diagonal entries
    ``A[k, k+1]`` for even ``k`` times the accumulated sign. If the whole
    column below the pivot position is smaller than ``zero_tol`` the result
    is exactly zero.

    Only the strict upper triangle of the input is trusted when the input is
    not exactly antisymmetric; callers should pass antisymmetric data.

    Parameters
    ----------
    m : array_like, shape (..., 2K, 2K)
    zero_tol : float
        Absolute threshold below which a pivot column counts as zero.

    Returns
    -------
    complex or ndarray of complex
        One value per matrix; a Python ``complex`` for 2-D input.
    """
    a = _as_complex_skew(m)
    single = a.ndim == 2
    batch_shape = a.shape[:-2]
    n = a.shape[-1]
    if single and n > _BLOCKED_MIN_DIM:
        return _pfaffian_blocked(a, zero_tol)
    a = a.reshape((int(np.prod(batch_shape, dtype=int)), n, n))
    values = _pfaffian_stack(a, zero_tol)
    if single:
        return complex(values[0])
    return values.reshape(batch_shape)


_BLOCKED_MIN_DIM = 96
_PANEL = 64


def _pfaffian_blocked(a: np.ndarray, zero_tol: float, panel: int = _PANEL) -> complex:
    """Same elimination as :func:`_pfaffian_stack`, with delayed updates.

    The rank-2 updates of up to ``panel`` consecutive steps are kept as
    vector pairs ``(u, v)`` and applied to the trailing block in a single
    matrix product. Columns needed in between are corrected on the fly.
    """
    n = a.shape[0]
    us = np.zeros((n, panel), dtype=complex)
    vs = np.zeros((n, panel), dtype=complex)
    pending = 0
    result = 1.0 + 0.0j
    for k in range(0, n - 1, 2):
        u, v = us[:, :pending], vs[:, :pending]
        colk = a[k + 1 :, k] + u[k + 1 :] @ v[k] - v[k + 1 :] @ u[k]
        offset = int(np.argmax(np.abs(colk)))
        if abs(colk[offset]) < zero_tol:
            return 0j
        kp = k + 1 + offset
        if kp != k + 1:
            a[[k + 1, kp], k:] = a[[kp, k + 1], k:]
            a[k:, [k + 1, kp]] = a[k:, [kp, k + 1]]
            us[[k + 1, kp]] = us[[kp, k + 1]]
            vs[[k + 1, kp]] = vs[[kp, k + 1]]
            colk[[0, offset]] = colk[[offset, 0]]
            result = -result
        # row k equals minus column k
        pivot = -colk[0]
        result *= pivot
        if k + 2 >= n:
            break
        tau = colk[1:] / -pivot
        col = a[k + 2 :, k + 1] + u[k + 2 :] @ v[k + 1] - v[k + 2 :] @ u[k + 1]
        us[:, pending] = 0.0
        vs[:, pending] = 0.0
        us[k + 2 :, pending] = tau
        vs[k + 2 :, pending] = col
        pending += 1
        if pending == panel or k + 4 >= n:
            s = k + 2
            left = np.hstack([us[s:, :pending], -vs[s:, :pending]])
            right = np.hstack([vs[s:, :pending], us[s:, :pending]])
            a[s:, s:] += left @ right.T
            pending = 0
    return complex(result)


def _pfaffian_stack(a: np.ndarray, zero_tol: float) -> np.ndarray:
    # a is (B, n, n) complex and is overwritten.
    nb, n, _ = a.shape
    result = np.ones(nb, dtype=complex)
    if n == 0:
        return result
    live = np.ones(nb, dtype=bool)
    rows = np.arange(nb)
    for k in range(0, n - 1, 2):
        below = np.abs(a[:, k + 1 :, k])
        offset = np.argmax(below, axis=1)
        dead = below[rows, offset] < zero_tol
        if dead.any():
            live &= ~dead
            if not live.any():
                break
        kp = k + 1 + offset
        swap = live & (kp != k + 1)
        if swap.any():
            s = rows[swap]
            p = kp[swap]
            tmp = a[s, k + 1, k:].copy()
            a[s, k + 1, k:] = a[s, p, k:]
            a[s, p, k:] = tmp
            tmp = a[s, k:, k + 1].copy()
            a[s, k:, k + 1] = a[s, k:, p]
            a[s, k:, p] = tmp
            result[s] = -result[s]
        pivot = np.where(live, a[:, k, k + 1], 1.0)
        result *= pivot
        if k + 2 < n:
            tau = a[:, k, k + 2 :] / pivot[:, None]
            col = a[:, k + 2 :, k + 1]
            left = np.stack([tau, -col], axis=2)
            right = np.stack([col, tau], axis=1)
            a[:, k + 2 :, k + 2 :] += left @ right
    result[~live] = 0.0
    return result


def _matching_sign(pairs) -> int:
    perm = [v for pair in pairs for v in pair]
    inversions = sum(
        1 for i in range(len(perm)) for j in range(i + 1, len(perm)) if perm[i] > perm[j]
    )
    return -1 if inversions % 2 else 1


def _perfect_matchings(items):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for idx, partner in enumerate(rest):
        remaining = rest[:idx] + rest[idx + 1 :]
        for tail in _perfect_matchings(remaining):
            yield [(first, partner)] + tail


def pfaffian_matching_oracle(m) -> complex:
    """Pfaffian by definition: signed sum over all perfect matchings.

    Test oracle only; the cost is ``(2K-1)!!`` so dimension is capped at 12.
    """
    a = _as_complex_skew(m)
    if a.ndim != 2:
        raise ValueError("oracle takes a single matrix")
    n = a.shape[0]
    if n > 12:
        raise ValueError(f"matching oracle is limited to dimension 12, got {n}")
    total = 0j
    for pairs in _perfect_matchings(list(range(n))):
        term = complex(_matching_sign(pairs))
        for i, j in pairs:
            term *= a[i, j]
        total += term
    return total

