"""Sequence-space primitives on finite truncations of l^1 / l^inf.

Sequences are plain one-dimensional float arrays.  Indices ``n`` follow the
1-based cut-off convention: ``project(n, x)`` keeps entries ``1..n``.
"""
from __future__ import annotations

import enum
import math

import numpy as np

from .exceptions import ArgumentError


class Norm(str, enum.Enum):
    L1 = "L1"
    L2 = "L2"
    LINF = "LInf"


def as_seq(x, name="x"):
    """Validate ``x`` as a finite, nonempty 1-d sequence and return a float copy."""
    arr = np.array(x, dtype=float)
    if arr.ndim != 1:
        raise ArgumentError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size < 1:
        raise ArgumentError(f"{name} must have at least one entry")
    if not np.all(np.isfinite(arr)):
        raise ArgumentError(f"{name} contains non-finite entries")
    return arr


def norm(x, which=Norm.L1):
    """l^1, l^2 or l^inf norm of ``x``.

    Sums use :func:`math.fsum`, so results do not depend on summation order.
    """
    x = np.asarray(x, dtype=float)
    which = Norm(which)
    if which is Norm.L1:
        return math.fsum(np.abs(x))
    if which is Norm.L2:
        if x.size == 0:
            return 0.0
        scale = float(np.max(np.abs(x)))
        if scale == 0.0:
            return 0.0
        return scale * math.sqrt(math.fsum((x / scale) ** 2))
    return float(np.max(np.abs(x))) if x.size else 0.0


def _check_cutoff(n, length, lower):
    if isinstance(n, bool) or int(n) != n:
        raise ArgumentError(f"cut-off index must be an integer, got {n!r}")
    n = int(n)
    if not lower <= n <= length:
        raise ArgumentError(f"cut-off index {n} outside [{lower}, {length}]")
    return n


def project(n, x):
    """Cut-off projector ``P_n``: keep entries 1..n, zero the rest."""
    x = np.asarray(x, dtype=float)
    n = _check_cutoff(n, x.size, 1)
    out = np.zeros_like(x)
    out[:n] = x[:n]
    return out


def complement(n, x):
    """``(I - P_n) x``: zero entries 1..n, keep the rest."""
    x = np.asarray(x, dtype=float)
    n = _check_cutoff(n, x.size, 1)
    out = x.copy()
    out[:n] = 0.0
    return out


def tail_sum(x, n):
    """``sum_{k>n} |x_k|`` for ``0 <= n <= len(x)``."""
    x = np.asarray(x, dtype=float)
    n = _check_cutoff(n, x.size, 0)
    return math.fsum(np.abs(x[n:]))


def tail_sums(x):
    """All tail sums ``tail_sum(x, n)`` for ``n = 0..len(x)`` in one pass.

    Accumulated right to left with exact rounding per entry so that the
    result agrees with :func:`tail_sum` to the last bit.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty(x.size + 1)
    out[x.size] = 0.0
    for n in range(x.size - 1, -1, -1):
        out[n] = math.fsum(np.abs(x[n:]))
    return out


def sign_pattern_of(x, n):
    """Sign pattern of ``P_n x`` as an int array with the length of ``x``."""
    x = np.asarray(x, dtype=float)
    n = _check_cutoff(n, x.size, 0)
    out = np.zeros(x.size, dtype=int)
    out[:n] = np.sign(x[:n]).astype(int)
    return out


def validate_sign_pattern(xi, n, length=None):
    """Return the first ``n`` entries of a sign pattern after checking it.

    ``xi`` may have length ``n`` or a longer length whose entries beyond ``n``
    must vanish.
    """
    arr = np.asarray(xi)
    if arr.ndim != 1 or arr.size < n:
        raise ArgumentError(f"sign pattern must be 1-d with at least {n} entries")
    if length is not None and arr.size not in (n, length):
        raise ArgumentError(f"sign pattern length {arr.size} matches neither n={n} nor N={length}")
    if not np.all(np.isin(arr, (-1, 0, 1))):
        raise ArgumentError("sign pattern entries must lie in {-1, 0, +1}")
    if np.any(arr[n:] != 0):
        raise ArgumentError(f"sign pattern has nonzero entries beyond index {n}")
    return arr[:n].astype(int)
