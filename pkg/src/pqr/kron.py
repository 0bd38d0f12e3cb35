"""Kronecker-product primitives.

Layout convention, fixed across the whole package:

* ``vec`` stacks matrix columns, so entry ``(i, j)`` of an ``r x c`` matrix
  lands at position ``i + j*r`` of the vector (0-based).
* A :class:`ModeVector` with mode dimensions ``(m1, ..., md)`` stores the
  entry at multi-index ``(i1, ..., id)`` at linear position
  ``i1*m2*...*md + ... + id``:  mode 1 varies slowest, mode d fastest.
  This is exactly the layout of ``(X1 kron ... kron Xd) v`` and of the
  monomials ``x kron x kron ... kron x``, and it coincides with a C-order
  reshape of the flat data into an ``(m1, ..., md)`` ndarray.

Structured products never assemble Kronecker factors: a factor acting on
one mode is applied as a strided batch of matrix multiplications, grouped
so that the free identity block is as large as possible.

Any operation whose output would exceed the configurable entry budget
raises :class:`~pqr.errors.MemoryGuardError` instead of allocating.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import prod

import numpy as np

from .errors import DimensionMismatchError, MemoryGuardError

DEFAULT_ENTRY_BUDGET = 500_000_000

_entry_budget = DEFAULT_ENTRY_BUDGET


def entry_budget() -> int:
    """Current memory-guard budget, in scalar entries."""
    return _entry_budget


def set_entry_budget(budget: int) -> None:
    """Set the memory-guard budget (number of scalar entries)."""
    global _entry_budget
    budget = int(budget)
    if budget <= 0:
        raise ValueError("entry budget must be positive")
    _entry_budget = budget


def guard_entries(count: int, what: str) -> None:
    """Fail loudly before allocating ``count`` entries past the budget."""
    if count > _entry_budget:
        raise MemoryGuardError(
            f"{what} needs {count} entries, over the configured budget of "
            f"{_entry_budget}; raise it with set_entry_budget / --memory-budget"
        )


@dataclass(frozen=True)
class ModeVector:
    """Flat vector with tensor mode structure (mode 1 slowest).

    Attributes
    ----------
    dims : tuple of int
        Dimension of each mode.
    data : ndarray
        1-D array of length ``prod(dims)``.
    """

    dims: tuple
    data: np.ndarray

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims or any(d < 1 for d in dims):
            raise DimensionMismatchError(f"invalid mode dims {self.dims}")
        data = np.asarray(self.data)
        if data.ndim != 1:
            raise DimensionMismatchError("ModeVector data must be 1-D")
        if data.size != prod(dims):
            raise DimensionMismatchError(
                f"data length {data.size} does not match mode dims {dims}"
            )
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "data", data)

    @property
    def size(self) -> int:
        return self.data.size

    def tensor(self) -> np.ndarray:
        """View the data as an ndarray with one axis per mode."""
        return self.data.reshape(self.dims)


def _is_identity(X: np.ndarray) -> bool:
    r, c = X.shape
    return r == c and np.array_equal(X, np.eye(r, dtype=X.dtype))


def kron_dense(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Explicit Kronecker product, the block matrix with (i,j) block x_ij*Y.

    Intended for small-scale oracle work; structured code paths use
    :func:`kron_apply` instead.
    """
    X = np.asarray(X)
    Y = np.asarray(Y)
    if X.ndim != 2 or Y.ndim != 2:
        raise DimensionMismatchError("kron_dense expects two matrices")
    rx, cx = X.shape
    ry, cy = Y.shape
    guard_entries(rx * ry * cx * cy, "kron_dense output")
    return np.einsum("ij,kl->ikjl", X, Y).reshape(rx * ry, cx * cy)


def vec(M: np.ndarray) -> np.ndarray:
    """Stack the columns of ``M`` into one vector."""
    M = np.asarray(M)
    if M.ndim != 2:
        raise DimensionMismatchError("vec expects a matrix")
    return M.reshape(-1, order="F").copy()


def unvec(v: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """Inverse of :func:`vec`: reshape a vector into a rows x cols matrix."""
    v = np.asarray(v)
    if v.ndim != 1 or v.size != rows * cols:
        raise DimensionMismatchError(
            f"unvec: length {v.size} incompatible with {rows}x{cols}"
        )
    return v.reshape((rows, cols), order="F").copy()


def monomial(x: np.ndarray, d: int) -> ModeVector:
    """d-fold tensor power of a state vector, ``x kron ... kron x``."""
    x = np.asarray(x, dtype=float).reshape(-1)
    n = x.size
    if d < 1:
        raise DimensionMismatchError("monomial degree must be >= 1")
    guard_entries(n**d, "monomial output")
    out = x
    for _ in range(d - 1):
        out = (out[:, None] * x[None, :]).reshape(-1)
    return ModeVector((n,) * d, out)


def _apply_on_mode(X: np.ndarray, data: np.ndarray, dims: tuple, pos: int):
    """Multiply ``X`` onto mode ``pos`` of a flat mode-ordered vector.

    Grouped as ``(I_left kron (X kron I_right))`` so the whole position is
    one batched GEMM; the edge positions need no data movement at all.
    """
    left = prod(dims[:pos])
    mid = dims[pos]
    right = prod(dims[pos + 1 :])
    r = X.shape[0]
    guard_entries(left * r * right, "structured Kronecker apply")
    if left == 1:
        out = X @ data.reshape(mid, right)
    elif right == 1:
        out = data.reshape(left, mid) @ X.T
    else:
        batched = np.ascontiguousarray(
            data.reshape(left, mid, right).transpose(1, 0, 2)
        ).reshape(mid, left * right)
        out = (X @ batched).reshape(r, left, right).transpose(1, 0, 2)
    new_dims = dims[:pos] + (r,) + dims[pos + 1 :]
    return np.ascontiguousarray(out).reshape(-1), new_dims


def kron_apply(factors, v: ModeVector) -> ModeVector:
    """Apply ``(X1 kron ... kron Xd)`` to ``v`` without assembling it.

    Parameters
    ----------
    factors : sequence of ndarray
        One matrix per mode of ``v``; factor ``i`` must have ``v.dims[i]``
        columns.  Exact identity factors are skipped.
    v : ModeVector

    Returns
    -------
    ModeVector with mode dims equal to the factors' row counts.
    """
    factors = [np.asarray(X) for X in factors]
    if len(factors) != len(v.dims):
        raise DimensionMismatchError(
            f"{len(factors)} factors for {len(v.dims)} modes"
        )
    data = v.data
    dims = v.dims
    for pos, X in enumerate(factors):
        if X.ndim != 2:
            raise DimensionMismatchError("factors must be matrices")
        if X.shape[1] != dims[pos]:
            raise DimensionMismatchError(
                f"factor {pos} has {X.shape[1]} columns, mode has size {dims[pos]}"
            )
        if _is_identity(X):
            continue
        data, dims = _apply_on_mode(X, data, dims, pos)
    return ModeVector(dims, data)


def lyap_sum_apply(X: np.ndarray, d: int, v: ModeVector) -> ModeVector:
    """Apply the d-way Kronecker-sum (N-way Lyapunov) operator of ``X``.

    Computes ``sum_pos (I kron ... kron X kron ... kron I) v`` with one
    mode-wise multiplication per position.  ``X`` may be tall with
    ``rows = cols**k``; the mode at the insertion position is then expanded
    in place into ``k`` modes, so every position term shares the same flat
    layout and the sum is well defined.
    """
    X = np.asarray(X)
    if X.ndim != 2:
        raise DimensionMismatchError("lyap_sum_apply expects a matrix")
    r, c = X.shape
    if v.dims != (c,) * d:
        raise DimensionMismatchError(
            f"operand must have {d} modes of size {c}, got {v.dims}"
        )
    if r == c:
        k = 1
    else:
        if c < 2:
            raise DimensionMismatchError(
                f"non-square factor {r}x{c} is not a power expansion"
            )
        k = round(np.log(r) / np.log(c))
        if c**k != r:
            raise DimensionMismatchError(
                f"factor rows {r} is not an integer power of cols {c}"
            )
    out_dims = (c,) * (d - 1 + k)
    guard_entries(prod(out_dims), "lyap_sum_apply output")
    out = None
    for pos in range(d):
        term, _ = _apply_on_mode(X, v.data, v.dims, pos)
        if out is None:
            out = term
        else:
            out += term
    return ModeVector(out_dims, out)
