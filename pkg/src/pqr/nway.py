"""Schur decomposition and the N-way triangular Kronecker-sum solver.

``nway_solve`` solves ``L_d(A) v = b`` where ``L_d`` is the d-way
Kronecker sum of ``A``: the operator is transformed with the unitary
Schur factor mode by mode, the resulting upper-triangular system is
solved by backward substitution over linear indices, and the solution is
transformed back.  This generalizes the classical two-sided
Schur-transform-then-substitute approach for Sylvester and Lyapunov
equations to any number of modes.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from numba import njit

from .errors import (
    DimensionMismatchError,
    EigenvalueSumError,
    NonRealSolutionError,
    SchurConvergenceError,
)
from .kron import ModeVector, guard_entries, kron_apply, unvec, vec

PIVOT_FLOOR_REL = 1e-12


@dataclass(frozen=True)
class SchurForm:
    """Complex Schur factorization ``A = U T U*`` of a real matrix.

    ``U`` is unitary, ``T`` upper triangular with the eigenvalues of ``A``
    on its diagonal.  ``source_hash`` identifies the decomposed matrix so
    cached forms are not mixed up across systems.
    """

    U: np.ndarray
    T: np.ndarray
    source_hash: str

    @property
    def n(self) -> int:
        return self.T.shape[0]

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.diag(self.T)


def _matrix_hash(A: np.ndarray) -> str:
    h = hashlib.sha256()
    h.update(str(A.shape).encode())
    h.update(np.ascontiguousarray(A).tobytes())
    return h.hexdigest()[:16]


def schur_decompose(A: np.ndarray) -> SchurForm:
    """Complex Schur form of a real square matrix.

    Raises
    ------
    SchurConvergenceError
        If the underlying QR iteration fails to converge or the computed
        factors violate the reconstruction/unitarity contracts.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatchError("schur_decompose expects a square matrix")
    if not np.all(np.isfinite(A)):
        raise ValueError("schur_decompose requires finite entries")
    try:
        T, U = scipy.linalg.schur(A, output="complex")
    except scipy.linalg.LinAlgError as exc:  # QR iteration cap exceeded
        raise SchurConvergenceError(str(exc)) from exc
    T = np.ascontiguousarray(T, dtype=np.complex128)
    U = np.ascontiguousarray(U, dtype=np.complex128)
    n = A.shape[0]
    norm_a = np.linalg.norm(A)
    recon = np.linalg.norm(A - U @ T @ U.conj().T)
    if recon > 1e-10 * max(norm_a, 1e-300):
        raise SchurConvergenceError(
            f"Schur reconstruction residual {recon:.3e} exceeds contract"
        )
    unit = np.linalg.norm(U.conj().T @ U - np.eye(n))
    if unit > 1e-12:
        raise SchurConvergenceError(f"Schur factor not unitary: {unit:.3e}")
    return SchurForm(U=U, T=T, source_hash=_matrix_hash(A))


@njit(cache=True)
def _kronsum_backsub(T, b, d, pivot_floor):  # pragma: no cover - jitted
    """Backward substitution for the upper-triangular d-way Kronecker sum.

    Walks linear indices from last to first.  For row ``q`` with mode
    digits ``(i_1, ..., i_d)`` the pivot is ``T[i_1,i_1]+...+T[i_d,i_d]``
    and the couplings come from the strictly-upper entries of ``T`` in
    each mode, reached through strided access.  Returns the solution, the
    number of scalar multiply-adds, the smallest pivot magnitude seen and
    the failing index (-1 on success).
    """
    n = T.shape[0]
    N = b.shape[0]
    v = np.zeros(N, dtype=np.complex128)
    ops = 0
    min_pivot = 1.0e300
    for q in range(N - 1, -1, -1):
        acc = b[q]
        pivot = 0.0 + 0.0j
        stride = 1
        for _ in range(d):
            i = (q // stride) % n
            pivot += T[i, i]
            for j in range(i + 1, n):
                acc -= T[i, j] * v[q + (j - i) * stride]
                ops += 1
            stride *= n
        mag = abs(pivot)
        if mag < min_pivot:
            min_pivot = mag
        if mag < pivot_floor:
            return v, ops, min_pivot, q
        v[q] = acc / pivot
    return v, ops, min_pivot, -1


def nway_solve(sf: SchurForm, d: int, b: ModeVector, stats: dict | None = None) -> ModeVector:
    """Solve ``L_d(A) v = b`` given the Schur form of ``A``.

    Parameters
    ----------
    sf : SchurForm
    d : int
        Number of modes; ``b`` must have ``d`` modes of size ``sf.n``.
    b : ModeVector
    stats : dict, optional
        If given, filled with ``ops`` (scalar multiply-adds in the
        substitution), ``op_bound`` (the ``4*d*n**(d+1)`` contract),
        ``min_pivot`` and ``pivot_floor``.

    Raises
    ------
    EigenvalueSumError
        If some d-tuple of eigenvalues sums to (numerically) zero.
    NonRealSolutionError
        If the input is real but the back-transformed solution is not.
    """
    n = sf.n
    if d < 1:
        raise DimensionMismatchError("d must be >= 1")
    if b.dims != (n,) * d:
        raise DimensionMismatchError(
            f"rhs must have {d} modes of size {n}, got {b.dims}"
        )
    guard_entries(n**d, "nway_solve buffers")
    real_input = not np.iscomplexobj(b.data)

    Ustar = np.ascontiguousarray(sf.U.conj().T)
    bt = kron_apply([Ustar] * d, b)
    bt_data = np.ascontiguousarray(bt.data, dtype=np.complex128)

    pivot_floor = max(PIVOT_FLOOR_REL * np.linalg.norm(sf.T), 1e-300)
    vt, ops, min_pivot, fail = _kronsum_backsub(sf.T, bt_data, d, pivot_floor)
    if fail >= 0:
        raise EigenvalueSumError(
            f"eigenvalue-sum near zero at linear index {fail}: "
            f"|pivot| = {min_pivot:.3e} < {pivot_floor:.3e}"
        )
    if stats is not None:
        stats["ops"] = int(ops)
        stats["op_bound"] = 4 * d * n ** (d + 1)
        stats["min_pivot"] = float(min_pivot)
        stats["pivot_floor"] = float(pivot_floor)

    out = kron_apply([sf.U] * d, ModeVector(b.dims, vt))
    if real_input:
        norm_all = np.linalg.norm(out.data)
        norm_imag = np.linalg.norm(out.data.imag)
        if norm_imag > 1e-9 * max(norm_all, 1e-300):
            raise NonRealSolutionError(
                f"imaginary residual {norm_imag:.3e} on a real system "
                f"(|v| = {norm_all:.3e})"
            )
        return ModeVector(b.dims, np.ascontiguousarray(out.data.real))
    return out


def lyap2_solve(A: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Solve the classical Lyapunov equation ``A' V + V A + C = 0``.

    This is the two-mode case of :func:`nway_solve` applied to ``A'``;
    the output is symmetrized.  ``A`` must be stable and ``C`` symmetric.
    """
    A = np.asarray(A, dtype=float)
    C = np.asarray(C, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n) or C.shape != (n, n):
        raise DimensionMismatchError("lyap2_solve expects square matrices of equal size")
    if np.linalg.norm(C - C.T) > 1e-10 * max(np.linalg.norm(C), 1.0):
        raise DimensionMismatchError("lyap2_solve requires symmetric C")
    sf = schur_decompose(A.T)
    w = nway_solve(sf, 2, ModeVector((n, n), vec(-C)))
    V = unvec(w.data, n, n)
    return (V + V.T) / 2.0
