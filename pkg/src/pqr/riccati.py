"""Continuous algebraic Riccati equation: quadratic value term and linear gain.

Solves ``A'V + VA - VBR^{-1}B'V + Q = 0`` by extracting the stable
invariant subspace of the Hamiltonian matrix from its eigenvectors, then
polishing with Newton iterations (each one a Lyapunov solve) until the
residual contract holds.  The gain is ``K1 = -R^{-1}B'V``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    DimensionMismatchError,
    RefinementStagnationError,
    UnstabilizablePairError,
)
from .nway import lyap2_solve

MAX_NEWTON_STEPS = 10
SUBSPACE_RANK_TOL = 1e-10
X11_COND_LIMIT = 1e12


@dataclass(frozen=True)
class AreSolution:
    """Stabilizing Riccati solution.

    ``V2`` is symmetric positive semidefinite, ``A + B @ K1`` is stable and
    ``residual_norm`` is the Frobenius norm of the Riccati residual.
    ``newton_residuals`` records the residual after each accepted
    refinement step (non-increasing).
    """

    V2: np.ndarray
    K1: np.ndarray
    residual_norm: float
    newton_residuals: tuple

    def __post_init__(self):
        V2 = np.asarray(self.V2, dtype=float)
        object.__setattr__(self, "V2", (V2 + V2.T) / 2.0)
        object.__setattr__(self, "K1", np.asarray(self.K1, dtype=float))


def _check_weights(Q, R):
    for name, M in (("Q", Q), ("R", R)):
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise DimensionMismatchError(f"{name} must be square")
        if np.linalg.norm(M - M.T) > 1e-10 * max(np.linalg.norm(M), 1.0):
            raise ValueError(f"{name} must be symmetric")
    eq = np.linalg.eigvalsh(Q)
    if eq.size and eq[0] < -1e-10 * max(1.0, abs(eq[-1])):
        raise ValueError("Q must be positive semidefinite")
    er = np.linalg.eigvalsh(R)
    if er[0] <= 0.0:
        raise ValueError("R must be positive definite")


def care_residual(A, B, Q, R, V) -> float:
    """Frobenius norm of ``A'V + VA - VBR^{-1}B'V + Q``."""
    A = np.asarray(A, float)
    B = np.asarray(B, float)
    Q = np.asarray(Q, float)
    R = np.asarray(R, float)
    V = np.asarray(V, float)
    rf = scipy.linalg.cho_factor(R)
    res = A.T @ V + V @ A - V @ B @ scipy.linalg.cho_solve(rf, B.T @ V) + Q
    return float(np.linalg.norm(res))


def care_solve(A, B, Q, R) -> AreSolution:
    """Solve the continuous ARE and return the stabilizing (V2, K1) pair.

    Raises
    ------
    UnstabilizablePairError
        If the Hamiltonian stable subspace is defective (dimension != n,
        rank-deficient eigenvector set, or ill-conditioned X11 block).
    RefinementStagnationError
        If Newton refinement cannot reach the residual target.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    Q = np.asarray(Q, dtype=float)
    R = np.asarray(R, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise DimensionMismatchError("A must be square")
    if B.ndim != 2 or B.shape[0] != n:
        raise DimensionMismatchError("B must be n x m")
    m = B.shape[1]
    if Q.shape != (n, n) or R.shape != (m, m):
        raise DimensionMismatchError("weight shapes inconsistent with A, B")
    _check_weights(Q, R)

    rf = scipy.linalg.cho_factor(R)
    BRinvBT = B @ scipy.linalg.cho_solve(rf, B.T)
    H = np.block([[A, -BRinvBT], [-Q, -A.T]])
    lam, W = scipy.linalg.eig(H)
    stable = lam.real < 0.0
    n_stable = int(np.count_nonzero(stable))
    if n_stable != n:
        raise UnstabilizablePairError(
            f"unstabilizable pair: Hamiltonian stable subspace has dimension "
            f"{n_stable}, expected {n}"
        )
    X = W[:, stable]
    sv = np.linalg.svd(X, compute_uv=False)
    if sv[-1] < SUBSPACE_RANK_TOL * sv[0]:
        raise UnstabilizablePairError(
            "unstabilizable pair: stable eigenvector set is rank deficient"
        )
    X11 = X[:n, :]
    X21 = X[n:, :]
    sv11 = np.linalg.svd(X11, compute_uv=False)
    if sv11[-1] <= 0.0 or sv11[0] / sv11[-1] > X11_COND_LIMIT:
        raise UnstabilizablePairError(
            "unstabilizable pair: X11 block of the stable subspace is singular"
        )
    V = np.linalg.solve(X11.T, X21.T).T
    V = np.real((V + V.conj().T) / 2.0)

    target = 1e-9 * max(1.0, float(np.linalg.norm(Q)))
    res = care_residual(A, B, Q, R, V)
    accepted = [res]
    for _ in range(MAX_NEWTON_STEPS):
        if res <= target:
            break
        K = -scipy.linalg.cho_solve(rf, B.T @ V)
        C = Q + V @ BRinvBT @ V
        C = (C + C.T) / 2.0  # exact in theory; rounding breaks it at scale
        V_new = lyap2_solve(A + B @ K, C)
        res_new = care_residual(A, B, Q, R, V_new)
        if res_new >= res:
            break
        V, res = V_new, res_new
        accepted.append(res)
    if res > target:
        raise RefinementStagnationError(
            f"refinement stagnation: residual {res:.3e} above target {target:.3e}"
        )

    K1 = -scipy.linalg.cho_solve(rf, B.T @ V)
    eig_v = np.linalg.eigvalsh(V)
    if eig_v.size and eig_v[0] < -1e-10 * max(abs(eig_v[-1]), 1e-300):
        raise UnstabilizablePairError(
            f"Riccati solution not positive semidefinite (min eig {eig_v[0]:.3e})"
        )
    cl = np.linalg.eigvals(A + B @ K1)
    if cl.real.max() >= 0.0:
        raise UnstabilizablePairError(
            f"closed loop not stable (max Re eig {cl.real.max():.3e})"
        )
    return AreSolution(V2=V, K1=K1, residual_norm=res, newton_residuals=tuple(accepted))
