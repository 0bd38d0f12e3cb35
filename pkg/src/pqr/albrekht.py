"""Degree-by-degree power-series solution of the polynomial-quadratic regulator.

The regulator problem: minimize the infinite-horizon quadratic running cost
``x'Qx + u'Ru`` subject to ``xdot = A x + B u + f(x)`` with a polynomial
drift ``f(x) = N_2 (x kron x) + ... + N_p (x kron ... kron x)``.

The value function ``v(x) = v_2'(x kron x) + v_3'(x kron x kron x) + ...``
and feedback ``u = K(x) = k_1 x + k_2 (x kron x) + ...`` are built degree by
degree:

* ``v_2`` and ``k_1`` come from the Riccati equation (the linear-quadratic
  special case).
* For each degree ``d >= 2``, matching terms of degree ``d+1`` in the
  dynamic-programming PDE gives a Kronecker-sum system
  ``L_{d+1}(A_c') v_{d+1} = c`` with ``A_c = A + B k_1``.  The right-hand
  side ``c`` collects interactions of lower-degree coefficients; the
  simultaneous unknown ``k_d`` cancels out exactly (its contribution
  ``v_2'((B k_d) kron I) + r_2'(k_d kron k_1)`` vanishes by the gain
  identity), so ``v_{d+1}`` and ``k_d`` decouple.
* ``k_d`` then follows from ``v_{d+1}`` by contracting each mode with
  ``B'`` and scaling by ``-1/2 R^{-1}``.

All products are computed mode-wise without assembling Kronecker factors,
and a single Schur decomposition of ``A_c'`` is reused across degrees.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DimensionMismatchError, MissingCoefficientError
from .kron import ModeVector, guard_entries, lyap_sum_apply, vec
from .nway import nway_solve, schur_decompose
from .riccati import care_solve


@dataclass(frozen=True)
class PolynomialSystem:
    """State equation ``xdot = A x + B u + f(x)`` with polynomial drift.

    ``N`` maps degree ``k`` to the coefficient matrix ``N_k`` of shape
    ``n x n**k``; degrees absent from the map are zero.
    """

    A: np.ndarray
    B: np.ndarray
    N: dict = field(default_factory=dict)

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        B = np.asarray(self.B, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise DimensionMismatchError("A must be square")
        n = A.shape[0]
        if B.ndim != 2 or B.shape[0] != n:
            raise DimensionMismatchError("B must be n x m")
        N = {}
        for k, mat in dict(self.N).items():
            k = int(k)
            if k < 2:
                raise DimensionMismatchError("nonlinear degrees start at 2")
            mat = np.asarray(mat, dtype=float)
            if mat.shape != (n, n**k):
                raise DimensionMismatchError(
                    f"N_{k} must be {n} x {n**k}, got {mat.shape}"
                )
            N[k] = mat
        for name, mat in (("A", A), ("B", B), *((f"N_{k}", m) for k, m in N.items())):
            if not np.all(np.isfinite(mat)):
                raise ValueError(f"{name} has non-finite entries")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "N", N)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        """Degree of the drift polynomial (1 when there is no nonlinearity)."""
        return max(self.N.keys(), default=1)

    def f(self, x: np.ndarray) -> np.ndarray:
        """Nonlinear part of the drift at state ``x``."""
        x = np.asarray(x, dtype=float).reshape(-1)
        out = np.zeros(self.n)
        mono = x
        for k in range(2, self.p + 1):
            mono = (mono[:, None] * x[None, :]).reshape(-1)
            if k in self.N:
                out += self.N[k] @ mono
        return out

    def drift(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Full right-hand side ``A x + B u + f(x)``."""
        x = np.asarray(x, dtype=float).reshape(-1)
        u = np.asarray(u, dtype=float).reshape(-1)
        return self.A @ x + self.B @ u + self.f(x)


@dataclass(frozen=True)
class QuadraticCost:
    """Running cost ``x'Qx + u'Ru`` with Q symmetric PSD, R symmetric PD."""

    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        R = np.asarray(self.R, dtype=float)
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
        object.__setattr__(self, "Q", (Q + Q.T) / 2.0)
        object.__setattr__(self, "R", (R + R.T) / 2.0)

    @property
    def q2(self) -> np.ndarray:
        return vec(self.Q)

    @property
    def r2(self) -> np.ndarray:
        return vec(self.R)

    def running_cost(self, x: np.ndarray, u: np.ndarray) -> float:
        x = np.asarray(x, dtype=float).reshape(-1)
        u = np.asarray(u, dtype=float).reshape(-1)
        return float(x @ self.Q @ x + u @ self.R @ u)


@dataclass(frozen=True)
class ValueFunction:
    """Polynomial value function: degree k maps to the flat coefficient v_k."""

    n: int
    coefficients: dict

    def __post_init__(self):
        coeffs = {}
        for k, vk in dict(self.coefficients).items():
            k = int(k)
            vk = np.asarray(vk, dtype=float).reshape(-1)
            if k < 2 or vk.size != self.n**k:
                raise DimensionMismatchError(f"v_{k} must have length n**{k}")
            if not np.all(np.isfinite(vk)):
                raise ValueError(f"v_{k} has non-finite entries")
            coeffs[k] = vk
        if 2 in coeffs:
            V2 = coeffs[2].reshape(self.n, self.n)
            if np.linalg.norm(V2 - V2.T) > 1e-8 * max(np.linalg.norm(V2), 1.0):
                raise ValueError("v_2 must unfold to a symmetric matrix")
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def max_degree(self) -> int:
        return max(self.coefficients.keys(), default=1)


@dataclass(frozen=True)
class FeedbackLaw:
    """Polynomial feedback: degree j maps to the m x n**j gain k_j."""

    n: int
    m: int
    coefficients: dict

    def __post_init__(self):
        coeffs = {}
        for j, kj in dict(self.coefficients).items():
            j = int(j)
            kj = np.asarray(kj, dtype=float)
            if j < 1 or kj.shape != (self.m, self.n**j):
                raise DimensionMismatchError(f"k_{j} must be {self.m} x {self.n**j}")
            if not np.all(np.isfinite(kj)):
                raise ValueError(f"k_{j} has non-finite entries")
            coeffs[j] = kj
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def max_degree(self) -> int:
        return max(self.coefficients.keys(), default=0)


def assemble_rhs(d, system, cost, v_coeffs, k_coeffs, classical_rhs=False) -> ModeVector:
    """Right-hand side ``c`` of ``L_{d+1}(A_c') v_{d+1} = c``.

    Collects, with a minus sign, every degree-(d+1) interaction of known
    coefficients:

    * drift terms ``L_{d+2-i}((N_i + B k_i)') v_{d+2-i}`` for i = 2..d
      (``k_d`` itself does not appear: its coupling with ``v_2`` cancels
      exactly, and for ``i = d`` only the drift coefficient ``N_d``
      contributes);
    * control-cost terms ``(k_i' kron k_j') r_2`` for i + j = d + 1 with
      i, j >= 2, computed as the matrix products ``k_i' R k_j``.

    With ``classical_rhs=True`` the ``i = d`` drift/value interaction
    ``L_2(N_d') v_2`` is omitted, matching the classical explicit
    recurrences for the low-degree coefficients; the full degree-matched
    form is the default.
    """
    n, m = system.n, system.m
    if d < 2:
        raise DimensionMismatchError("assemble_rhs needs degree >= 2")
    guard_entries(n ** (d + 1), "assemble_rhs output")
    c = np.zeros(n ** (d + 1))

    # classical mode keeps the d = 2 base equation intact; the omitted
    # N_d/v_2 interaction only arises for d >= 3
    top = min(system.p, max(d - 1, 2) if classical_rhs else d)
    for i in range(2, d + 1):
        G = None
        if i <= top and i in system.N:
            G = system.N[i]
        if i <= d - 1:
            if i not in k_coeffs:
                raise MissingCoefficientError(f"k_{i} required for degree {d}")
            Bk = system.B @ k_coeffs[i]
            G = Bk if G is None else G + Bk
        if G is None or not G.any():
            continue
        j = d + 2 - i
        if j not in v_coeffs:
            raise MissingCoefficientError(f"v_{j} required for degree {d}")
        term = lyap_sum_apply(G.T, j, ModeVector((n,) * j, v_coeffs[j]))
        c -= term.data

    R = cost.R
    for i in range(2, d):
        j = d + 1 - i
        if not 2 <= j <= d - 1:
            continue
        if i not in k_coeffs or j not in k_coeffs:
            raise MissingCoefficientError(f"k_{i}, k_{j} required for degree {d}")
        c -= (k_coeffs[i].T @ R @ k_coeffs[j]).reshape(-1)
    return ModeVector((n,) * (d + 1), c)


def compute_gain(d, B, R, v_next: ModeVector) -> np.ndarray:
    """Gain ``k_d`` from ``v_{d+1}``: ``-1/2 R^{-1}`` times the mode sum of
    ``B'`` contractions.

    Each of the d+1 insertion positions contracts one mode of ``v_{d+1}``
    with ``B'``; the contracted mode is permuted to the front so every
    term shares the ``m x n**d`` layout before summing.  For a symmetric
    coefficient tensor this equals ``d+1`` times any single term, but the
    permuted sum is exact for any representative.
    """
    B = np.asarray(B, dtype=float)
    n, m = B.shape
    if v_next.dims != (n,) * (d + 1):
        raise DimensionMismatchError(
            f"v_{d + 1} must have {d + 1} modes of size {n}, got {v_next.dims}"
        )
    guard_entries(m * n**d, "compute_gain output")
    tensor = v_next.tensor()
    S = np.zeros((m,) + (n,) * d)
    for pos in range(d + 1):
        contracted = np.tensordot(B.T, tensor, axes=([1], [pos]))
        S += contracted
    S_mat = S.reshape(m, n**d)
    rf = scipy.linalg.cho_factor(R)
    return -0.5 * scipy.linalg.cho_solve(rf, S_mat)


def pqr(system: PolynomialSystem, cost: QuadraticCost, degree: int,
        classical_rhs: bool = False, info: dict | None = None):
    """Compute value-function and feedback coefficients up to ``degree``.

    Returns ``(ValueFunction, FeedbackLaw)`` with ``v_2 ... v_{degree+1}``
    and ``k_1 ... k_degree``.  ``info``, if given, collects diagnostics:
    the Riccati residual and, per degree, wall time and substitution
    operation counts.
    """
    n, m = system.n, system.m
    if degree < 1:
        raise DimensionMismatchError("degree must be >= 1")
    guard_entries(n ** (degree + 2), "pqr coefficient pipeline")

    t0 = time.perf_counter()
    are = care_solve(system.A, system.B, cost.Q, cost.R)
    v_coeffs = {2: vec(are.V2)}
    k_coeffs = {1: are.K1}
    if info is not None:
        info["are_residual"] = are.residual_norm
        info["newton_residuals"] = list(are.newton_residuals)
        info["degrees"] = [
            {"degree": 1, "seconds": time.perf_counter() - t0}
        ]

    if degree >= 2:
        Ac = system.A + system.B @ are.K1
        sf = schur_decompose(Ac.T)
        for d in range(2, degree + 1):
            t_deg = time.perf_counter()
            c = assemble_rhs(d, system, cost, v_coeffs, k_coeffs, classical_rhs)
            stats: dict = {}
            v_next = nway_solve(sf, d + 1, c, stats=stats)
            v_coeffs[d + 1] = v_next.data
            k_coeffs[d] = compute_gain(d, system.B, cost.R, v_next)
            if info is not None:
                info["degrees"].append({
                    "degree": d,
                    "seconds": time.perf_counter() - t_deg,
                    "solve_ops": stats["ops"],
                    "solve_op_bound": stats["op_bound"],
                    "min_pivot": stats["min_pivot"],
                    "value_coeff_norm": float(np.linalg.norm(v_next.data)),
                    "gain_norm": float(np.linalg.norm(k_coeffs[d])),
                })

    return (
        ValueFunction(n=n, coefficients=v_coeffs),
        FeedbackLaw(n=n, m=m, coefficients=k_coeffs),
    )


def _monomial_ladder(x: np.ndarray, top: int):
    """Yield (degree, x kron ... kron x) for degrees 1..top."""
    mono = x
    yield 1, mono
    for k in range(2, top + 1):
        mono = (mono[:, None] * x[None, :]).reshape(-1)
        yield k, mono


def eval_feedback(law: FeedbackLaw, x: np.ndarray, up_to_degree: int | None = None) -> np.ndarray:
    """Evaluate ``K(x)``, optionally truncated at ``up_to_degree``."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != law.n:
        raise DimensionMismatchError(f"state length {x.size}, expected {law.n}")
    top = law.max_degree if up_to_degree is None else min(up_to_degree, law.max_degree)
    u = np.zeros(law.m)
    if top < 1:
        return u
    for j, mono in _monomial_ladder(x, top):
        if j in law.coefficients:
            u += law.coefficients[j] @ mono
    return u


def eval_value(vf: ValueFunction, x: np.ndarray, up_to_degree: int | None = None) -> float:
    """Evaluate the polynomial value function, optionally truncated."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != vf.n:
        raise DimensionMismatchError(f"state length {x.size}, expected {vf.n}")
    top = vf.max_degree if up_to_degree is None else min(up_to_degree, vf.max_degree)
    total = 0.0
    if top < 2:
        return total
    for k, mono in _monomial_ladder(x, top):
        if k in vf.coefficients:
            total += float(vf.coefficients[k] @ mono)
    return total


def value_gradient(vf: ValueFunction, x: np.ndarray, up_to_degree: int | None = None) -> np.ndarray:
    """Analytic gradient of the polynomial value function at ``x``."""
    x = np.asarray(x, dtype=float).reshape(-1)
    n = vf.n
    top = vf.max_degree if up_to_degree is None else min(up_to_degree, vf.max_degree)
    grad = np.zeros(n)
    for k, vk in vf.coefficients.items():
        if k > top:
            continue
        tensor = vk.reshape((n,) * k)
        for pos in range(k):
            # free mode to the front, contract the rest with x
            partial = np.moveaxis(tensor, pos, 0)
            for _ in range(k - 1):
                partial = partial @ x
            grad += partial
    return grad


def hjb_residual(system: PolynomialSystem, cost: QuadraticCost,
                 vf: ValueFunction, law: FeedbackLaw, x: np.ndarray):
    """Pointwise residuals of the two dynamic-programming identities.

    Returns ``(r1, r2)`` where ``r1`` is the scalar residual of the
    stationarity identity ``grad v . (Ax + B K(x) + f(x)) + l(x, K(x))``
    and ``r2`` the norm of the optimality identity ``grad v . B + 2 R K(x)``.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    g = value_gradient(vf, x)
    u = eval_feedback(law, x)
    r1 = float(g @ system.drift(x, u) + cost.running_cost(x, u))
    r2 = float(np.linalg.norm(system.B.T @ g + 2.0 * cost.R @ u))
    return r1, r2


def decoupling_residual(system: PolynomialSystem, cost: QuadraticCost,
                        vf: ValueFunction, law: FeedbackLaw, d: int) -> float:
    """Norm of the cancellation that decouples ``v_{d+1}`` from ``k_d``,
    relative to the size of its two summands.

    Assembles ``v_2'((B k_d) kron I + I kron (B k_d)) + r_2'(k_d kron k_1
    + k_1 kron k_d)`` densely; intended for small instances.
    """
    n = system.n
    v2 = vf.coefficients[2]
    kd = law.coefficients[d]
    k1 = law.coefficients[1]
    r2 = cost.r2
    Bkd = system.B @ kd
    I = np.eye(n)
    term_v = v2 @ (np.kron(Bkd, I) + np.kron(I, Bkd))
    term_r = r2 @ (np.kron(kd, k1) + np.kron(k1, kd))
    scale = max(np.linalg.norm(term_v), np.linalg.norm(term_r), 1e-300)
    return float(np.linalg.norm(term_v + term_r) / scale)


def asymmetry_norm(vf: ValueFunction, degree: int) -> float:
    """Relative deviation of a coefficient from mode-exchange symmetry.

    Checks the adjacent mode transpositions (which generate the full
    symmetric group), so it is zero exactly when the coefficient tensor is
    fully symmetric.  Diagnostic only: evaluation never requires symmetry.
    """
    vk = vf.coefficients[degree]
    n = vf.n
    tensor = vk.reshape((n,) * degree)
    norm = max(float(np.linalg.norm(vk)), 1e-300)
    worst = 0.0
    for pos in range(degree - 1):
        swapped = np.swapaxes(tensor, pos, pos + 1)
        worst = max(worst, float(np.linalg.norm((tensor - swapped).reshape(-1))) / norm)
    return worst
