"""Built-in correctness suites backing the ``validate`` CLI command.

Each suite cross-checks the structured code paths against dense,
independently assembled oracles on small seeded-random instances.  A
check contributes the ratio (observed error / allowed tolerance); a suite
passes when every ratio is at most one.  The pytest suite runs larger
sweeps of the same checks; these are sized to finish in seconds.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

from .albrekht import (
    PolynomialSystem,
    QuadraticCost,
    compute_gain,
    decoupling_residual,
    pqr,
)
from .kron import ModeVector, kron_apply, kron_dense, lyap_sum_apply, monomial, vec
from .nway import lyap2_solve, nway_solve, schur_decompose
from .riccati import care_residual, care_solve


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _dense_chain(factors):
    return reduce(np.kron, factors)


def _dense_lyap_sum(X, d, n):
    total = None
    for pos in range(d):
        factors = [np.eye(n)] * d
        factors[pos] = X
        term = _dense_chain(factors)
        total = term if total is None else total + term
    return total


def _random_stable(rng, n, margin=0.5):
    A = rng.standard_normal((n, n))
    shift = np.max(np.linalg.eigvals(A).real) + margin
    return A - shift * np.eye(n)


def _rel(err, ref):
    return float(err) / max(float(ref), 1e-30)


def _result(name, ratios):
    worst = max(ratios) if ratios else 0.0
    return CheckResult(name, worst <= 1.0, f"worst error/tolerance ratio {worst:.2e}")


def check_kron(seed: int = 1234) -> CheckResult:
    """Structured applies against dense Kronecker assembly (tol 1e-13)."""
    rng = np.random.default_rng(seed)
    ratios = []
    for _ in range(25):
        nx, ny = rng.integers(1, 5, size=2)
        X = rng.standard_normal((nx, nx))
        Y = rng.standard_normal((ny, ny))
        v = rng.standard_normal(nx * ny)
        dense = kron_dense(X, Y) @ v
        structured = kron_apply([X, Y], ModeVector((nx, ny), v)).data
        ratios.append(_rel(np.linalg.norm(dense - structured),
                           np.linalg.norm(dense)) / 1e-13)
        V = rng.standard_normal((ny, nx))
        lhs = vec(X @ V @ Y.T)
        rhs = kron_apply([Y, X], ModeVector((nx, ny), vec(V))).data
        ratios.append(_rel(np.linalg.norm(lhs - rhs), np.linalg.norm(lhs)) / 1e-13)
    for _ in range(10):
        n, d = int(rng.integers(2, 4)), int(rng.integers(2, 5))
        X = rng.standard_normal((n, n))
        v = rng.standard_normal(n**d)
        dense = _dense_lyap_sum(X, d, n) @ v
        structured = lyap_sum_apply(X, d, ModeVector((n,) * d, v)).data
        ratios.append(_rel(np.linalg.norm(dense - structured),
                           np.linalg.norm(dense)) / 1e-13)
        x, y = rng.standard_normal(n), rng.standard_normal(n)
        ip = monomial(x, d).data @ monomial(y, d).data
        ratios.append(_rel(abs(ip - (x @ y) ** d), abs(ip)) / 1e-13)
    return _result("kron-dense-oracle", ratios)


def check_nway(seed: int = 1234, count: int = 20) -> CheckResult:
    """Kronecker-sum solves against dense assembled systems (tol 1e-9)."""
    rng = np.random.default_rng(seed)
    ratios = []
    for _ in range(count):
        n = int(rng.integers(2, 5))
        d = int(rng.integers(1, 5))
        A = _random_stable(rng, n)
        b = rng.standard_normal(n**d)
        sf = schur_decompose(A)
        stats: dict = {}
        v = nway_solve(sf, d, ModeVector((n,) * d, b), stats=stats).data
        dense = np.linalg.solve(_dense_lyap_sum(A, d, n), b)
        ratios.append(_rel(np.linalg.norm(v - dense), np.linalg.norm(dense)) / 1e-9)
        residual = lyap_sum_apply(A, d, ModeVector((n,) * d, v)).data - b
        ratios.append(_rel(np.linalg.norm(residual), np.linalg.norm(b)) / 1e-9)
        ratios.append(stats["ops"] / stats["op_bound"])
    return _result("nway-dense-oracle", ratios)


def check_riccati(seed: int = 1234, count: int = 20) -> CheckResult:
    """Riccati solves: analytic scalar case, residuals, gain identity."""
    rng = np.random.default_rng(seed)
    ratios = []
    sol = care_solve(np.array([[-1.0]]), np.array([[1.0]]),
                     np.array([[1.0]]), np.array([[1.0]]))
    ratios.append(abs(sol.V2[0, 0] - (np.sqrt(2.0) - 1.0)) / 1e-12)
    for _ in range(count):
        n = int(rng.integers(2, 7))
        m = int(rng.integers(1, 3))
        A = rng.standard_normal((n, n))
        B = rng.standard_normal((n, m))
        C = rng.standard_normal((n, n))
        Q = C.T @ C
        D = rng.standard_normal((m, m))
        R = D.T @ D + 0.5 * np.eye(m)
        sol = care_solve(A, B, Q, R)
        ratios.append(sol.residual_norm / (1e-9 * max(1.0, np.linalg.norm(Q))))
        cl = np.linalg.eigvals(A + B @ sol.K1)
        ratios.append(1e30 if cl.real.max() >= 0 else 0.0)
        ident = vec(sol.V2) @ np.kron(B, np.eye(n)) + vec(R) @ np.kron(np.eye(m), sol.K1)
        ratios.append(float(np.linalg.norm(ident)) / 1e-9)
        V_l = lyap2_solve(A + B @ sol.K1, Q + sol.K1.T @ R @ sol.K1)
        ratios.append(care_residual(A, B, Q, R, V_l)
                      / (1e-9 * max(1.0, np.linalg.norm(Q))))
    return _result("riccati", ratios)


def check_series(perturb_v3: float = 0.0) -> CheckResult:
    """Scalar analytic coefficients, decoupling identity, gain consistency.

    ``perturb_v3`` injects an inconsistency between ``v_3`` and the stored
    ``k_2`` (negative-control hook: any appreciable value must fail).
    """
    from .models import lorenz

    ratios = []
    system = PolynomialSystem(A=np.array([[-1.0]]), B=np.array([[1.0]]),
                              N={2: np.array([[1.0]])})
    cost = QuadraticCost(Q=np.eye(1), R=np.eye(1))
    vf, law = pqr(system, cost, degree=2)
    v2_ref = np.sqrt(2.0) - 1.0
    v3_ref = -2.0 * v2_ref / (3.0 * -np.sqrt(2.0))
    k2_ref = -1.5 * v3_ref
    ratios.append(abs(vf.coefficients[2][0] - v2_ref) / 1e-9)
    ratios.append(abs(vf.coefficients[3][0] - v3_ref) / 1e-9)
    ratios.append(abs(law.coefficients[2][0, 0] - k2_ref) / 1e-9)

    inst = lorenz()
    vf_l, law_l = pqr(inst.system, inst.cost, degree=3)
    for d in (2, 3):
        ratios.append(decoupling_residual(inst.system, inst.cost, vf_l, law_l, d) / 1e-8)
    v3 = vf_l.coefficients[3] + perturb_v3
    k2_check = compute_gain(2, inst.system.B, inst.cost.R, ModeVector((3, 3, 3), v3))
    ratios.append(_rel(np.linalg.norm(k2_check - law_l.coefficients[2]),
                       np.linalg.norm(law_l.coefficients[2])) / 1e-9)

    # with no drift nonlinearity every higher coefficient vanishes
    lin = PolynomialSystem(A=inst.system.A, B=inst.system.B, N={})
    vf0, _ = pqr(lin, inst.cost, degree=3)
    for k in (3, 4):
        ratios.append(_rel(np.linalg.norm(vf0.coefficients[k]),
                           np.linalg.norm(vf0.coefficients[2])) / 1e-10)
    return _result("series-coefficients", ratios)


def run_all(seed: int = 1234):
    return [
        check_kron(seed),
        check_nway(seed),
        check_riccati(seed),
        check_series(),
    ]
