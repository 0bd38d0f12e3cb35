import numpy as np
import pytest

from _oracles import (
    dense_kron_chain,
    dense_lyap_sum,
    mode_front_permutation,
    random_spd,
    scalar_series,
)
from pqr.albrekht import (
    FeedbackLaw,
    PolynomialSystem,
    QuadraticCost,
    ValueFunction,
    assemble_rhs,
    asymmetry_norm,
    compute_gain,
    decoupling_residual,
    eval_feedback,
    eval_value,
    hjb_residual,
    pqr,
    value_gradient,
)
from pqr.errors import MissingCoefficientError
from pqr.kron import ModeVector, vec
from pqr.models import lorenz, vdp_ring

SCALAR = PolynomialSystem(A=np.array([[-1.0]]), B=np.array([[1.0]]),
                          N={2: np.array([[1.0]])})
UNIT_COST = QuadraticCost(Q=np.eye(1), R=np.eye(1))


def _unit_cost(n, m):
    return QuadraticCost(Q=np.eye(n), R=np.eye(m))


def test_scalar_hand_values():
    vf, law = pqr(SCALAR, UNIT_COST, degree=2)
    v2 = np.sqrt(2.0) - 1.0
    v3 = -2.0 * v2 / (3.0 * -np.sqrt(2.0))
    assert abs(vf.coefficients[2][0] - v2) <= 1e-12
    assert abs(vf.coefficients[3][0] - v3) <= 1e-12
    assert abs(law.coefficients[2][0, 0] + 1.5 * v3) <= 1e-12


def test_scalar_against_series_oracle():
    vf, law = pqr(SCALAR, UNIT_COST, degree=6)
    v_ref, k_ref = scalar_series(-1.0, 1.0, {2: 1.0}, 1.0, 1.0, degree=6)
    for j in range(2, 8):
        assert abs(vf.coefficients[j][0] - v_ref[j]) <= 1e-10 * max(1, abs(v_ref[j]))
    for j in range(1, 7):
        assert abs(law.coefficients[j][0, 0] - k_ref[j]) <= 1e-10 * max(1, abs(k_ref[j]))


def test_scalar_cubic_drift_against_oracle():
    system = PolynomialSystem(A=np.array([[-1.0]]), B=np.array([[1.0]]),
                              N={2: np.array([[0.7]]), 3: np.array([[-0.4]])})
    vf, law = pqr(system, UNIT_COST, degree=5)
    v_ref, k_ref = scalar_series(-1.0, 1.0, {2: 0.7, 3: -0.4}, 1.0, 1.0, degree=5)
    for j in range(2, 7):
        assert abs(vf.coefficients[j][0] - v_ref[j]) <= 1e-10 * max(1, abs(v_ref[j]))
    for j in range(1, 6):
        assert abs(law.coefficients[j][0, 0] - k_ref[j]) <= 1e-10 * max(1, abs(k_ref[j]))


def test_classical_rhs_drops_highest_drift_coupling():
    # for cubic drift the d=3 right-hand side loses the N3/v2 interaction
    system = PolynomialSystem(A=np.array([[-1.0]]), B=np.array([[1.0]]),
                              N={2: np.array([[0.7]]), 3: np.array([[-0.4]])})
    full, _ = pqr(system, UNIT_COST, degree=3)
    cut, _ = pqr(system, UNIT_COST, degree=3, classical_rhs=True)
    assert np.allclose(full.coefficients[3], cut.coefficients[3])
    assert not np.allclose(full.coefficients[4], cut.coefficients[4])


def test_rhs_degree2_is_pure_drift_term():
    inst = lorenz()
    vf, law = pqr(inst.system, inst.cost, degree=1)
    c = assemble_rhs(2, inst.system, inst.cost,
                     {2: vf.coefficients[2]}, {1: law.coefficients[1]})
    N2t = inst.system.N[2].T
    dense = -(np.kron(N2t, np.eye(3)) + np.kron(np.eye(3), N2t)) @ vf.coefficients[2]
    assert np.allclose(c.data, dense, rtol=1e-13, atol=1e-13)


def test_rhs_degree3_matches_dense_expansion(rng):
    # quadratic drift: c = -L_3((B k2 + N2)') v3 - (k2' kron k2') r2
    n, m = 2, 1
    A = np.array([[-1.0, 0.3], [0.0, -2.0]])
    B = rng.standard_normal((n, m))
    N2 = rng.standard_normal((n, n * n))
    system = PolynomialSystem(A=A, B=B, N={2: N2})
    cost = _unit_cost(n, m)
    vf, law = pqr(system, cost, degree=3)
    v3, k2 = vf.coefficients[3], law.coefficients[2]
    G = (B @ k2 + N2).T
    dense = -dense_lyap_sum_rect(G, 3, n) @ v3 - np.kron(k2.T, k2.T) @ vec(cost.R)
    c = assemble_rhs(3, system, cost,
                     {2: vf.coefficients[2], 3: v3},
                     {1: law.coefficients[1], 2: k2})
    assert np.allclose(c.data, dense, rtol=1e-12, atol=1e-12)


def dense_lyap_sum_rect(X, d, n):
    """Dense sum of I x .. x X x .. x I for a rectangular (n^k x n) X."""
    total = None
    for pos in range(d):
        factors = [np.eye(n)] * d
        factors[pos] = X
        term = dense_kron_chain(factors)
        total = term if total is None else total + term
    return total


def test_rhs_cubic_drift_adds_v2_interaction(rng):
    n, m = 2, 1
    A = np.array([[-1.5, 0.2], [-0.1, -0.8]])
    B = rng.standard_normal((n, m))
    N2 = rng.standard_normal((n, n**2))
    N3 = rng.standard_normal((n, n**3))
    quad = PolynomialSystem(A=A, B=B, N={2: N2})
    cubic = PolynomialSystem(A=A, B=B, N={2: N2, 3: N3})
    cost = _unit_cost(n, m)
    vf, law = pqr(quad, cost, degree=3)
    coeffs_v = {2: vf.coefficients[2], 3: vf.coefficients[3]}
    coeffs_k = {1: law.coefficients[1], 2: law.coefficients[2]}
    c_quad = assemble_rhs(3, quad, cost, coeffs_v, coeffs_k)
    c_cubic = assemble_rhs(3, cubic, cost, coeffs_v, coeffs_k)
    extra = dense_lyap_sum_rect(N3.T, 2, n) @ vf.coefficients[2]
    assert np.allclose(c_cubic.data, c_quad.data - extra, rtol=1e-12, atol=1e-12)


def test_rhs_missing_coefficient():
    inst = lorenz()
    with pytest.raises(MissingCoefficientError):
        assemble_rhs(2, inst.system, inst.cost, {}, {1: np.zeros((1, 3))})


def test_compute_gain_zero_input():
    out = compute_gain(2, np.zeros((3, 1)), np.eye(1),
                       ModeVector((3, 3, 3), np.arange(27.0)))
    assert np.array_equal(out, np.zeros((1, 9)))


def test_compute_gain_scalar_case():
    v3 = 0.19526214587563496  # scalar benchmark coefficient
    out = compute_gain(2, np.array([[1.0]]), np.eye(1),
                       ModeVector((1, 1, 1), np.array([v3])))
    assert abs(out[0, 0] + 1.5 * v3) <= 1e-15


def test_compute_gain_dense_mode_bookkeeping(rng):
    # permuted-sum contraction against dense assembly with explicit
    # mode-to-front permutations, on an asymmetric coefficient
    n, m, d = 2, 1, 2
    B = rng.standard_normal((n, m))
    R = random_spd(rng, m)
    v3 = rng.standard_normal(n ** (d + 1))
    dims = (n,) * (d + 1)
    S = None
    for pos in range(d + 1):
        factors = [np.eye(n)] * (d + 1)
        factors[pos] = B.T
        term = dense_kron_chain(factors) @ v3
        out_dims = list(dims)
        out_dims[pos] = m
        P = mode_front_permutation(tuple(out_dims), pos)
        S = P @ term if S is None else S + P @ term
    expect = -0.5 * np.linalg.solve(R, S.reshape(m, n**d))
    got = compute_gain(d, B, R, ModeVector(dims, v3))
    assert np.allclose(got, expect, rtol=1e-12, atol=1e-12)


def test_lqr_degeneration():
    inst = lorenz()
    lin = PolynomialSystem(A=inst.system.A, B=inst.system.B, N={})
    vf, law = pqr(lin, inst.cost, degree=4)
    v2n = np.linalg.norm(vf.coefficients[2])
    for k in (3, 4, 5):
        assert np.linalg.norm(vf.coefficients[k]) <= 1e-10 * v2n
    for j in (2, 3, 4):
        assert np.linalg.norm(law.coefficients[j]) <= 1e-10 * v2n


def test_odd_symmetry_even_gains_vanish():
    inst = vdp_ring(g=2, actuated_nodes=(1,), y0=0.3)
    vf, law = pqr(inst.system, inst.cost, degree=6)
    k1n = np.linalg.norm(law.coefficients[1])
    for j in (2, 4, 6):
        assert np.linalg.norm(law.coefficients[j]) <= 1e-9 * k1n
    for k in (3, 5, 7):
        assert np.linalg.norm(vf.coefficients[k]) <= 1e-9 * np.linalg.norm(
            vf.coefficients[2]
        )


def test_decoupling_identity_dense():
    for inst, deg in ((lorenz(), 3), (vdp_ring(g=2, actuated_nodes=(1, 2)), 3)):
        vf, law = pqr(inst.system, inst.cost, degree=deg)
        for d in range(2, deg + 1):
            assert decoupling_residual(inst.system, inst.cost, vf, law, d) <= 1e-8


def test_eval_at_origin():
    vf, law = pqr(SCALAR, UNIT_COST, degree=2)
    assert eval_value(vf, [0.0]) == 0.0
    assert np.array_equal(eval_feedback(law, [0.0]), np.zeros(1))


def test_eval_linear_law_only():
    inst = lorenz()
    vf, law = pqr(inst.system, inst.cost, degree=2)
    x = np.array([1.0, -2.0, 0.5])
    u1 = eval_feedback(law, x, up_to_degree=1)
    assert np.allclose(u1, law.coefficients[1] @ x)


def test_eval_scalar_law_frozen_point():
    vf, law = pqr(SCALAR, UNIT_COST, degree=2)
    u = eval_feedback(law, [0.1])
    assert abs(u[0] - (-0.41421356 * 0.1 - 0.29289322 * 0.01)) <= 1e-7


def test_value_truncation_orders():
    inst = lorenz()
    vf, _ = pqr(inst.system, inst.cost, degree=3)
    x = np.array([0.3, -0.2, 0.1])
    full = eval_value(vf, x)
    v2_only = eval_value(vf, x, up_to_degree=2)
    assert v2_only == pytest.approx(x @ vf.coefficients[2].reshape(3, 3) @ x)
    assert full != v2_only


def test_gradient_matches_finite_differences(rng):
    inst = lorenz()
    vf, _ = pqr(inst.system, inst.cost, degree=3)
    for _ in range(5):
        x = rng.standard_normal(3)
        g = value_gradient(vf, x)
        h = 1e-6
        fd = np.array([
            (eval_value(vf, x + h * e) - eval_value(vf, x - h * e)) / (2 * h)
            for e in np.eye(3)
        ])
        assert np.linalg.norm(g - fd) <= 1e-6 * max(np.linalg.norm(g), 1.0)


def test_hjb_residual_zero_at_origin():
    inst = lorenz()
    vf, law = pqr(inst.system, inst.cost, degree=2)
    r1, r2 = hjb_residual(inst.system, inst.cost, vf, law, np.zeros(3))
    assert r1 == 0.0 and r2 == 0.0


def test_hjb_residual_linear_system_exact(rng):
    inst = lorenz()
    lin = PolynomialSystem(A=inst.system.A, B=inst.system.B, N={})
    vf, law = pqr(lin, inst.cost, degree=1)
    for _ in range(5):
        x = 3.0 * rng.standard_normal(3)
        r1, r2 = hjb_residual(lin, inst.cost, vf, law, x)
        bound = 1e-9 * (1.0 + np.linalg.norm(x) ** 4)
        assert abs(r1) <= bound and r2 <= bound


def _fitted_slope(system, cost, vf, law, rng, n, scale):
    # ladder anchored at the system's natural amplitude so the high-order
    # residual stays above the f64 cancellation noise of the large terms
    eps_ladder = scale * np.array([1.0, 10**-0.5, 1e-1])
    slopes = []
    for _ in range(5):
        w = rng.standard_normal(n)
        w /= np.linalg.norm(w)
        res = np.array([
            abs(hjb_residual(system, cost, vf, law, e * w)[0])
            for e in eps_ladder
        ])
        if np.any(res == 0.0):
            continue
        slope, _ = np.polyfit(np.log(eps_ladder), np.log(res), 1)
        slopes.append(slope)
    return min(slopes)


def test_hjb_residual_order_scalar(rng):
    for d in (2, 3, 4):
        vf, law = pqr(SCALAR, UNIT_COST, degree=d)
        assert _fitted_slope(SCALAR, UNIT_COST, vf, law, rng, 1, 0.1) >= d + 1.5


def test_hjb_residual_order_lorenz(rng):
    inst = lorenz()
    for d in (2, 3, 4):
        vf, law = pqr(inst.system, inst.cost, degree=d)
        assert _fitted_slope(inst.system, inst.cost, vf, law, rng, 3, 1.0) >= d + 1.5


def test_representation_invariance_lorenz(rng):
    # same symmetrized drift, different representative: put each quadratic
    # monomial's weight on a single index order instead of splitting it
    inst = lorenz()
    N2_alt = np.zeros((3, 9))
    N2_alt[1, 2] = -1.0   # -x1*x3 entirely on (1,3)
    N2_alt[2, 3] = 1.0    # +x1*x2 entirely on (2,1)
    alt = PolynomialSystem(A=inst.system.A, B=inst.system.B, N={2: N2_alt})
    vf_a, law_a = pqr(inst.system, inst.cost, degree=3)
    vf_b, law_b = pqr(alt, inst.cost, degree=3)
    for _ in range(10):
        x = rng.standard_normal(3)
        va, vb = eval_value(vf_a, x), eval_value(vf_b, x)
        ua, ub = eval_feedback(law_a, x), eval_feedback(law_b, x)
        assert abs(va - vb) <= 1e-9 * max(1.0, abs(va))
        assert np.linalg.norm(ua - ub) <= 1e-9 * max(1.0, np.linalg.norm(ua))


def test_asymmetry_diagnostic_reports():
    inst = lorenz()
    vf, _ = pqr(inst.system, inst.cost, degree=2)
    assert asymmetry_norm(vf, 2) <= 1e-12  # Riccati output is symmetrized
    assert asymmetry_norm(vf, 3) >= 0.0


def test_value_function_validation():
    with pytest.raises(ValueError):
        ValueFunction(n=2, coefficients={2: np.array([1.0, 2.0, 3.0, 4.0])})
    with pytest.raises(Exception):
        ValueFunction(n=2, coefficients={2: np.zeros(3)})
    with pytest.raises(Exception):
        FeedbackLaw(n=2, m=1, coefficients={1: np.zeros((2, 2))})
