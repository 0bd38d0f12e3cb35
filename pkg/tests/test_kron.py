import numpy as np
import pytest

from _oracles import dense_kron_chain, dense_lyap_sum
from pqr.errors import DimensionMismatchError, MemoryGuardError
from pqr.kron import (
    ModeVector,
    kron_apply,
    kron_dense,
    lyap_sum_apply,
    monomial,
    unvec,
    vec,
)


def test_kron_dense_identity_blocks():
    Y = np.array([[1.0, 2.0], [3.0, 4.0]])
    out = kron_dense(np.eye(2), Y)
    expect = np.block([[Y, np.zeros((2, 2))], [np.zeros((2, 2)), Y]])
    assert np.array_equal(out, expect)


def test_kron_dense_permutation():
    swap = np.array([[0.0, 1.0], [1.0, 0.0]])
    out = kron_dense(swap, np.eye(2))
    v = np.array([1.0, 2.0, 3.0, 4.0])
    assert np.array_equal(out @ v, np.array([3.0, 4.0, 1.0, 2.0]))


def test_kron_dense_direct_expansion():
    X = np.array([[1.0, 2.0], [3.0, 4.0]])
    Y = np.array([[0.0, 1.0], [1.0, 0.0]])
    expect = np.array([
        [0.0, 1.0, 0.0, 2.0],
        [1.0, 0.0, 2.0, 0.0],
        [0.0, 3.0, 0.0, 4.0],
        [3.0, 0.0, 4.0, 0.0],
    ])
    assert np.array_equal(kron_dense(X, Y), expect)


def test_kron_dense_matches_numpy(rng):
    for _ in range(20):
        X = rng.standard_normal((rng.integers(1, 5), rng.integers(1, 5)))
        Y = rng.standard_normal((rng.integers(1, 5), rng.integers(1, 5)))
        assert np.allclose(kron_dense(X, Y), np.kron(X, Y), rtol=0, atol=0)


def test_vec_column_major():
    M = np.array([[1.0, 3.0], [2.0, 4.0]])
    assert np.array_equal(vec(M), np.array([1.0, 2.0, 3.0, 4.0]))


def test_unvec_round_trip():
    assert np.array_equal(
        unvec(np.array([1.0, 2.0, 3.0, 4.0]), 2, 2),
        np.array([[1.0, 3.0], [2.0, 4.0]]),
    )


def test_vec_row_matrix_passthrough():
    M = np.array([[5.0, 6.0, 7.0]])
    assert np.array_equal(vec(M), np.array([5.0, 6.0, 7.0]))


def test_vec_unvec_round_trip_random(rng):
    for _ in range(20):
        r, c = rng.integers(1, 6, size=2)
        M = rng.standard_normal((r, c))
        assert np.array_equal(unvec(vec(M), r, c), M)


def test_unvec_length_mismatch():
    with pytest.raises(DimensionMismatchError):
        unvec(np.arange(5.0), 2, 2)


def test_kron_apply_identity_is_skipped():
    v = ModeVector((2, 2), np.array([1.0, 2.0, 3.0, 4.0]))
    out = kron_apply([np.eye(2), np.eye(2)], v)
    assert out.data is v.data  # no multiplication performed


def test_kron_apply_swap_first_mode():
    swap = np.array([[0.0, 1.0], [1.0, 0.0]])
    v = ModeVector((2, 2), np.array([1.0, 2.0, 3.0, 4.0]))
    out = kron_apply([swap, np.eye(2)], v)
    assert np.array_equal(out.data, np.array([3.0, 4.0, 1.0, 2.0]))


def test_kron_apply_swap_second_mode():
    swap = np.array([[0.0, 1.0], [1.0, 0.0]])
    v = ModeVector((2, 2), np.array([1.0, 2.0, 3.0, 4.0]))
    out = kron_apply([np.eye(2), swap], v)
    assert np.array_equal(out.data, np.array([2.0, 1.0, 4.0, 3.0]))


def test_kron_apply_matches_dense(rng):
    for _ in range(30):
        n_modes = int(rng.integers(1, 4))
        factors, dims = [], []
        for _ in range(n_modes):
            r, c = rng.integers(1, 5, size=2)
            factors.append(rng.standard_normal((r, c)))
            dims.append(int(c))
        v = rng.standard_normal(int(np.prod(dims)))
        out = kron_apply(factors, ModeVector(tuple(dims), v))
        expect = dense_kron_chain(factors) @ v
        assert np.linalg.norm(out.data - expect) <= 1e-13 * max(
            np.linalg.norm(expect), 1.0
        )


def test_kron_vec_relationship(rng):
    for _ in range(10):
        rx, cx, ry, cy = rng.integers(1, 5, size=4)
        X = rng.standard_normal((rx, cx))
        Y = rng.standard_normal((ry, cy))
        V = rng.standard_normal((cx, cy))
        lhs = vec(X @ V @ Y.T)
        rhs = kron_apply([Y, X], ModeVector((cy, cx), vec(V)))
        assert np.allclose(lhs, rhs.data, rtol=1e-13, atol=1e-14)


def test_kron_apply_dimension_mismatch():
    v = ModeVector((2, 2), np.zeros(4))
    with pytest.raises(DimensionMismatchError):
        kron_apply([np.eye(3), np.eye(2)], v)
    with pytest.raises(DimensionMismatchError):
        kron_apply([np.eye(2)], v)


def test_lyap_sum_identity_scales():
    v = ModeVector((3, 3), np.arange(9.0))
    out = lyap_sum_apply(np.eye(3), 2, v)
    assert np.array_equal(out.data, 2.0 * v.data)


def test_lyap_sum_diagonal_case():
    X = np.diag([-1.0, -2.0])
    out = lyap_sum_apply(X, 2, ModeVector((2, 2), np.ones(4)))
    assert np.allclose(out.data, [-2.0, -3.0, -3.0, -4.0])


def test_lyap_sum_expanding_factor():
    # quadratic Lorenz coupling transposed: 9x3 factor expands one mode
    from pqr.models import lorenz

    N2t = lorenz().system.N[2].T
    v = vec(np.eye(3))
    out = lyap_sum_apply(N2t, 2, ModeVector((3, 3), v))
    dense = (np.kron(N2t, np.eye(3)) + np.kron(np.eye(3), N2t)) @ v
    assert out.dims == (3, 3, 3)
    assert np.allclose(out.data, dense, rtol=1e-13, atol=1e-14)


def test_lyap_sum_matches_dense(rng):
    for _ in range(20):
        n = int(rng.integers(2, 5))
        d = int(rng.integers(1, 5))
        X = rng.standard_normal((n, n))
        v = rng.standard_normal(n**d)
        out = lyap_sum_apply(X, d, ModeVector((n,) * d, v))
        expect = dense_lyap_sum(X, d, n) @ v
        assert np.linalg.norm(out.data - expect) <= 1e-13 * max(
            np.linalg.norm(expect), 1.0
        )


def test_lyap_sum_rejects_bad_rows():
    with pytest.raises(DimensionMismatchError):
        lyap_sum_apply(np.zeros((5, 2)), 2, ModeVector((2, 2), np.zeros(4)))


def test_monomial_examples():
    assert np.array_equal(monomial([1.0, 2.0], 2).data, [1.0, 2.0, 2.0, 4.0])
    assert np.array_equal(monomial([3.0, -1.0], 1).data, [3.0, -1.0])


def test_monomial_sparsity_pattern():
    out = monomial([1.0, 0.0, 2.0], 3)
    tensor = out.tensor()
    for idx in np.ndindex(3, 3, 3):
        if 1 in idx:
            assert tensor[idx] == 0.0
        else:
            assert tensor[idx] == 2.0 ** sum(i == 2 for i in idx)


def test_monomial_inner_product_law(rng):
    for _ in range(10):
        n = int(rng.integers(1, 5))
        d = int(rng.integers(1, 5))
        x, y = rng.standard_normal(n), rng.standard_normal(n)
        ip = monomial(x, d).data @ monomial(y, d).data
        assert np.isclose(ip, (x @ y) ** d, rtol=1e-12, atol=1e-12)


def test_directional_derivative_identity(rng):
    # derivative of c(x) = c2'(x kron x) along f, against finite differences
    n = 4
    c2 = rng.standard_normal(n * n)
    x = rng.standard_normal(n)
    f = rng.standard_normal(n)

    def c(z):
        return c2 @ monomial(z, 2).data

    analytic = c2 @ (np.kron(f, x) + np.kron(x, f))
    for h in (1e-5, 1e-6):
        fd = (c(x + h * f) - c(x - h * f)) / (2 * h)
        assert abs(fd - analytic) <= 1e-6 * max(1.0, abs(analytic))


def test_memory_guard_trips(tight_budget):
    tight_budget(10)
    with pytest.raises(MemoryGuardError):
        kron_dense(np.eye(4), np.eye(4))
    with pytest.raises(MemoryGuardError):
        monomial(np.ones(4), 3)
    with pytest.raises(MemoryGuardError):
        kron_apply([np.ones((11, 2)), np.eye(2)],
                    ModeVector((2, 2), np.zeros(4)))


def test_mode_vector_validation():
    with pytest.raises(DimensionMismatchError):
        ModeVector((2, 2), np.zeros(5))
    with pytest.raises(DimensionMismatchError):
        ModeVector((0,), np.zeros(0))
    mv = ModeVector((2, 3), np.arange(6.0))
    assert mv.tensor().shape == (2, 3)
