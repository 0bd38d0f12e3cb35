import numpy as np
import pytest

from _oracles import companion_roots, dense_lyap_sum, random_stable
from pqr.errors import EigenvalueSumError
from pqr.kron import ModeVector, lyap_sum_apply, vec
from pqr.models import lorenz
from pqr.nway import lyap2_solve, nway_solve, schur_decompose


def _schur_invariants(A, sf):
    n = A.shape[0]
    assert np.linalg.norm(A - sf.U @ sf.T @ sf.U.conj().T) <= 1e-10 * max(
        np.linalg.norm(A), 1e-30
    )
    assert np.linalg.norm(sf.U.conj().T @ sf.U - np.eye(n)) <= 1e-12
    assert np.linalg.norm(np.tril(sf.T, -1)) <= 1e-12 * max(
        np.linalg.norm(sf.T), 1e-30
    )


def test_schur_already_triangular():
    A = np.diag([-1.0, -2.0])
    sf = schur_decompose(A)
    _schur_invariants(A, sf)
    assert np.allclose(sorted(sf.eigenvalues.real), [-2.0, -1.0], atol=1e-12)
    assert np.allclose(sf.eigenvalues.imag, 0.0, atol=1e-12)


def test_schur_rotation_eigenvalues():
    A = np.array([[0.0, 1.0], [-1.0, 0.0]])
    sf = schur_decompose(A)
    _schur_invariants(A, sf)
    assert np.allclose(sorted(sf.eigenvalues.imag), [-1.0, 1.0], atol=1e-12)
    assert np.allclose(sf.eigenvalues.real, 0.0, atol=1e-12)


def test_schur_lorenz_companion_oracle():
    A = lorenz().system.A
    sf = schur_decompose(A)
    _schur_invariants(A, sf)
    # det(A - lambda I) expanded by hand from the block structure:
    # (l^2 + 11 l - 270)(l + 8/3) = l^3 + (41/3) l^2 - (722/3) l - 720
    expect = companion_roots([-720.0, -722.0 / 3.0, 41.0 / 3.0])
    got = np.sort_complex(sf.eigenvalues)
    assert np.allclose(got, np.sort_complex(expect), atol=1e-10)


def test_schur_random_invariants(rng):
    for _ in range(10):
        n = int(rng.integers(2, 9))
        A = rng.standard_normal((n, n))
        _schur_invariants(A, schur_decompose(A))


def test_schur_hash_distinguishes_sources():
    a = schur_decompose(np.diag([-1.0, -2.0]))
    b = schur_decompose(np.diag([-1.0, -3.0]))
    assert a.source_hash != b.source_hash


def test_nway_scalar_triangular():
    sf = schur_decompose(np.array([[-2.0]]))
    out = nway_solve(sf, 1, ModeVector((1,), np.array([4.0])))
    assert np.allclose(out.data, [-2.0])


def test_nway_diagonal_closed_form():
    sf = schur_decompose(np.diag([-1.0, -2.0]))
    out = nway_solve(sf, 2, ModeVector((2, 2), np.ones(4)))
    assert np.allclose(out.data, [-0.5, -1.0 / 3.0, -1.0 / 3.0, -0.25],
                       rtol=1e-12, atol=1e-14)


def test_nway_matches_dense_solve(rng):
    for _ in range(25):
        n = int(rng.integers(2, 5))
        d = int(rng.integers(1, 5))
        A = random_stable(rng, n)
        b = rng.standard_normal(n**d)
        sf = schur_decompose(A)
        stats = {}
        v = nway_solve(sf, d, ModeVector((n,) * d, b), stats=stats)
        dense = np.linalg.solve(dense_lyap_sum(A, d, n), b)
        assert np.linalg.norm(v.data - dense) <= 1e-9 * max(
            np.linalg.norm(dense), 1e-30
        )
        # residual contract, checked through the structured apply
        res = lyap_sum_apply(A, d, v).data - b
        assert np.linalg.norm(res) <= 1e-9 * np.linalg.norm(b)
        # operation-count contract
        assert stats["ops"] <= stats["op_bound"]


def test_nway_pivot_stability_floor(rng):
    # all eigenvalues at real part <= -delta force pivots >= d*delta
    for _ in range(5):
        n, d = 4, 3
        A = random_stable(rng, n, margin=0.8)
        delta = -np.max(np.linalg.eigvals(A).real)
        sf = schur_decompose(A)
        stats = {}
        nway_solve(sf, d, ModeVector((n,) * d, rng.standard_normal(n**d)),
                   stats=stats)
        assert stats["min_pivot"] >= d * delta * (1.0 - 1e-9)


def test_nway_reflected_eigenvalues_error():
    # +1 and -1 sum to zero for d = 2: the solvability condition fails
    sf = schur_decompose(np.diag([1.0, -1.0]))
    with pytest.raises(EigenvalueSumError):
        nway_solve(sf, 2, ModeVector((2, 2), np.ones(4)))


def test_nway_large_mode_count(rng):
    n, d = 2, 8
    A = random_stable(rng, n)
    b = rng.standard_normal(n**d)
    sf = schur_decompose(A)
    v = nway_solve(sf, d, ModeVector((n,) * d, b))
    res = lyap_sum_apply(A, d, v).data - b
    assert np.linalg.norm(res) <= 1e-9 * np.linalg.norm(b)


def test_lyap2_scalar():
    V = lyap2_solve(np.array([[-1.0]]), np.array([[2.0]]))
    assert np.allclose(V, [[1.0]])


def test_lyap2_diagonal():
    V = lyap2_solve(np.diag([-1.0, -2.0]), np.eye(2))
    assert np.allclose(V, np.diag([0.5, 0.25]), rtol=1e-12, atol=1e-14)


def test_lyap2_random_residual(rng):
    for _ in range(10):
        n = int(rng.integers(2, 6))
        A = random_stable(rng, n)
        C = rng.standard_normal((n, n))
        C = C + C.T
        V = lyap2_solve(A, C)
        assert np.array_equal(V, V.T)
        res = A.T @ V + V @ A + C
        assert np.linalg.norm(res) <= 1e-10 * max(np.linalg.norm(C), 1.0)
