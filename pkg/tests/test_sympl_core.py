import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cpnflow.sympl_core import (
    AdaptedBasisError,
    NotSymplecticError,
    PairingError,
    SingularSpectrum,
    SymplecticMap,
    adapted_basis,
    is_symplectic,
    paired_singular_values,
    polar_isometry,
    random_symplectic,
    standard_J,
)


def test_standard_J_small():
    np.testing.assert_array_equal(standard_J(1), [[0, -1], [1, 0]])
    J2 = standard_J(2)
    np.testing.assert_array_equal(J2[:2, :2], [[0, -1], [1, 0]])
    np.testing.assert_array_equal(J2[2:, 2:], [[0, -1], [1, 0]])
    assert not J2[:2, 2:].any() and not J2[2:, :2].any()


@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_J_squares_to_minus_identity(n):
    J = standard_J(n)
    np.testing.assert_array_equal(J @ J, -np.eye(2 * n))


def test_standard_J_rejects_zero():
    with pytest.raises(ValueError):
        standard_J(0)


def test_is_symplectic_examples():
    assert is_symplectic(np.eye(4), 1e-12)
    assert is_symplectic(np.diag([2.0, 0.5]), 1e-12)
    assert not is_symplectic(np.diag([2.0, 2.0]), 1e-12)


def test_is_symplectic_rejects_odd():
    with pytest.raises(ValueError):
        is_symplectic(np.eye(3))


def test_symplectic_map_validation():
    with pytest.raises(NotSymplecticError):
        SymplecticMap(np.diag([2.0, 2.0]))
    L = SymplecticMap(np.diag([2.0, 0.5]))
    assert L.n == 1
    assert L.det == pytest.approx(1.0)


def test_spectrum_invariants():
    with pytest.raises(ValueError):
        SingularSpectrum([2.0, 2.0])
    with pytest.raises(ValueError):
        SingularSpectrum([0.5, 2.0])
    with pytest.raises(ValueError):
        SingularSpectrum([1.0, 1.0, 1.0])
    with pytest.raises(ValueError):
        SingularSpectrum([-1.0, -1.0])
    sp = SingularSpectrum.from_log([-0.3, 0.2])
    assert sp.lam[0] >= 1 and sp.lam[2] >= 1


def test_polar_examples():
    np.testing.assert_allclose(polar_isometry(np.eye(2)), np.eye(2), atol=1e-15)
    np.testing.assert_allclose(polar_isometry(np.diag([2.0, 0.5])), np.eye(2), atol=1e-15)


def test_polar_random():
    L = random_symplectic(3, seed=11)
    E = polar_isometry(L)
    J = standard_J(3)
    assert np.max(np.abs(E.T @ E - np.eye(6))) <= 1e-10
    assert np.max(np.abs(E @ J - J @ E)) <= 1e-10
    assert is_symplectic(E, 1e-10)


def test_paired_singular_values_examples():
    np.testing.assert_array_equal(paired_singular_values(np.eye(4)).lam, np.ones(4))
    np.testing.assert_allclose(paired_singular_values(np.diag([2.0, 0.5])).lam, [2.0, 0.5])
    np.testing.assert_allclose(paired_singular_values(np.diag([0.5, 2.0])).lam, [2.0, 0.5])


def test_paired_singular_values_random_n3():
    L = random_symplectic(3, seed=5)
    lam = paired_singular_values(L).lam
    np.testing.assert_allclose(lam[0::2] * lam[1::2], 1.0, atol=1e-10)
    assert np.all(np.diff(lam[0::2]) <= 0)
    generic = np.sort(np.linalg.svd(L.entries, compute_uv=False))
    np.testing.assert_allclose(np.sort(lam), generic, rtol=1e-9)


def test_pairing_failure():
    # symplectic to loose tolerance only: singular values do not pair
    M = np.diag([2.0, 0.5 * (1 + 1e-6)])
    L = SymplecticMap(M, tol=1e-5)
    with pytest.raises(PairingError):
        paired_singular_values(L, tol=1e-8)


def test_adapted_basis_examples():
    b = adapted_basis(np.eye(4))
    np.testing.assert_array_equal(b.spectrum.lam, np.ones(4))
    J = standard_J(2)
    np.testing.assert_allclose(b.A.T @ J @ b.A, J, atol=1e-14)
    b = adapted_basis(np.diag([2.0, 0.5]))
    np.testing.assert_allclose(np.abs(b.A), np.eye(2), atol=1e-14)
    np.testing.assert_allclose(b.A_tilde, b.A, atol=1e-14)
    np.testing.assert_allclose(b.spectrum.lam, [2.0, 0.5])


def _check_basis(L, tol):
    M = L.entries
    n = L.n
    J = standard_J(n)
    b = adapted_basis(L)
    I = np.eye(2 * n)
    assert np.max(np.abs(b.A.T @ b.A - I)) <= tol
    assert np.max(np.abs(b.A_tilde.T @ b.A_tilde - I)) <= tol
    assert np.max(np.abs(b.A.T @ J @ b.A - J)) <= tol
    assert np.max(np.abs(M @ b.A - b.A_tilde * b.spectrum.lam[None, :])) <= tol * max(1.0, b.spectrum.lam.max())
    return b


def test_adapted_basis_random():
    _check_basis(random_symplectic(3, seed=2), 1e-9)


def test_adapted_basis_repeated_values():
    # two equal pairs plus an identity block: clusters of size 2 and a 2-dim V(1)
    L = np.diag([3.0, 1 / 3.0, 3.0, 1 / 3.0, 1.0, 1.0])
    Q = random_symplectic(3, seed=4).entries
    E = polar_isometry(Q)  # unitary: preserves J, changes the basis
    b = _check_basis(SymplecticMap(E @ L @ E.T), 1e-9)
    np.testing.assert_allclose(b.spectrum.lam, [3, 1 / 3, 3, 1 / 3, 1, 1], atol=1e-9)


def test_adapted_basis_error_carries_cluster():
    err = AdaptedBasisError("x", (1.0, 2.0))
    assert err.cluster == (1.0, 2.0)


def test_random_symplectic_examples():
    np.testing.assert_array_equal(random_symplectic(2, seed=1, spread=0.0).entries, np.eye(4))
    a, b = random_symplectic(2, seed=9), random_symplectic(2, seed=9)
    np.testing.assert_array_equal(a.entries, b.entries)
    assert is_symplectic(random_symplectic(2, seed=7, spread=0.5).entries, 1e-10)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 3), seed=st.integers(0, 2**31 - 1), spread=st.floats(0.0, 0.8))
def test_properties_random(n, seed, spread):
    L = random_symplectic(n, seed=seed, spread=spread)
    J = standard_J(n)
    lam = paired_singular_values(L).lam
    np.testing.assert_allclose(lam[0::2] * lam[1::2], 1.0, atol=1e-10)
    E = polar_isometry(L)
    assert np.max(np.abs(E.T @ E - np.eye(2 * n))) <= 1e-10
    assert np.max(np.abs(E @ J - J @ E)) <= 1e-10
    # inverse and transpose share the paired spectrum
    Linv = -J @ L.entries.T @ J
    for other in (Linv, L.entries.T):
        np.testing.assert_allclose(paired_singular_values(other).lam, lam, rtol=1e-10, atol=1e-10)
    # vectors from singular subspaces whose values do not multiply to 1 are J-orthogonal
    b = adapted_basis(L)
    lb = b.spectrum.lam
    G = b.A.T @ J @ b.A
    mask = np.abs(np.outer(lb, lb) - 1.0) > 1e-6
    assert np.max(np.abs(G[mask]), initial=0.0) <= 1e-9
