"""Linear symplectic algebra on R^{2n} with the standard complex structure.

Index convention: vectors and matrices are 0-based, but singular values are
stored in pairs ``(lam[2i], lam[2i+1])`` with ``lam[2i] * lam[2i+1] == 1``,
which is the 1-based pairing ``i' = i + (-1)**(i+1)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

DEFAULT_TOL = 1e-10

# SPD square root guards
_EIG_FLOOR = 1e-300
_MIN_REL_EIG = 1e-14

# relative gap below which singular values are treated as one subspace
CLUSTER_RTOL = 1e-8


class NotSymplecticError(ValueError):
    """Input matrix fails the linear symplectic condition."""


class PairingError(ValueError):
    """Singular values cannot be matched into reciprocal pairs."""


class AdaptedBasisError(ValueError):
    """Singular subspaces could not be split consistently."""

    def __init__(self, message: str, cluster: tuple[float, ...] = ()):
        super().__init__(message)
        self.cluster = cluster


def standard_J(n: int) -> np.ndarray:
    """Block diagonal complex structure with ``n`` blocks ``[[0, -1], [1, 0]]``."""
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    J = np.zeros((2 * n, 2 * n))
    idx = np.arange(0, 2 * n, 2)
    J[idx, idx + 1] = -1.0
    J[idx + 1, idx] = 1.0
    return J


def _half_dim(M: np.ndarray) -> int:
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if M.shape[0] % 2:
        raise ValueError(f"matrix size must be even, got {M.shape[0]}")
    if M.shape[0] == 0:
        raise ValueError("empty matrix")
    return M.shape[0] // 2


def is_symplectic(M, tol: float = DEFAULT_TOL) -> bool:
    """True iff ``max |M^T J M - J| <= tol``."""
    M = np.asarray(M, dtype=float)
    n = _half_dim(M)
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    J = standard_J(n)
    return bool(np.max(np.abs(M.T @ J @ M - J)) <= tol)


@dataclass(frozen=True)
class SymplecticMap:
    """A real ``2n x 2n`` matrix with ``L^T J L = J``.

    The check is done at construction with ``tol`` scaled by
    ``max(1, max|L|**2)`` so that well-conditioned but large-entried maps are
    not rejected for rounding.
    """

    entries: np.ndarray
    tol: float = DEFAULT_TOL
    n: int = field(init=False)

    def __post_init__(self):
        M = np.array(self.entries, dtype=float)
        n = _half_dim(M)
        scale = max(1.0, float(np.max(np.abs(M))) ** 2)
        if not np.all(np.isfinite(M)):
            raise NotSymplecticError("matrix has non-finite entries")
        if not is_symplectic(M, self.tol * scale):
            J = standard_J(n)
            err = float(np.max(np.abs(M.T @ J @ M - J)))
            raise NotSymplecticError(f"max|L^T J L - J| = {err:.3e} exceeds {self.tol * scale:.3e}")
        M.setflags(write=False)
        object.__setattr__(self, "entries", M)
        object.__setattr__(self, "n", n)

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.entries))


def _as_map(L) -> SymplecticMap:
    return L if isinstance(L, SymplecticMap) else SymplecticMap(np.asarray(L, dtype=float))


@dataclass(frozen=True)
class SingularSpectrum:
    """Paired singular values, ``lam[2i] >= 1`` and ``lam[2i] * lam[2i+1] == 1``."""

    lam: np.ndarray
    tol: float = 1e-8
    n: int = field(init=False)

    def __post_init__(self):
        lam = np.array(self.lam, dtype=float).ravel()
        if lam.size == 0 or lam.size % 2:
            raise ValueError(f"need an even, nonzero number of singular values, got {lam.size}")
        if not np.all(np.isfinite(lam)) or np.any(lam <= 0):
            raise ValueError("singular values must be finite and strictly positive")
        prod = lam[0::2] * lam[1::2]
        if np.max(np.abs(prod - 1.0)) > self.tol:
            raise ValueError(f"pair products {prod} differ from 1 by more than {self.tol}")
        if np.any(lam[0::2] < 1.0 - self.tol):
            raise ValueError("first entry of each pair must be >= 1")
        lam.setflags(write=False)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "n", lam.size // 2)

    @classmethod
    def from_large(cls, large) -> "SingularSpectrum":
        """Build ``(a, 1/a, b, 1/b, ...)`` from the values ``>= 1``."""
        large = np.asarray(large, dtype=float).ravel()
        lam = np.empty(2 * large.size)
        lam[0::2] = large
        lam[1::2] = 1.0 / large
        return cls(lam)

    @classmethod
    def from_log(cls, t) -> "SingularSpectrum":
        """Pairs ``(e^{t_i}, e^{-t_i})``, reordered so each pair leads with its larger value."""
        t = np.abs(np.asarray(t, dtype=float).ravel())
        return cls.from_large(np.exp(t))

    @classmethod
    def ones(cls, n: int) -> "SingularSpectrum":
        return cls(np.ones(2 * n))

    @property
    def large(self) -> np.ndarray:
        return self.lam[0::2]

    def __len__(self) -> int:
        return self.lam.size


@dataclass(frozen=True)
class AdaptedBasis:
    """Orthonormal source/target bases putting ``J`` in block form and ``L`` diagonal."""

    A: np.ndarray
    A_tilde: np.ndarray
    spectrum: SingularSpectrum


def polar_isometry(L) -> np.ndarray:
    """Orthogonal polar factor ``E = L (L^T L)^{-1/2}``."""
    L = _as_map(L).entries
    w, V = np.linalg.eigh(L.T @ L)
    if w[0] < _MIN_REL_EIG * w[-1]:
        raise np.linalg.LinAlgError(
            f"L^T L is numerically singular: eigenvalues span [{w[0]:.3e}, {w[-1]:.3e}]"
        )
    w = np.maximum(w, _EIG_FLOOR)
    inv_sqrt = (V / np.sqrt(w)) @ V.T
    return L @ inv_sqrt


def paired_singular_values(L, tol: float = 1e-8) -> SingularSpectrum:
    """Singular values of ``L`` arranged as canonical reciprocal pairs.

    The largest value is matched with the smallest, the second largest with
    the second smallest, and so on. The stored pair is the geometric
    symmetrisation ``(sqrt(s_hi/s_lo), sqrt(s_lo/s_hi))`` so the product is 1
    to rounding; the raw products must be within ``tol`` of 1.
    """
    L = _as_map(L)
    s = np.linalg.svd(L.entries, compute_uv=False)  # descending
    n = L.n
    hi, lo = s[:n], s[::-1][:n]
    prod = hi * lo
    bad = np.abs(prod - 1.0) > tol
    if np.any(bad):
        raise PairingError(f"singular values {s} do not pair reciprocally (products {prod})")
    return SingularSpectrum.from_large(np.sqrt(hi / lo))


def _log_groups(ell: np.ndarray, rtol: float) -> list[np.ndarray]:
    """Group indices whose ``|ell|`` values are chained by gaps of at most ``rtol``.

    A relative gap in singular values is an absolute gap in their logarithms,
    and reciprocal partners share ``|ell|``, so each group holds whole pairs.
    """
    order = np.argsort(np.abs(ell), kind="stable")
    a = np.abs(ell)[order]
    groups = [[order[0]]]
    for k in range(1, a.size):
        if a[k] - a[k - 1] <= rtol:
            groups[-1].append(order[k])
        else:
            groups.append([order[k]])
    return [np.array(g) for g in groups]


def adapted_basis(L, rtol: float = CLUSTER_RTOL) -> AdaptedBasis:
    """Orthonormal basis ``a_1, J a_1, a_3, J a_3, ...`` of singular vectors of ``L``.

    For each singular value ``alpha > 1`` an orthonormal basis ``u_k`` of its
    singular subspace is taken and paired with ``J u_k`` (which spans the
    ``1/alpha`` subspace). Inside the ``alpha = 1`` subspace, vectors are
    peeled off greedily as ``(u, J u)``.
    """
    Lm = _as_map(L)
    n = Lm.n
    M = Lm.entries
    J = standard_J(n)
    w, V = np.linalg.eigh(M.T @ M)
    if w[0] < _MIN_REL_EIG * w[-1]:
        raise AdaptedBasisError("L^T L is numerically singular", tuple(np.sqrt(np.maximum(w, 0.0))))
    ell = 0.5 * np.log(w)

    cols: list[np.ndarray] = []
    large: list[float] = []
    for grp in _log_groups(ell, rtol):
        vals = tuple(np.exp(ell[grp]))
        if np.min(np.abs(ell[grp])) <= rtol:
            W = V[:, grp]
            if W.shape[1] % 2:
                raise AdaptedBasisError(f"singular value 1 has odd multiplicity {W.shape[1]}", vals)
            while W.shape[1]:
                u = W[:, 0] / np.linalg.norm(W[:, 0])
                Ju = J @ u
                cols += [u, Ju]
                large.append(1.0)
                if W.shape[1] == 2:
                    break
                # orthonormal basis of the rest of the subspace, orthogonal to u and Ju
                R = W - np.outer(u, u @ W) - np.outer(Ju, Ju @ W)
                U_, _, _ = np.linalg.svd(R, full_matrices=False)
                W = U_[:, : W.shape[1] - 2]
            continue
        pos = grp[ell[grp] > 0]
        neg = grp[ell[grp] < 0]
        if pos.size != neg.size:
            raise AdaptedBasisError(
                f"cannot split singular subspaces: {pos.size} values above 1 and {neg.size} below", vals
            )
        alpha = float(np.exp(0.5 * (np.mean(ell[pos]) - np.mean(ell[neg]))))
        for u in V[:, pos].T:
            cols += [u, J @ u]
            large.append(alpha)

    if len(large) != n:
        raise AdaptedBasisError(f"built {len(large)} pairs, expected {n}", tuple(np.exp(ell)))
    # canonical order: pairs descending by their large value
    perm = np.argsort(-np.asarray(large), kind="stable")
    A = np.column_stack([cols[2 * k + r] for k in perm for r in (0, 1)])
    spectrum = SingularSpectrum.from_large(np.asarray(large)[perm])
    E = polar_isometry(Lm)
    return AdaptedBasis(A=A, A_tilde=E @ A, spectrum=spectrum)


def random_symplectic(n: int, seed: int = 0, spread: float = 1.0) -> SymplecticMap:
    """``exp(J S)`` for a seeded random symmetric ``S`` scaled by ``spread``."""
    if spread < 0:
        raise ValueError("spread must be nonnegative")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((2 * n, 2 * n))
    S = 0.5 * (X + X.T) * spread
    return SymplecticMap(expm(standard_J(n) @ S))
