"""Quadratic forms on fully symmetric 3-tensors and the pinching constant.

A symmetric tensor ``h_ijk`` on R^{2n} is stored by its canonical components
``i <= j <= k`` (0-based). A :class:`QFormMatrix` is written in those
coordinates with ordered-index multiplicities folded in, so ``v @ mat @ v``
equals the form evaluated as a sum over all ordered index triples.

Pairing: 0-based index ``i`` is partnered with ``i ^ 1``; even indices play
the role of the "odd" (first) member of each pair.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg

from .sympl_core import SingularSpectrum

# which box of singular values defines Lambda-pinching (see delta_box)
BOXES = ("singular", "metric")


def n_coords(n: int) -> int:
    """Number of canonical components of a symmetric 3-tensor on R^{2n}."""
    m = 2 * n
    return m * (m + 1) * (m + 2) // 6


@lru_cache(maxsize=None)
def canonical_triples(n: int) -> tuple[tuple[int, int, int], ...]:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return tuple(itertools.combinations_with_replacement(range(2 * n), 3))


@lru_cache(maxsize=None)
def _index_map(n: int) -> dict:
    return {t: c for c, t in enumerate(canonical_triples(n))}


def multiplicities(n: int) -> np.ndarray:
    """Number of ordered triples represented by each canonical component (1, 3 or 6)."""
    return np.array([len(set(itertools.permutations(t))) for t in canonical_triples(n)], dtype=float)


def _c(n: int, i: int, j: int, k: int) -> int:
    return _index_map(n)[tuple(sorted((i, j, k)))]


@dataclass(frozen=True)
class SymTensor3:
    """Fully symmetric 3-tensor stored by canonical components."""

    n: int
    coeffs: np.ndarray

    def __post_init__(self):
        v = np.array(self.coeffs, dtype=float).ravel()
        if v.size != n_coords(self.n):
            raise ValueError(f"expected {n_coords(self.n)} coefficients for n={self.n}, got {v.size}")
        v.setflags(write=False)
        object.__setattr__(self, "coeffs", v)

    @classmethod
    def from_full(cls, H, tol: float = 1e-12) -> "SymTensor3":
        H = np.asarray(H, dtype=float)
        m = H.shape[0]
        if H.shape != (m, m, m) or m % 2:
            raise ValueError(f"bad tensor shape {H.shape}")
        for perm in itertools.permutations(range(3)):
            if np.max(np.abs(H - H.transpose(perm))) > tol:
                raise ValueError("tensor is not fully symmetric")
        n = m // 2
        return cls(n, np.array([H[t] for t in canonical_triples(n)]))

    @classmethod
    def from_components(cls, n: int, comps: dict) -> "SymTensor3":
        """Build from ``{(i, j, k): value}`` with 0-based indices in any order."""
        v = np.zeros(n_coords(n))
        for key, val in comps.items():
            v[_c(n, *key)] = val
        return cls(n, v)

    def full(self) -> np.ndarray:
        m = 2 * self.n
        H = np.zeros((m, m, m))
        for val, t in zip(self.coeffs, canonical_triples(self.n)):
            for p in itertools.permutations(t):
                H[p] = val
        return H


@dataclass(frozen=True)
class QFormMatrix:
    """Symmetric matrix of a quadratic form in canonical tensor coordinates."""

    n: int
    mat: np.ndarray
    label: str = ""
    m: int = field(init=False)

    def __post_init__(self):
        M = np.array(self.mat, dtype=float)
        m = n_coords(self.n)
        if M.shape != (m, m):
            raise ValueError(f"expected a {m}x{m} matrix for n={self.n}, got {M.shape}")
        if np.max(np.abs(M - M.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(M), initial=0.0)):
            raise ValueError("form matrix is not symmetric")
        M = 0.5 * (M + M.T)
        M.setflags(write=False)
        object.__setattr__(self, "mat", M)
        object.__setattr__(self, "m", m)

    def __call__(self, h) -> float:
        v = h.coeffs if isinstance(h, SymTensor3) else np.asarray(h, dtype=float)
        return float(v @ self.mat @ v)

    def __add__(self, other: "QFormMatrix") -> "QFormMatrix":
        if other.n != self.n:
            raise ValueError("dimension mismatch")
        return QFormMatrix(self.n, self.mat + other.mat)


class _Builder:
    """Accumulates ``coef * h[a] * h[b]`` terms (ordered index triples) into a matrix."""

    def __init__(self, n: int):
        self.n = n
        self.idx = _index_map(n)
        self.M = np.zeros((n_coords(n), n_coords(n)))

    def add(self, coef: float, a, b):
        ca = self.idx[tuple(sorted(a))]
        cb = self.idx[tuple(sorted(b))]
        self.M[ca, cb] += 0.5 * coef
        self.M[cb, ca] += 0.5 * coef


def _partner(i: int) -> int:
    return i ^ 1


def _check_spectrum(spectrum) -> SingularSpectrum:
    if not isinstance(spectrum, SingularSpectrum):
        spectrum = SingularSpectrum(spectrum)
    return spectrum


@lru_cache(maxsize=None)
def _route_a_parts(n: int):
    """Constant part and the coefficient matrices of each ``lam_i * lam_j``."""
    m = 2 * n
    base = _Builder(n)
    for i, j, k in itertools.product(range(m), repeat=3):
        base.add(1.0, (i, j, k), (i, j, k))
    for k in range(m):
        for i in range(0, m, 2):
            p = _partner(i)
            base.add(-2.0, (i, i, k), (p, p, k))
            base.add(2.0, (i, p, k), (i, p, k))
    pairs, mats = [], []
    for i in range(m):
        for j in range(i + 1, m):
            if j == _partner(i):
                continue
            b = _Builder(n)
            sign = -1.0 if (i + j) % 2 else 1.0
            pi, pj = _partner(i), _partner(j)
            for k in range(m):
                b.add(-2.0 * sign, (pi, i, k), (pj, j, k))
                b.add(2.0 * sign, (pi, j, k), (pj, i, k))
            pairs.append((i, j))
            mats.append(b.M)
    base_m = base.M
    base_m.setflags(write=False)
    stack = np.array(mats) if mats else np.zeros((0, n_coords(n), n_coords(n)))
    stack.setflags(write=False)
    return base_m, np.array(pairs, dtype=int).reshape(-1, 2), stack


def _q_matrix_a(n: int, lam: np.ndarray) -> np.ndarray:
    base, pairs, stack = _route_a_parts(n)
    if pairs.size == 0:
        return base.copy()
    w = lam[pairs[:, 0]] * lam[pairs[:, 1]]
    return base + np.tensordot(w, stack, axes=1)


def _q_matrix_a_batch(n: int, lams: np.ndarray) -> np.ndarray:
    """Route A matrices for a batch of spectra, shape (B, m, m)."""
    base, pairs, stack = _route_a_parts(n)
    if pairs.size == 0:
        return np.broadcast_to(base, (lams.shape[0],) + base.shape).copy()
    w = lams[:, pairs[:, 0]] * lams[:, pairs[:, 1]]
    return base[None] + np.tensordot(w, stack, axes=1)


def _q_matrix_b(n: int, lam: np.ndarray) -> np.ndarray:
    """Direct assembly of the regrouped form sorted by pairs of pairs."""
    m = 2 * n
    b = _Builder(n)
    for i, j, k in itertools.product(range(m), repeat=3):
        b.add(1.0, (i, j, k), (i, j, k))
    for k in range(m):
        for i in range(0, m, 2):
            p = _partner(i)
            b.add(-2.0, (i, i, k), (p, p, k))
            b.add(2.0, (i, p, k), (i, p, k))
        for i in range(0, m, 2):
            for j in range(i + 2, m, 2):
                ip, jp = i + 1, j + 1
                b.add(-2.0 * (lam[i] - lam[ip]) * (lam[j] - lam[jp]), (ip, i, k), (jp, j, k))
                b.add(2.0 * (lam[i] * lam[j] + lam[ip] * lam[jp]), (ip, j, k), (jp, i, k))
                b.add(-2.0 * (lam[ip] * lam[j] + lam[i] * lam[jp]), (i, j, k), (jp, ip, k))
    return b.M


def assemble_Q(spectrum, route: str = "evolution") -> QFormMatrix:
    """Matrix of ``Q(lam, .)``.

    ``route="evolution"`` sums over index pairs ``i < j`` with alternating
    signs; ``route="grouped"`` uses the form regrouped by pairs of pairs.
    The two must agree; both are kept so tests can cross-check them.
    """
    sp = _check_spectrum(spectrum)
    if route == "evolution":
        M = _q_matrix_a(sp.n, sp.lam)
    elif route == "grouped":
        M = _q_matrix_b(sp.n, sp.lam)
    else:
        raise ValueError(f"unknown route {route!r}")
    return QFormMatrix(sp.n, M, label=f"Q[{route}]")


def gradient_term_matrix(spectrum) -> np.ndarray:
    """Matrix of ``sum_k [sum_{i even} (lam_i - lam_{i+1}) h_{i,i+1,k}]^2``."""
    sp = _check_spectrum(spectrum)
    n, m = sp.n, 2 * sp.n
    M = np.zeros((n_coords(n), n_coords(n)))
    for k in range(m):
        row = np.zeros(n_coords(n))
        for i in range(0, m, 2):
            row[_c(n, i, i + 1, k)] += sp.lam[i] - sp.lam[i + 1]
        M += np.outer(row, row)
    return M


def assemble_Qtilde(spectrum) -> QFormMatrix:
    """``Q`` plus the squared gradient term of the logarithmic evolution."""
    sp = _check_spectrum(spectrum)
    return QFormMatrix(sp.n, _q_matrix_a(sp.n, sp.lam) + gradient_term_matrix(sp), label="Qtilde")


def norm_matrix(n: int) -> QFormMatrix:
    """``sum_i h_iii^2 + sum_{i!=j} h_ijj^2 + sum_{i<j<k} h_ijk^2``: identity in canonical coordinates."""
    return QFormMatrix(n, np.eye(n_coords(n)), label="norm")


def ordered_sum_matrix(n: int) -> QFormMatrix:
    """``sum_{i,j,k} h_ijk^2`` over all ordered triples."""
    return QFormMatrix(n, np.diag(multiplicities(n)), label="ordered_sum")


def _block_terms(n: int):
    """Expressions of the three invariant blocks at ``lam = 1`` as (coef, a, b) terms.

    Index letters follow the block formulas: ``i, j, k`` run over first members
    of distinct pairs in increasing order and ``I, J, K`` are their partners.
    """
    m = 2 * n
    first = range(0, m, 2)
    q1, q2, q3 = [], [], []

    def sq(out, c, t):
        out.append((c, t, t))

    for i in first:
        I = i + 1
        sq(q1, 1, (i, i, i))
        sq(q1, 1, (I, I, I))
        sq(q1, 5, (i, I, I))
        sq(q1, 5, (I, i, i))
        q1.append((-2, (i, i, i), (I, I, i)))
        q1.append((-2, (i, i, I), (I, I, I)))

    for i, j in itertools.combinations(first, 2):
        I, J = i + 1, j + 1
        for t in [(i, j, j), (i, J, J), (I, j, j), (I, J, J), (j, i, i), (J, i, i), (j, I, I), (J, I, I)]:
            sq(q2, 3, t)
        for t in [(i, I, j), (i, I, J), (i, j, J), (I, j, J)]:
            sq(q2, 8, t)
        q2 += [
            (-2, (i, i, j), (I, I, j)), (-2, (i, i, J), (I, I, J)),
            (-2, (j, j, i), (J, J, i)), (-2, (j, j, I), (J, J, I)),
            (4, (I, j, i), (J, i, i)), (-4, (i, j, i), (J, I, i)),
            (4, (I, j, I), (J, i, I)), (-4, (i, j, I), (J, I, I)),
            (4, (I, j, j), (J, i, j)), (-4, (i, j, j), (J, I, j)),
            (4, (I, j, J), (J, i, J)), (-4, (i, j, J), (J, I, J)),
        ]

    for i, j, k in itertools.combinations(first, 3):
        I, J, K = i + 1, j + 1, k + 1
        for t in itertools.product((i, I), (j, J), (k, K)):
            sq(q3, 6, t)
        q3 += [
            (4, (J, k, i), (K, j, i)), (-4, (j, k, i), (K, J, i)),
            (4, (J, k, I), (K, j, I)), (-4, (j, k, I), (K, J, I)),
            (4, (I, k, j), (K, i, j)), (-4, (i, k, j), (K, I, j)),
            (4, (I, k, J), (K, i, J)), (-4, (i, k, J), (K, I, J)),
            (4, (I, j, k), (J, i, k)), (-4, (i, j, k), (J, I, k)),
            (4, (I, j, K), (J, i, K)), (-4, (i, j, K), (J, I, K)),
        ]
    return q1, q2, q3


@lru_cache(maxsize=None)
def _blocks(n: int):
    out = []
    for terms in _block_terms(n):
        b = _Builder(n)
        for coef, a, c in terms:
            b.add(float(coef), a, c)
        out.append(b.M)
    return tuple(out)


def block_decomposition_at_one(n: int) -> tuple[QFormMatrix, QFormMatrix, QFormMatrix]:
    """The three invariant blocks of ``Q(1, .)``, assembled from their closed-form expressions.

    Block 1 touches only components inside one pair, block 2 components
    spread over exactly two pairs, block 3 over three pairs.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return tuple(QFormMatrix(n, M.copy(), label=f"block{r + 1}") for r, M in enumerate(_blocks(n)))


def pair_count(n: int) -> np.ndarray:
    """Number of distinct pairs touched by each canonical component."""
    return np.array([len({i // 2 for i in t}) for t in canonical_triples(n)])


def min_eig_ratio(Qm: QFormMatrix, Nm: QFormMatrix) -> float:
    """Smallest generalized eigenvalue of ``Qm`` relative to positive definite ``Nm``."""
    if Qm.n != Nm.n:
        raise ValueError("dimension mismatch")
    try:
        scipy.linalg.cholesky(Nm.mat)
    except np.linalg.LinAlgError as exc:
        raise ValueError("reference form is not positive definite") from exc
    w = scipy.linalg.eigh(Qm.mat, Nm.mat, eigvals_only=True)
    return float(w[0])


# ---------------------------------------------------------------------------
# pinching search

@dataclass(frozen=True)
class DeltaEstimate:
    """Upper estimate of the box minimum of the smallest eigenvalue."""

    n: int
    Lambda: float
    delta: float
    minimizing_lambda: np.ndarray
    grid_steps: int
    box: str


@dataclass(frozen=True)
class Lambda0Result:
    """Bisection outcome; ``lambda0`` is None when the form stays positive up to ``cap``."""

    n: int
    lambda0: float | None
    tol: float
    cap: float
    grid_steps: int
    box: str
    minimizing_lambda: np.ndarray | None
    bracket: tuple[float, float]

    @property
    def exceeds_cap(self) -> bool:
        return self.lambda0 is None

    def to_record(self) -> dict:
        return {
            "n": self.n,
            "lambda0": "exceeds cap" if self.lambda0 is None else self.lambda0,
            "tol": self.tol,
            "cap": self.cap,
            "grid_steps": self.grid_steps,
            "box": self.box,
            "bracket": list(self.bracket),
            "minimizing_lambda": None if self.minimizing_lambda is None else self.minimizing_lambda.tolist(),
        }


def _log_radius(Lambda: float, box: str) -> float:
    if box == "singular":
        return math.log(Lambda)
    if box == "metric":
        return 0.5 * math.log(Lambda)
    raise ValueError(f"box must be one of {BOXES}, got {box!r}")


def _lams_from_t(T: np.ndarray) -> np.ndarray:
    T = np.atleast_2d(T)
    lam = np.empty((T.shape[0], 2 * T.shape[1]))
    lam[:, 0::2] = np.exp(T)
    lam[:, 1::2] = np.exp(-T)
    return lam


def _min_eigs(n: int, T: np.ndarray, chunk: int = 4096) -> np.ndarray:
    """Smallest eigenvalue of Q relative to the ordered-sum norm for each row of T."""
    scale = 1.0 / np.sqrt(multiplicities(n))
    out = np.empty(T.shape[0])
    for s in range(0, T.shape[0], chunk):
        M = _q_matrix_a_batch(n, _lams_from_t(T[s : s + chunk]))
        M *= scale[None, :, None] * scale[None, None, :]
        out[s : s + chunk] = np.linalg.eigvalsh(M)[:, 0]
    return out


def _grid(n: int, r: float, steps: int, reduce: bool) -> np.ndarray:
    axis = np.linspace(-r, r, steps)
    if not reduce:
        return np.array(list(itertools.product(axis, repeat=n)))
    # sign flips of individual t_i and permutations of pairs leave the spectrum
    # of Q unchanged, so 0 <= t_1 <= ... <= t_n suffices
    half = axis[axis >= -1e-15 * max(r, 1.0)]
    half = np.abs(half)
    return np.array(list(itertools.combinations_with_replacement(half, n)))


def delta_box(
    n: int,
    Lambda: float,
    grid_steps: int = 33,
    box: str = "singular",
    refine: bool = True,
    reduce: bool = True,
) -> DeltaEstimate:
    """Minimum over the pinched box of the smallest eigenvalue of ``Q(lam, .)``.

    The eigenvalue is taken relative to the ordered-sum norm. Spectra are
    parametrized as ``lam = (e^{t_1}, e^{-t_1}, ...)`` with each ``|t_i| <= r``;
    ``box="singular"`` bounds the singular values, ``r = ln Lambda``, and
    ``box="metric"`` bounds the eigenvalues of ``L^T L``, ``r = ln Lambda / 2``.
    A grid scan is followed by coordinate descent from the best grid point.
    """
    if not Lambda >= 1.0:
        raise ValueError(f"Lambda must be >= 1, got {Lambda}")
    if int(grid_steps) != grid_steps or grid_steps < 1:
        raise ValueError("grid_steps must be a positive integer")
    grid_steps = int(grid_steps)
    r = _log_radius(Lambda, box)
    T = _grid(n, r, grid_steps, reduce)
    vals = _min_eigs(n, T)
    best = int(np.argmin(vals))
    t_best, d_best = T[best].copy(), float(vals[best])

    if refine and r > 0 and n > 1:
        h = 2 * r / max(grid_steps - 1, 1)
        lo = 0.0 if reduce else -r
        while h > 1e-10 * max(r, 1.0):
            improved = False
            cand = []
            for i in range(n):
                for s in (-h, h):
                    t = t_best.copy()
                    t[i] = min(max(t[i] + s, lo), r)
                    cand.append(t)
            cand = np.array(cand)
            cv = _min_eigs(n, cand)
            j = int(np.argmin(cv))
            if cv[j] < d_best - 1e-15:
                t_best, d_best, improved = cand[j], float(cv[j]), True
            if not improved:
                h *= 0.5
    lam = _lams_from_t(t_best)[0]
    return DeltaEstimate(n, float(Lambda), d_best, lam, grid_steps, box)


def lambda0(
    n: int,
    tol: float = 1e-4,
    cap: float = 16.0,
    grid_steps: int = 33,
    box: str = "singular",
) -> Lambda0Result:
    """Largest ``Lambda`` in ``[1, cap]`` with a nonnegative box minimum, by bisection."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    if not cap > 1:
        raise ValueError("cap must exceed 1")
    d_cap = delta_box(n, cap, grid_steps, box)
    if d_cap.delta > 0:
        return Lambda0Result(n, None, tol, cap, grid_steps, box, d_cap.minimizing_lambda, (cap, math.inf))
    lo, hi = 1.0, float(cap)
    est_hi = d_cap
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        est = delta_box(n, mid, grid_steps, box)
        if est.delta > 0:
            lo = mid
        else:
            hi, est_hi = mid, est
    return Lambda0Result(n, 0.5 * (lo + hi), tol, cap, grid_steps, box, est_hi.minimizing_lambda, (lo, hi))
