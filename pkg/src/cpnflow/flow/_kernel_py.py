"""Numpy implementation of the embedded frame fields and the explicit graph-gauge step.

The surface is ``F(theta, phi) = (p(theta, phi), q(Theta(theta), phi + g(theta)))``
in the product of unit spheres in R^6. By rotational equivariance everything
is evaluated on the meridian ``phi = 0``.
"""
from __future__ import annotations

import numpy as np

OK = 0
NONFINITE = 1
GRAPH_LOST = 2


def profile_derivatives(theta, Theta, g):
    """Centered differences of ``Theta`` and ``g`` with reflected ghosts at the poles.

    Ghosts: ``Theta(-theta) = -Theta(theta)``, ``Theta(pi + x) = 2 pi - Theta(pi - x)``
    and ``g`` even about both poles.
    """
    h = theta[1] - theta[0]
    Tg = np.concatenate(([-Theta[1]], Theta, [2.0 * np.pi - Theta[-2]]))
    gg = np.concatenate(([g[1]], g, [g[-2]]))
    T1 = (Tg[2:] - Tg[:-2]) / (2.0 * h)
    T2 = (Tg[2:] - 2.0 * Tg[1:-1] + Tg[:-2]) / (h * h)
    g1 = (gg[2:] - gg[:-2]) / (2.0 * h)
    g2 = (gg[2:] - 2.0 * gg[1:-1] + gg[:-2]) / (h * h)
    return T1, T2, g1, g2


def _dot(a, b):
    return np.einsum("ij,ij->i", a, b)


def frame_fields(theta, Theta, g) -> dict:
    """Embedding, tangent vectors, metric, second fundamental form and mean curvature.

    Returned ``II`` maps ``"tt", "tf", "ff"`` to the normal parts of the
    second coordinate derivatives. ``H`` is set to zero at the poles, where
    the flow leaves the fixed points untouched.
    """
    theta = np.asarray(theta, dtype=float)
    T1, T2, g1, g2 = profile_derivatives(theta, Theta, g)
    s, c = np.sin(theta), np.cos(theta)
    S, C = np.sin(Theta), np.cos(Theta)
    sg, cg = np.sin(g), np.cos(g)
    z = np.zeros_like(theta)
    st = lambda *a: np.stack(a, axis=-1)

    p, pt, pf = st(s, z, c), st(c, z, -s), st(z, s, z)
    ptt, ptf, pff = -p, st(z, c, z), st(-s, z, z)
    q, qT, qP = st(S * cg, S * sg, C), st(C * cg, C * sg, -S), st(-S * sg, S * cg, z)
    qTT, qTP, qPP = -q, st(-C * sg, C * cg, z), st(-S * cg, -S * sg, z)
    col = lambda a: a[:, None]

    Ft = np.concatenate([pt, col(T1) * qT + col(g1) * qP], -1)
    Ff = np.concatenate([pf, qP], -1)
    Ftt = np.concatenate(
        [ptt, col(T2) * qT + col(g2) * qP + col(T1 * T1) * qTT + col(2 * T1 * g1) * qTP + col(g1 * g1) * qPP], -1
    )
    Ftf = np.concatenate([ptf, col(T1) * qTP + col(g1) * qPP], -1)
    Fff = np.concatenate([pff, qPP], -1)

    G00, G01, G11 = _dot(Ft, Ft), _dot(Ft, Ff), _dot(Ff, Ff)
    det = G00 * G11 - G01 * G01
    det_safe = det.copy()
    det_safe[[0, -1]] = 1.0
    Gi00, Gi01, Gi11 = G11 / det_safe, -G01 / det_safe, G00 / det_safe

    def sphere_proj(v):
        v1, v2 = v[:, :3], v[:, 3:]
        return np.concatenate([v1 - col(_dot(v1, p)) * p, v2 - col(_dot(v2, q)) * q], -1)

    def normal_proj(v):
        a, b = _dot(v, Ft), _dot(v, Ff)
        return v - col(Gi00 * a + Gi01 * b) * Ft - col(Gi01 * a + Gi11 * b) * Ff

    II = {k: normal_proj(sphere_proj(v)) for k, v in (("tt", Ftt), ("tf", Ftf), ("ff", Fff))}
    H = col(Gi00) * II["tt"] + col(2 * Gi01) * II["tf"] + col(Gi11) * II["ff"]
    H[[0, -1]] = 0.0
    return {
        "p": p, "q": q, "pt": pt, "pf": pf, "Ft": Ft, "Ff": Ff,
        "G": (G00, G01, G11), "Gi": (Gi00, Gi01, Gi11), "det": det,
        "II": II, "H": H, "T1": T1, "g1": g1,
    }


def graph_gauge_speed(theta, fields) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients ``(alpha, beta)`` with ``H - alpha F_theta - beta F_phi`` fixing the first factor."""
    H = fields["H"]
    s2 = np.sin(theta) ** 2
    alpha = _dot(H[:, :3], fields["pt"])
    beta = np.zeros_like(alpha)
    beta[1:-1] = _dot(H[1:-1, :3], fields["pf"][1:-1]) / s2[1:-1]
    return alpha, beta


def step(theta, Theta, g, dt):
    """One explicit Euler step; returns new ``(Theta, g)`` arrays."""
    f = frame_fields(theta, Theta, g)
    alpha, beta = graph_gauge_speed(theta, f)
    V2 = f["H"][:, 3:] - alpha[:, None] * f["Ft"][:, 3:] - beta[:, None] * f["Ff"][:, 3:]
    q = f["q"] + dt * V2
    q /= np.linalg.norm(q, axis=-1)[:, None]
    Tn = np.arctan2(np.hypot(q[:, 0], q[:, 1]), q[:, 2])
    d = np.arctan2(q[:, 1], q[:, 0]) - g
    gn = g + np.arctan2(np.sin(d), np.cos(d))
    Tn[0], Tn[-1] = 0.0, np.pi
    # even reflection at the poles: one-sided second-order zero slope
    gn[0] = (4.0 * gn[1] - gn[2]) / 3.0
    gn[-1] = (4.0 * gn[-2] - gn[-3]) / 3.0
    return Tn, gn


def advance(theta, Theta, g, dt, nsteps):
    """Take ``nsteps`` steps in place. Returns ``(status, steps_done)``.

    On failure ``Theta`` and ``g`` hold the last good state.
    """
    theta = np.asarray(theta, dtype=float)
    for k in range(int(nsteps)):
        Tn, gn = step(theta, Theta, g, dt)
        if not (np.all(np.isfinite(Tn)) and np.all(np.isfinite(gn))):
            return NONFINITE, k
        if not np.all(np.diff(Tn) > 0):
            return GRAPH_LOST, k
        Theta[:] = Tn
        g[:] = gn
    return OK, int(nsteps)
