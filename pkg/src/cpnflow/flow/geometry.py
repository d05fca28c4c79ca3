"""Per-point geometry of an equivariant graph and flow diagnostics."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from ._kernel_py import frame_fields, graph_gauge_speed
from .state import FlowState


@dataclass(frozen=True)
class SliceGeometry:
    """Pointwise quantities along the meridian ``phi = 0``.

    ``star_omega`` is the Jacobian ``1/sqrt((1 + s1^2)(1 + s2^2))`` of the
    projection to the first factor, with ``s1 >= s2`` the singular values of
    ``df``; for an area-preserving map it equals ``1/(lam + 1/lam)``.
    """

    theta: np.ndarray
    lam: np.ndarray
    lam_small: np.ndarray
    star_omega: np.ndarray
    sff_norm: np.ndarray
    mean_curvature_norm: np.ndarray
    area_element: np.ndarray
    symplectic_residual: np.ndarray
    total_area: float


def _pole_fill(v: np.ndarray) -> np.ndarray:
    """Replace pole values of an even function of the pole distance by quadratic extrapolation."""
    v = v.copy()
    v[0] = (4.0 * v[1] - v[2]) / 3.0
    v[-1] = (4.0 * v[-2] - v[-3]) / 3.0
    return v


def differential(state: FlowState, fields=None) -> np.ndarray:
    """``df`` in orthonormal frames ``(d/dtheta, d/dphi / sin)`` of both spheres, shape (N+1, 2, 2)."""
    th = state.theta_grid
    f = fields if fields is not None else frame_fields(th, state.Theta, state.g)
    T1, g1 = f["T1"], f["g1"]
    S = np.sin(state.Theta)
    ratio = np.empty_like(th)
    ratio[1:-1] = S[1:-1] / np.sin(th[1:-1])
    ratio[0], ratio[-1] = T1[0], T1[-1]
    df = np.zeros((th.size, 2, 2))
    df[:, 0, 0] = T1
    df[:, 1, 0] = g1 * S
    df[:, 1, 1] = ratio
    return df


def _sff_norm_sq(f) -> np.ndarray:
    Gi00, Gi01, Gi11 = f["Gi"]
    II = f["II"]
    ip = lambda a, b: np.einsum("ij,ij->i", II[a], II[b])
    return (
        Gi00**2 * ip("tt", "tt")
        + 4 * Gi00 * Gi01 * ip("tt", "tf")
        + 2 * Gi01**2 * ip("tt", "ff")
        + 2 * (Gi00 * Gi11 + Gi01**2) * ip("tf", "tf")
        + 4 * Gi11 * Gi01 * ip("tf", "ff")
        + Gi11**2 * ip("ff", "ff")
    )


def total_area(theta: np.ndarray, area_element: np.ndarray) -> float:
    """``2 pi`` times the trapezoid integral of the area element over theta."""
    h = theta[1] - theta[0]
    return float(2.0 * math.pi * h * (area_element.sum() - 0.5 * (area_element[0] + area_element[-1])))


def geometry(state: FlowState) -> SliceGeometry:
    """Singular values, projection Jacobian, curvature norms and area of a state."""
    if not state.graph_ok():
        from .state import FlowFailure

        raise FlowFailure("state violates the graph condition", state)
    th = state.theta_grid
    f = frame_fields(th, state.Theta, state.g)
    sv = np.linalg.svd(differential(state, f), compute_uv=False)
    s1, s2 = sv[:, 0], sv[:, 1]
    star = 1.0 / np.sqrt((1.0 + s1 * s1) * (1.0 + s2 * s2))
    w = np.sqrt(np.maximum(f["det"], 0.0))
    w[[0, -1]] = 0.0
    sff = np.sqrt(np.maximum(_pole_fill(_sff_norm_sq(f)), 0.0))
    Hn = np.linalg.norm(f["H"], axis=1)
    Hn = np.abs(_pole_fill(Hn))
    return SliceGeometry(
        theta=th,
        lam=s1,
        lam_small=s2,
        star_omega=star,
        sff_norm=sff,
        mean_curvature_norm=Hn,
        area_element=w,
        symplectic_residual=np.abs(s1 * s2 - 1.0),
        total_area=total_area(th, w),
    )


def _second_fundamental_tensor(state: FlowState, f, df):
    """``h_ijk = <II(e_i, e_j), J e_k>`` in the adapted frame, plus the top singular value.

    ``e_1`` is the graph of the top right singular vector ``a`` of ``df``
    and ``e_2`` that of ``J a``, each normalized. ``J`` acts on the product as
    ``(u, v) -> (p x u, -q x v)``.
    """
    th = state.theta_grid
    N1 = th.size
    _, sv, Vt = np.linalg.svd(df)
    a1 = Vt[:, 0, :]
    a2 = np.stack([-a1[:, 1], a1[:, 0]], axis=-1)
    s = np.sin(th)
    s_safe = s.copy()
    s_safe[[0, -1]] = 1.0
    coords, vecs = [], []
    for a in (a1, a2):
        img = np.einsum("nij,nj->ni", df, a)
        scale = 1.0 / np.sqrt(1.0 + np.sum(img * img, axis=1))
        c = np.stack([a[:, 0], a[:, 1] / s_safe], axis=-1) * scale[:, None]
        coords.append(c)
        vecs.append(c[:, :1] * f["Ft"] + c[:, 1:] * f["Ff"])
    p, q = f["p"], f["q"]
    Jv = [np.concatenate([np.cross(p, e[:, :3]), -np.cross(q, e[:, 3:])], axis=1) for e in vecs]
    II = f["II"]
    h = np.zeros((N1, 2, 2, 2))
    for i in range(2):
        for j in range(2):
            ci, cj = coords[i], coords[j]
            v = (
                (ci[:, 0] * cj[:, 0])[:, None] * II["tt"]
                + (ci[:, 0] * cj[:, 1] + ci[:, 1] * cj[:, 0])[:, None] * II["tf"]
                + (ci[:, 1] * cj[:, 1])[:, None] * II["ff"]
            )
            for k in range(2):
                h[:, i, j, k] = np.einsum("nx,nx->n", v, Jv[k])
    return h, sv[:, 0]


def _q_surface(h: np.ndarray) -> np.ndarray:
    """The quadratic form at ``n = 1``; it does not depend on the singular values."""
    return np.sum(h * h, axis=(1, 2, 3)) - 2.0 * np.sum(
        h[:, 0, 0, :] * h[:, 1, 1, :] - h[:, 0, 1, :] ** 2, axis=1
    )


def _laplacian(theta, f, u):
    """Surface Laplacian of a phi-independent function, conservative half-point fluxes."""
    h = theta[1] - theta[0]
    w = np.sqrt(np.maximum(f["det"], 0.0))
    w[[0, -1]] = 0.0
    flux = w * f["Gi"][0]
    flux[[0, -1]] = 0.0
    fh = 0.5 * (flux[1:] + flux[:-1]) * (u[1:] - u[:-1]) / h
    lap = np.zeros_like(u)
    lap[1:-1] = (fh[1:] - fh[:-1]) / (h * w[1:-1])
    return lap


def evolution_residual(history, dt: float | None = None, interior_only: bool = True) -> float:
    """Max residual of the evolution identity for the projection Jacobian.

    ``history`` is three states equally spaced in time. The identity is
    ``d/dt *Omega = Laplacian *Omega + *Omega (Q + B)`` with ``B`` the curvature
    term; the time derivative is taken at fixed theta, so the tangential
    drift of the graph gauge is added back as ``alpha d/dtheta *Omega``.
    """
    s0, s1, s2 = history
    if dt is None:
        dt = 0.5 * (s2.t - s0.t)
        if not dt > 0 or abs((s1.t - s0.t) - (s2.t - s1.t)) > 1e-9 * max(dt, 1e-300) + 1e-15:
            raise ValueError("states must be equally spaced in time")
    th = s1.theta_grid
    star_m = geometry(s0).star_omega
    star_p = geometry(s2).star_omega
    f = frame_fields(th, s1.Theta, s1.g)
    g1 = geometry(s1)
    star = g1.star_omega
    dstar_dt = (star_p - star_m) / (2.0 * dt)
    alpha, _ = graph_gauge_speed(th, f)
    hstep = th[1] - th[0]
    dstar_dth = np.zeros_like(star)
    dstar_dth[1:-1] = (star[2:] - star[:-2]) / (2.0 * hstep)
    lap = _laplacian(th, f, star)
    h, lam = _second_fundamental_tensor(s1, f, differential(s1, f))
    Q = _q_surface(h)
    l2 = lam * lam
    B = ((1.0 - l2) / (1.0 + l2)) ** 2
    r = dstar_dt + alpha * dstar_dth - lap - star * (Q + B)
    if interior_only:
        r = r[1:-1]
    return float(np.max(np.abs(r)))


def gaussian_density(
    state: FlowState,
    center,
    t0: float,
    refine: int = 4,
    n_phi: int = 64,
) -> float:
    """Backward heat kernel density of the surface in R^6.

    ``(4 pi tau)^-1 * integral exp(-|F - y0|^2 / (4 tau)) dA`` with ``tau = t0 - t``.
    The phi integral is a periodic trapezoid rule; in theta the integrand is
    sampled on a grid refined ``refine`` times by cubic splines of ``Theta``,
    ``g`` and the area element, then integrated as a spline.
    """
    tau = t0 - state.t
    if not tau > 0:
        raise ValueError(f"t0 must exceed the state time {state.t}")
    y0 = np.asarray(center, dtype=float).ravel()
    if y0.shape != (6,):
        raise ValueError("center must be a 6-vector")
    th = state.theta_grid
    geo = geometry(state)
    Th_s = CubicSpline(th, state.Theta)
    g_s = CubicSpline(th, state.g, bc_type="clamped")
    w_s = CubicSpline(th, geo.area_element)
    tf = np.linspace(0.0, math.pi, state.N * int(refine) + 1)
    phi = np.linspace(0.0, 2.0 * math.pi, int(n_phi), endpoint=False)
    Th, gg, w = Th_s(tf), g_s(tf), w_s(tf)
    st, ct = np.sin(tf)[:, None], np.cos(tf)[:, None]
    S, C = np.sin(Th)[:, None], np.cos(Th)[:, None]
    psi = phi[None, :] + gg[:, None]
    d2 = (
        (st * np.cos(phi) - y0[0]) ** 2
        + (st * np.sin(phi) - y0[1]) ** 2
        + (ct - y0[2]) ** 2
        + (S * np.cos(psi) - y0[3]) ** 2
        + (S * np.sin(psi) - y0[4]) ** 2
        + (C - y0[5]) ** 2
    )
    ring = np.exp(-d2 / (4.0 * tau)).mean(axis=1) * 2.0 * math.pi * w
    integral = CubicSpline(tf, ring).integrate(0.0, math.pi)
    return float(integral / (4.0 * math.pi * tau))
