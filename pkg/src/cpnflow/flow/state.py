"""Equivariant graph states ``(theta, phi) -> (Theta(theta), phi + g(theta))`` and checkpoint I/O."""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from typing import Callable

import numpy as np

CHECKPOINT_FORMAT_VERSION = 1
MIN_N = 16
PROFILES = ("constant", "smooth_twist")


class FlowFailure(RuntimeError):
    """Raised when a step loses the graph condition or produces non-finite values.

    ``state`` holds the last good state and ``reports`` any monitors collected
    before the failure.
    """

    def __init__(self, message: str, state: "FlowState | None" = None, reports=None):
        super().__init__(message)
        self.state = state
        self.reports = list(reports or [])


@dataclass(frozen=True)
class FlowState:
    theta_grid: np.ndarray
    Theta: np.ndarray
    g: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        th = np.array(self.theta_grid, dtype=float)
        Th = np.array(self.Theta, dtype=float)
        g = np.array(self.g, dtype=float)
        if th.ndim != 1 or th.shape != Th.shape or th.shape != g.shape:
            raise ValueError("theta_grid, Theta and g must be 1-D arrays of equal length")
        if th.size < MIN_N + 1:
            raise ValueError(f"need at least {MIN_N} intervals, got {th.size - 1}")
        N = th.size - 1
        h = math.pi / N
        if abs(th[0]) > 1e-12 or abs(th[-1] - math.pi) > 1e-12 or np.max(np.abs(np.diff(th) - h)) > 1e-12:
            raise ValueError("theta_grid must be uniform on [0, pi]")
        if not (np.all(np.isfinite(Th)) and np.all(np.isfinite(g)) and math.isfinite(self.t)):
            raise ValueError("state contains non-finite values")
        if self.t < 0:
            raise ValueError("t must be nonnegative")
        for a in (th, Th, g):
            a.setflags(write=False)
        object.__setattr__(self, "theta_grid", th)
        object.__setattr__(self, "Theta", Th)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "t", float(self.t))

    @property
    def N(self) -> int:
        return self.theta_grid.size - 1

    @property
    def dtheta(self) -> float:
        return math.pi / self.N

    def graph_ok(self) -> bool:
        return graph_condition(self.Theta)

    def to_record(self) -> dict:
        return {
            "format_version": CHECKPOINT_FORMAT_VERSION,
            "t": self.t,
            "theta_grid": self.theta_grid.tolist(),
            "Theta": self.Theta.tolist(),
            "g": self.g.tolist(),
        }

    @classmethod
    def from_record(cls, rec: dict) -> "FlowState":
        ver = rec.get("format_version")
        if ver != CHECKPOINT_FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint format_version {ver!r}")
        return cls(rec["theta_grid"], rec["Theta"], rec["g"], rec["t"])


def graph_condition(Theta) -> bool:
    """Poles fixed and ``Theta`` strictly increasing."""
    Theta = np.asarray(Theta)
    return bool(
        Theta[0] == 0.0 and Theta[-1] == math.pi and np.all(np.diff(Theta) > 0) and np.all(np.isfinite(Theta))
    )


def theta_grid(N: int) -> np.ndarray:
    if int(N) != N or N < MIN_N:
        raise ValueError(f"N must be an integer >= {MIN_N}, got {N!r}")
    th = np.linspace(0.0, math.pi, int(N) + 1)
    th[-1] = math.pi
    return th


def _profile(profile, amplitude: float) -> Callable[[np.ndarray], np.ndarray]:
    if callable(profile):
        return profile
    if not math.isfinite(amplitude):
        raise ValueError("amplitude must be finite")
    if profile == "constant":
        return lambda th: np.full_like(th, amplitude)
    if profile == "smooth_twist":
        if abs(amplitude) >= math.pi:
            raise ValueError("smooth_twist amplitude must satisfy |a| < pi")
        return lambda th: amplitude * (1.0 - np.cos(th))
    raise ValueError(f"unknown profile {profile!r}; expected one of {PROFILES} or a callable")


def init_twist(N: int, profile="smooth_twist", amplitude: float = 0.0, pole_tol: float = 1e-3) -> FlowState:
    """Twist map ``Theta = theta`` with ``g`` from a named family or a callable ``g(theta)``.

    Callables are checked for vanishing one-sided slope at both poles.
    """
    th = theta_grid(N)
    gfun = _profile(profile, amplitude)
    g = np.asarray(gfun(th), dtype=float)
    if g.shape != th.shape or not np.all(np.isfinite(g)):
        raise ValueError("profile must return finite values on the grid")
    if callable(profile):
        eps = 1e-6
        ends = np.array([0.0, eps, math.pi - eps, math.pi])
        ge = np.asarray(profile(ends), dtype=float)
        slopes = ((ge[1] - ge[0]) / eps, (ge[3] - ge[2]) / eps)
        if max(abs(slopes[0]), abs(slopes[1])) > pole_tol:
            raise ValueError(f"profile slope at the poles must vanish, got {slopes}")
    return FlowState(th, th.copy(), g, 0.0)


def save_checkpoint(state: FlowState, path) -> None:
    path = os.fspath(path)
    try:
        with open(path, "w") as fh:
            json.dump(state.to_record(), fh, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write checkpoint {path}: {exc}") from exc


def load_checkpoint(path) -> FlowState:
    with open(os.fspath(path)) as fh:
        return FlowState.from_record(json.load(fh))
