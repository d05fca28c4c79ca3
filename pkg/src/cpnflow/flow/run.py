"""Time integration with monitors, CSV series and JSON checkpoints."""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import kernel as _kernel
from .geometry import gaussian_density, geometry
from .state import FlowFailure, FlowState, init_twist, save_checkpoint, MIN_N, PROFILES

CSV_HEADER = ["t", "min_star_omega", "max_sff_norm", "max_lambda_dev", "total_area", "max_symplectic_residual"]


@dataclass(frozen=True)
class FlowConfig:
    N: int = 200
    cfl: float = 0.1
    T_final: float = 1.0
    profile: str = "smooth_twist"
    amplitude: float = 0.3
    report_every: float = 0.1
    checkpoint_every: float = 0.0
    out_dir: str | None = None

    def __post_init__(self):
        if not isinstance(self.N, int) or isinstance(self.N, bool) or self.N < MIN_N:
            raise ValueError(f"N must be an integer >= {MIN_N}")
        if not 0 < self.cfl <= 0.25:
            raise ValueError("cfl must lie in (0, 0.25]")
        if not (math.isfinite(self.T_final) and self.T_final >= 0):
            raise ValueError("T_final must be finite and nonnegative")
        if self.profile not in PROFILES:
            raise ValueError(f"profile must be one of {PROFILES}")
        if not math.isfinite(self.amplitude):
            raise ValueError("amplitude must be finite")
        if not self.report_every > 0:
            raise ValueError("report_every must be positive")
        if not self.checkpoint_every >= 0:
            raise ValueError("checkpoint_every must be nonnegative (0 disables)")

    @classmethod
    def from_dict(cls, d: dict) -> "FlowConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        d = dict(d)
        for key in ("cfl", "T_final", "amplitude", "report_every", "checkpoint_every"):
            if key in d and isinstance(d[key], int) and not isinstance(d[key], bool):
                d[key] = float(d[key])
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "FlowConfig":
        with open(os.fspath(path)) as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class MonitorReport:
    t: float
    min_star_omega: float
    max_sff_norm: float
    max_lambda_dev: float
    total_area: float
    max_symplectic_residual: float
    gaussian_density: float | None = None

    def row(self) -> list[float]:
        return [getattr(self, k) for k in CSV_HEADER]


def monitor(state: FlowState, density_center=None, density_t0: float | None = None) -> MonitorReport:
    geo = geometry(state)
    dens = None
    if density_center is not None:
        dens = gaussian_density(state, density_center, density_t0)
    rep = MonitorReport(
        t=state.t,
        min_star_omega=float(geo.star_omega.min()),
        max_sff_norm=float(geo.sff_norm.max()),
        max_lambda_dev=float(np.abs(geo.lam - 1.0).max()),
        total_area=geo.total_area,
        max_symplectic_residual=float(geo.symplectic_residual.max()),
        gaussian_density=dens,
    )
    vals = [v for v in asdict(rep).values() if v is not None]
    if not all(math.isfinite(v) for v in vals):
        raise FlowFailure(f"non-finite monitor at t={state.t}", state)
    return rep


@dataclass
class RunResult:
    reports: list
    state: FlowState
    checkpoints: list
    dt: float
    steps: int
    kernel: str


def step_plan(config: FlowConfig) -> tuple[float, int, int, int]:
    """Time step, total steps, and steps between reports and checkpoints.

    ``dt`` is the largest value not above ``cfl * dtheta^2`` that divides
    ``T_final`` evenly.
    """
    h = math.pi / config.N
    dt_max = config.cfl * h * h
    total = max(1, math.ceil(config.T_final / dt_max - 1e-9)) if config.T_final > 0 else 0
    dt = config.T_final / total if total else dt_max
    rep = max(1, round(config.report_every / dt))
    chk = max(1, round(config.checkpoint_every / dt)) if config.checkpoint_every > 0 else 0
    return dt, total, rep, chk


def step(state: FlowState, dt: float, kernel: str | None = None) -> FlowState:
    """One explicit step of the graph-gauge flow."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    adv = _kernel.advance if kernel is None else _kernel.get_advance(kernel)
    T, g = state.Theta.copy(), state.g.copy()
    status, _ = adv(state.theta_grid, T, g, dt, 1)
    if status != _kernel.OK:
        raise FlowFailure(f"step failed at t={state.t}: {_kernel.STATUS_TEXT[status]}", state)
    return FlowState(state.theta_grid, T, g, state.t + dt)


def run(
    config: FlowConfig,
    initial: FlowState | None = None,
    kernel: str | None = None,
    density_center=None,
    density_t0: float | None = None,
    on_report=None,
) -> RunResult:
    """Integrate to ``T_final``; monitors are recorded, never asserted.

    With ``out_dir`` set, writes ``monitors.csv`` and checkpoint files
    ``checkpoint_<step>.json`` plus ``final.json``.
    """
    state = initial if initial is not None else init_twist(config.N, config.profile, config.amplitude)
    if state.N != config.N:
        raise ValueError("initial state grid does not match config.N")
    name = kernel or _kernel.KERNEL_NAME
    adv = _kernel.get_advance(name)
    dt, total, rep_every, chk_every = step_plan(config)
    out = config.out_dir
    if out:
        os.makedirs(out, exist_ok=True)
    reports = [monitor(state, density_center, density_t0)]
    if on_report:
        on_report(reports[-1])
    checkpoints = []
    th = state.theta_grid
    T, g = state.Theta.copy(), state.g.copy()
    t0 = state.t
    done = 0
    csv_fh = open(os.path.join(out, "monitors.csv"), "w", newline="") if out else None
    try:
        writer = csv.writer(csv_fh, lineterminator="\n") if csv_fh else None
        if writer:
            writer.writerow(CSV_HEADER)
            writer.writerow([repr(v) for v in reports[-1].row()])
        while done < total:
            nxt = min(total, (done // rep_every + 1) * rep_every)
            if chk_every:
                nxt = min(nxt, (done // chk_every + 1) * chk_every)
            status, k = adv(th, T, g, dt, nxt - done)
            done += k
            cur = FlowState(th, T.copy(), g.copy(), t0 + done * dt)
            if status != _kernel.OK:
                if out:
                    save_checkpoint(cur, os.path.join(out, "last_good.json"))
                raise FlowFailure(
                    f"flow failed after {done} steps (t={cur.t:.6g}): {_kernel.STATUS_TEXT[status]}", cur, reports
                )
            if done % rep_every == 0 or done == total:
                try:
                    reports.append(monitor(cur, density_center, density_t0))
                except FlowFailure as exc:
                    raise FlowFailure(str(exc), cur, reports) from exc
                if writer:
                    writer.writerow([repr(v) for v in reports[-1].row()])
                if on_report:
                    on_report(reports[-1])
            if out and chk_every and done % chk_every == 0:
                path = os.path.join(out, f"checkpoint_{done:09d}.json")
                save_checkpoint(cur, path)
                checkpoints.append(path)
        state = FlowState(th, T, g, t0 + done * dt)
        if out:
            path = os.path.join(out, "final.json")
            save_checkpoint(state, path)
            checkpoints.append(path)
    finally:
        if csv_fh:
            csv_fh.close()
    return RunResult(reports, state, checkpoints, dt, done, name)
