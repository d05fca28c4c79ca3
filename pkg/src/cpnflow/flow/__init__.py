"""Equivariant mean curvature flow of twist-map graphs in S^2 x S^2."""
from .geometry import SliceGeometry, evolution_residual, gaussian_density, geometry
from .kernel import KERNEL_NAME
from .run import CSV_HEADER, FlowConfig, MonitorReport, RunResult, monitor, run, step
from .state import FlowFailure, FlowState, init_twist, load_checkpoint, save_checkpoint

__all__ = [
    "CSV_HEADER", "FlowConfig", "FlowFailure", "FlowState", "KERNEL_NAME", "MonitorReport",
    "RunResult", "SliceGeometry", "evolution_residual", "gaussian_density", "geometry",
    "init_twist", "load_checkpoint", "monitor", "run", "save_checkpoint", "step",
]
