"""Distributed multi-robot TSDF mapping.

Robots regress a truncated signed distance field with a compressed
pseudo-point Gaussian process and diffuse their per-step statistics over
a time-varying communication graph with an echo-free mini-batch
protocol, converging to the estimate of a centralized agent.
"""

from ._backend import BACKEND
from .central import CentralAgent
from .gp import (GpPosterior, GpPrior, KernelParams, NumericalFailure,
                 compressed_gp_posterior, exact_gp_posterior, kernel_eval,
                 spgp_posterior_reference)
from .grid import GridKey, PseudoPointStats, snap, unsnap
from .network import (GraphSnapshot, check_b_connected, metropolis_weights,
                      proximity_graph, weight_product_convergence)
from .protocol import BatchId, BatchSample, MiniBatch, RobotState
from .quadtree import QuadTree
from .sim import SimConfig, Simulation, compute_rmse, rasterize_map
from .tsdf import (Pose2D, PseudoSample, Scan, TsdfParams,
                   compute_pseudo_points, point_line_distance,
                   signed_truncated_distance, world_points)
from .worlds import World, WorldSpec, build_world, synth_world

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "BatchId", "BatchSample", "CentralAgent", "GpPosterior",
    "GpPrior", "GraphSnapshot", "GridKey", "KernelParams", "MiniBatch",
    "NumericalFailure", "Pose2D", "PseudoPointStats", "PseudoSample",
    "QuadTree", "RobotState", "Scan", "SimConfig", "Simulation",
    "TsdfParams", "World", "WorldSpec", "build_world", "check_b_connected",
    "compressed_gp_posterior", "compute_pseudo_points", "compute_rmse",
    "exact_gp_posterior", "kernel_eval", "metropolis_weights",
    "point_line_distance", "proximity_graph", "rasterize_map",
    "signed_truncated_distance", "snap", "spgp_posterior_reference",
    "synth_world", "unsnap", "weight_product_convergence", "world_points",
    "__version__",
]
