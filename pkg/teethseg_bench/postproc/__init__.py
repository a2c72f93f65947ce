"""Classical post-processing and sampling algorithms for tooth segmentation outputs."""

from ..geometry.topology import mesh_edges
from .arch import ArchCurve, align_to_arch, arch_label_correct, fit_arch_curve
from .clustering import cluster_centroids, dbscan, density_peaks, density_peaks_decision, offset_shift_cluster
from .interpolate import InterpolationMode, knn_label_interpolate
from .labels import UNASSIGNED, island_removal, label_closing, majority_vote_fusion
from .proposals import Proposal, assign_proposal_labels, foreground_iou, merge_proposals
from .sampling import (
    boundary_aware_sample,
    boundary_points,
    crop_radius_from_spacing,
    farthest_point_sampling,
    grid_subsample,
    patch_crop,
)
from .walker import WalkerResult, convexity_feature, random_walker, random_walker_graph

__all__ = [
    "UNASSIGNED",
    "ArchCurve",
    "InterpolationMode",
    "Proposal",
    "WalkerResult",
    "align_to_arch",
    "arch_label_correct",
    "assign_proposal_labels",
    "boundary_aware_sample",
    "boundary_points",
    "cluster_centroids",
    "convexity_feature",
    "crop_radius_from_spacing",
    "dbscan",
    "density_peaks",
    "density_peaks_decision",
    "farthest_point_sampling",
    "fit_arch_curve",
    "foreground_iou",
    "grid_subsample",
    "island_removal",
    "knn_label_interpolate",
    "label_closing",
    "majority_vote_fusion",
    "merge_proposals",
    "mesh_edges",
    "offset_shift_cluster",
    "patch_crop",
    "random_walker",
    "random_walker_graph",
]
