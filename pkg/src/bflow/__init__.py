"""Butcher series and Lie-Butcher series on rooted trees and planar forests."""

from .algebra import FormalSum, Tensor, as_sum, bilinear, render_sum, tensor_sum
from .errors import BflowError, CapacityError, ConvergenceError, DomainError, ParseError
from .forest_core import (
    EMPTY_FOREST,
    EMPTY_WORD,
    Forest,
    PlanarForest,
    PlanarTree,
    RootedTree,
    bminus,
    bplus,
    butcher_product,
    concat,
    enumerate_forests,
    enumerate_trees,
    forest_sigma,
    gl_product,
    left_graft,
    max_order,
    parse_forest,
    parse_tree,
    prelie_graft,
    project_nonplanar,
    psingle,
    shuffle,
    single,
    tree_stats,
)

__all__ = [
    "BflowError",
    "CapacityError",
    "ConvergenceError",
    "DomainError",
    "EMPTY_FOREST",
    "EMPTY_WORD",
    "Forest",
    "FormalSum",
    "ParseError",
    "PlanarForest",
    "PlanarTree",
    "RootedTree",
    "Tensor",
    "as_sum",
    "bilinear",
    "bminus",
    "bplus",
    "butcher_product",
    "concat",
    "enumerate_forests",
    "enumerate_trees",
    "forest_sigma",
    "gl_product",
    "left_graft",
    "max_order",
    "parse_forest",
    "parse_tree",
    "prelie_graft",
    "project_nonplanar",
    "psingle",
    "render_sum",
    "shuffle",
    "single",
    "tensor_sum",
    "tree_stats",
]

__version__ = "0.1.0"
