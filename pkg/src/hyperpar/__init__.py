"""Relative differential geometry of hypersurfaces and their relatively parallel families."""

from __future__ import annotations

from .curvature import CurvatureData, mean_curvatures, principal_curvatures
from .dsl import eval_jet, parse, pretty
from .euclid import EuclidFrame, build_frame, frame_from_map
from .jet import DEFAULT_ORDER, Jet
from .parallel import (
    ParallelConfig,
    affine_parallelism_test,
    affine_transport,
    derivative_check,
    family_determinant,
    full_report,
    offset_frame,
    vanishing_hn1_distance,
    verify_transform,
)
from .relgeo import RelativeFrame, build_relative_frame
from .surfaces import NormalizationDef, SurfaceDef, catalog

__all__ = [
    "CurvatureData",
    "DEFAULT_ORDER",
    "EuclidFrame",
    "Jet",
    "NormalizationDef",
    "ParallelConfig",
    "RelativeFrame",
    "SurfaceDef",
    "affine_parallelism_test",
    "affine_transport",
    "build_frame",
    "build_relative_frame",
    "catalog",
    "derivative_check",
    "eval_jet",
    "family_determinant",
    "frame_from_map",
    "full_report",
    "mean_curvatures",
    "offset_frame",
    "parse",
    "pretty",
    "principal_curvatures",
    "vanishing_hn1_distance",
    "verify_transform",
]

__version__ = "0.1.0"
