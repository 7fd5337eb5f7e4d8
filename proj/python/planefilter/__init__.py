"""Piecewise-planar match filtering, NCC keypoint refinement and evaluation."""

from ._core import (
    Error,
    auc,
    epipolar_error,
    estimate_intrinsics,
    filter_matches,
    fit_homography,
    fix_rotation,
    gen_planar_scene,
    gen_pose_scene,
    homography_common_area_error,
    match_scores,
    pose_error,
    pose_from_fundamental,
    read_matches,
    refine_matches,
    render_textured_pair,
    reprojection_error,
    subpixel_peak,
    write_matches,
)

__version__ = "0.1.0"

__all__ = [
    "Error",
    "auc",
    "epipolar_error",
    "estimate_intrinsics",
    "filter_matches",
    "fit_homography",
    "fix_rotation",
    "gen_planar_scene",
    "gen_pose_scene",
    "homography_common_area_error",
    "match_scores",
    "pose_error",
    "pose_from_fundamental",
    "read_matches",
    "refine_matches",
    "render_textured_pair",
    "reprojection_error",
    "subpixel_peak",
    "write_matches",
]
