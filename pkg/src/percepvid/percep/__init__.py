from .points import NoSubjectError, assign_colors, sample_mask_pixels, sample_points
from .render import PercepClip, render_percep

__all__ = [
    "NoSubjectError",
    "assign_colors",
    "sample_mask_pixels",
    "sample_points",
    "PercepClip",
    "render_percep",
]
