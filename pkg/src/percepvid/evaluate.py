"""Physical-consistency scoring of generated clips, plus the ablation runner.

The detector is deliberately dumb: the renderer draws each instance in a
fixed saturated palette color over a gray background, so a chroma gate
(max-min over channels) followed by nearest-palette classification
recovers instance masks without any learned machinery.  Shading scales
all three channels by the same factor, which the max-normalized palette
match is invariant to.

Three metrics per clip:

* wall-penetration rate: fraction of frames where any detected blob pixel
  lies outside the screen-space bounding box of the play volume (all
  spheres live inside the box, and projection preserves convex
  containment, so ground-truth clips score 0 up to rasterization slack);
* object-count stability: fraction of frames whose per-class blob counts
  match the conditioned scene class (ball-k expects exactly one blob in
  each of the first k palette classes; fluid expects at least one cyan
  blob, since the particle puddle merges and splits freely);
* trajectory smoothness: mean second difference of per-class pixel
  centroids, in pixels (reported, not thresholded).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .world.scene import INSTANCE_PALETTE, Camera

BALL_CLASSES = {"ball1": 1, "ball2": 2, "ball3": 3}
FLUID_CLASS = 5  # palette row used by fluid scenes


@dataclass
class DetectorConfig:
    chroma_threshold: float = 0.18
    min_area: int = 4
    slack_px: float = 1.0
    box_extent: float = 1.0


@dataclass
class ClipMetrics:
    scene_class: str
    wall_penetration: float
    count_stability: float
    smoothness: float


@dataclass
class ToyPCReport:
    clips: list[ClipMetrics] = field(default_factory=list)

    @property
    def wall_penetration(self) -> float:
        return float(np.mean([c.wall_penetration for c in self.clips]))

    @property
    def count_stability(self) -> float:
        return float(np.mean([c.count_stability for c in self.clips]))

    @property
    def smoothness(self) -> float:
        vals = [c.smoothness for c in self.clips if math.isfinite(c.smoothness)]
        return float(np.mean(vals)) if vals else float("nan")

    def to_rows(self) -> list[dict]:
        return [
            {
                "scene_class": c.scene_class,
                "wall_penetration": c.wall_penetration,
                "count_stability": c.count_stability,
                "smoothness": c.smoothness,
            }
            for c in self.clips
        ]


def classify_pixels(frame: np.ndarray, chroma_threshold: float) -> np.ndarray:
    """Label each pixel with a palette index, or -1 for background.

    frame: [3, H, W] float in [0, 1].
    """
    chroma = frame.max(axis=0) - frame.min(axis=0)
    gated = chroma > chroma_threshold
    # shade-invariant match: compare max-normalized colors
    peak = np.maximum(frame.max(axis=0), 1e-8)
    normed = frame / peak  # [3, H, W]
    pal = INSTANCE_PALETTE / INSTANCE_PALETTE.max(axis=1, keepdims=True)  # [P, 3]
    d2 = ((normed[None, :, :, :] - pal[:, :, None, None]) ** 2).sum(axis=1)  # [P,H,W]
    labels = np.argmin(d2, axis=0).astype(np.int16)
    labels[~gated] = -1
    return labels


def count_blobs(class_map: np.ndarray, cls: int, min_area: int) -> tuple[int, np.ndarray]:
    """Connected components of one palette class; returns (count, mask of kept pixels)."""
    mask = class_map == cls
    lab, n = ndimage.label(mask)
    kept = np.zeros_like(mask)
    count = 0
    if n:
        areas = np.bincount(lab.ravel())[1:]
        for i, a in enumerate(areas, start=1):
            if a >= min_area:
                count += 1
                kept |= lab == i
    return count, kept


def box_screen_bounds(camera: Camera, extent: float, slack_px: float) -> tuple[float, float, float, float]:
    """(u_lo, u_hi, v_lo, v_hi) of the projected play-volume corners."""
    e = extent
    corners = np.array(
        [
            [sx * e, sy * e, camera.z0 + sz * e]
            for sx in (-1, 1)
            for sy in (-1, 1)
            for sz in (-1, 1)
        ]
    )
    uv = camera.project(corners)
    return (
        float(uv[:, 0].min() - slack_px),
        float(uv[:, 0].max() + slack_px),
        float(uv[:, 1].min() - slack_px),
        float(uv[:, 1].max() + slack_px),
    )


def expected_counts(scene_class: str) -> tuple[dict[int, int], set[int]]:
    """(exact per-class counts, classes where >=1 blob suffices)."""
    if scene_class in BALL_CLASSES:
        k = BALL_CLASSES[scene_class]
        return {c: 1 for c in range(k)}, set()
    if scene_class == "fluid":
        return {}, {FLUID_CLASS}
    raise ValueError(f"unknown scene class {scene_class!r}")


def evaluate_clip(
    frames: np.ndarray,
    scene_class: str,
    camera: Camera | None = None,
    cfg: DetectorConfig | None = None,
) -> ClipMetrics:
    """Score one clip [3, F, H, W] against its conditioned scene class."""
    cfg = cfg or DetectorConfig()
    _, F, H, W = frames.shape
    if camera is None:
        camera = Camera.default(H, W, cfg.box_extent)
    u_lo, u_hi, v_lo, v_hi = box_screen_bounds(camera, cfg.box_extent, cfg.slack_px)
    exact, presence = expected_counts(scene_class)
    watched = sorted(set(exact) | presence)

    pen_frames = 0
    ok_frames = 0
    centroids = {c: np.full((F, 2), np.nan) for c in watched}
    for f in range(F):
        cmap = classify_pixels(frames[:, f], cfg.chroma_threshold)
        frame_ok = True
        any_pen = False
        for cls in range(len(INSTANCE_PALETTE)):
            n, kept = count_blobs(cmap, cls, cfg.min_area)
            if cls in exact and n != exact[cls]:
                frame_ok = False
            if cls in presence and n < 1:
                frame_ok = False
            if cls not in exact and cls not in presence and n > 0:
                frame_ok = False  # hallucinated object of an unconditioned color
            if n and cls in centroids:
                vs, us = np.nonzero(kept)
                centroids[cls][f] = (us.mean(), vs.mean())
            if n:
                vs, us = np.nonzero(kept)
                if (us < u_lo).any() or (us > u_hi).any() or (vs < v_lo).any() or (vs > v_hi).any():
                    any_pen = True
        pen_frames += any_pen
        ok_frames += frame_ok

    seconds = []
    for c in watched:
        path = centroids[c]
        for f in range(1, F - 1):
            window = path[f - 1 : f + 2]
            if np.isfinite(window).all():
                seconds.append(np.linalg.norm(window[2] - 2 * window[1] + window[0]))
    smooth = float(np.mean(seconds)) if seconds else float("nan")
    return ClipMetrics(
        scene_class=scene_class,
        wall_penetration=pen_frames / F,
        count_stability=ok_frames / F,
        smoothness=smooth,
    )


def evaluate_toy_pc(
    clips: list[np.ndarray],
    scene_classes: list[str],
    camera: Camera | None = None,
    cfg: DetectorConfig | None = None,
) -> ToyPCReport:
    if len(clips) != len(scene_classes):
        raise ValueError("one scene class per clip required")
    report = ToyPCReport()
    for frames, sc in zip(clips, scene_classes):
        report.clips.append(evaluate_clip(np.asarray(frames), sc, camera, cfg))
    return report


def write_report_csv(report: ToyPCReport, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = report.to_rows()
    rows.append(
        {
            "scene_class": "MEAN",
            "wall_penetration": report.wall_penetration,
            "count_stability": report.count_stability,
            "smoothness": report.smoothness,
        }
    )
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["scene_class", "wall_penetration", "count_stability", "smoothness"])
        writer.writeheader()
        writer.writerows(rows)


def plot_report(reports: dict[str, ToyPCReport], path) -> None:
    """Bar chart comparing variants on the three metrics."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    names = list(reports)
    metrics = ("wall_penetration", "count_stability", "smoothness")
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.5))
    for ax, m in zip(axes, metrics):
        vals = [getattr(reports[n], m) for n in names]
        ax.bar(range(len(names)), vals, color="#4878a8")
        ax.set_xticks(range(len(names)))
        ax.set_xticklabels(names, rotation=20, ha="right", fontsize=8)
        ax.set_title(m)
    fig.tight_layout()
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=110)
    plt.close(fig)
