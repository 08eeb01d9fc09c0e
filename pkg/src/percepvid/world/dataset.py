"""On-disk clip layout and (de)serialization.

One directory per clip:

    clip-00000042/
        rgb/frame-0000.png ...      8-bit RGB frames
        percep/frame-0000.png ...   written later by the perception encoder
        truth.json                  masks (RLE), tracks, centers, labels, spec
        pointmap.npz                float32 [3, F, H, W] (too big for JSON)
        score.json                  one ScoreRecord

Masks are run-length encoded per frame over the row-major flattened image
as [value, run, value, run, ...] pairs; everything else round-trips through
JSON lists (floats survive exactly) or the npz container.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np
from PIL import Image

from ..curation import ScoreRecord
from .scene import Camera, SceneSpec, SceneTruth, VideoClip

FORMAT_VERSION = 1


def clip_dirname(index: int) -> str:
    return f"clip-{index:08d}"


def rle_encode(arr: np.ndarray) -> list[int]:
    """Flatten row-major and encode as alternating [value, run] pairs."""
    flat = np.asarray(arr).ravel()
    if flat.size == 0:
        return []
    boundaries = np.flatnonzero(np.diff(flat)) + 1
    starts = np.concatenate([[0], boundaries])
    ends = np.concatenate([boundaries, [flat.size]])
    out: list[int] = []
    for s, e in zip(starts, ends):
        out.append(int(flat[s]))
        out.append(int(e - s))
    return out


def rle_decode(pairs: list[int], shape: tuple[int, ...], dtype=np.int16) -> np.ndarray:
    values = np.asarray(pairs[0::2], dtype=dtype)
    runs = np.asarray(pairs[1::2], dtype=np.int64)
    return np.repeat(values, runs).reshape(shape)


def _spec_to_dict(spec: SceneSpec) -> dict:
    d = asdict(spec)
    d["init_positions"] = np.asarray(spec.init_positions).tolist()
    d["init_velocities"] = np.asarray(spec.init_velocities).tolist()
    d["camera"] = asdict(spec.camera)
    return d


def _spec_from_dict(d: dict) -> SceneSpec:
    d = dict(d)
    d["camera"] = Camera(**d["camera"])
    d["init_positions"] = np.asarray(d["init_positions"], dtype=np.float64)
    d["init_velocities"] = np.asarray(d["init_velocities"], dtype=np.float64)
    return SceneSpec(**d)


def write_frames(directory: Path, frames: np.ndarray) -> None:
    """Write [3, F, H, W] float frames as zero-padded 8-bit PNGs."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    F = frames.shape[1]
    as_u8 = np.clip(np.rint(frames * 255.0), 0, 255).astype(np.uint8)
    for s in range(F):
        img = Image.fromarray(np.transpose(as_u8[:, s], (1, 2, 0)), mode="RGB")
        img.save(directory / f"frame-{s:04d}.png")


def read_frames(directory: Path) -> np.ndarray:
    directory = Path(directory)
    paths = sorted(directory.glob("frame-*.png"))
    if not paths:
        raise FileNotFoundError(f"no frames under {directory}")
    layers = [np.asarray(Image.open(p), dtype=np.float32) / 255.0 for p in paths]
    return np.transpose(np.stack(layers), (3, 0, 1, 2))


def write_clip(
    root: Path,
    index: int,
    spec: SceneSpec,
    clip: VideoClip,
    truth: SceneTruth,
    score: ScoreRecord | None = None,
) -> Path:
    """Write one clip directory; returns its path."""
    cdir = Path(root) / clip_dirname(index)
    cdir.mkdir(parents=True, exist_ok=True)
    write_frames(cdir / "rgb", clip.frames)
    np.savez_compressed(cdir / "pointmap.npz", pointmap=truth.pointmap)
    doc = {
        "format_version": FORMAT_VERSION,
        "spec": _spec_to_dict(spec),
        "mask_shape": list(truth.masks.shape),
        "masks_rle": [rle_encode(truth.masks[s]) for s in range(truth.masks.shape[0])],
        "tracks": {
            "positions": truth.track_positions.tolist(),
            "instance": truth.track_instance.tolist(),
        },
        "centers": truth.centers.tolist(),
        "physics_labels": truth.physics_labels.tolist(),
        "frame_change": truth.frame_change,
        "instance_kinds": truth.instance_kinds,
    }
    with open(cdir / "truth.json", "w") as fh:
        json.dump(doc, fh)
    if score is not None:
        with open(cdir / "score.json", "w") as fh:
            json.dump(score.to_dict(), fh)
    return cdir


def read_spec(clip_dir: Path) -> SceneSpec:
    with open(Path(clip_dir) / "truth.json") as fh:
        return _spec_from_dict(json.load(fh)["spec"])


def read_truth(clip_dir: Path) -> SceneTruth:
    clip_dir = Path(clip_dir)
    with open(clip_dir / "truth.json") as fh:
        doc = json.load(fh)
    if doc.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported truth format in {clip_dir}")
    F, H, W = doc["mask_shape"]
    masks = np.stack([rle_decode(p, (H, W)) for p in doc["masks_rle"]])
    pointmap = np.load(clip_dir / "pointmap.npz")["pointmap"]
    return SceneTruth(
        masks=masks,
        pointmap=pointmap,
        track_positions=np.asarray(doc["tracks"]["positions"], dtype=np.float64),
        track_instance=np.asarray(doc["tracks"]["instance"], dtype=np.int16),
        centers=np.asarray(doc["centers"], dtype=np.float64),
        physics_labels=np.asarray(doc["physics_labels"], dtype=np.float64),
        frame_change=float(doc["frame_change"]),
        instance_kinds=list(doc["instance_kinds"]),
    )


def read_score(clip_dir: Path) -> ScoreRecord:
    with open(Path(clip_dir) / "score.json") as fh:
        return ScoreRecord.from_dict(json.load(fh))


def read_rgb(clip_dir: Path) -> np.ndarray:
    return read_frames(Path(clip_dir) / "rgb")


def read_percep(clip_dir: Path) -> np.ndarray:
    return read_frames(Path(clip_dir) / "percep")


def list_clip_dirs(root: Path) -> list[Path]:
    return sorted(p for p in Path(root).glob("clip-*") if p.is_dir())
