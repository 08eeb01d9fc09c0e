"""End-to-end run orchestration.

Stage order: gen-data -> encode-percep -> curate -> train-teacher ->
distill -> sample -> evaluate.  Every stage writes an entry into the run
manifest (config hash, input hash, outputs, duration); a rerun with
unchanged hashes skips the stage, and ``skip_to`` forces a jump while
still verifying that upstream outputs exist.

Scene seeds are rejection-sampled at generation time so that every
instance keeps a minimum number of visible pixels in every frame --
downstream metrics (track sampling, blob counting) silently degrade on
fully occluded instances, so such scenes are simply redrawn.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import os
import time
from pathlib import Path

import numpy as np
import torch

from .codec import CodecConfig, decode, encode
from .config import PipelineConfig, config_hash, resolve_out_dir, to_dict
from .curation import (
    assign_labels,
    filter_pool,
    irbl_weights,
    read_scores_ndjson,
    resample,
    video_weights,
    write_scores_ndjson,
)
from .model.diffusion import sample
from .percep.points import assign_colors
from .percep.render import ALL_LAYERS, render_percep
from .training import (
    LatentPairs,
    load_stage1_model,
    load_student,
    stage1_train,
    stage2_train,
)
from .world import random_scene, score_record_from_truth, simulate
from .world.dataset import (
    clip_dirname,
    list_clip_dirs,
    read_rgb,
    read_spec,
    read_truth,
    write_clip,
    write_frames,
)
from .world.scene import SCENE_CLASSES
from . import evaluate as toypc

log = logging.getLogger(__name__)

STAGES = (
    "gen-data",
    "encode-percep",
    "curate",
    "train-teacher",
    "distill",
    "sample",
    "evaluate",
)

MODALITY_LAYERS = {
    "seg": ("seg",),
    "xyz": ("xyz",),
    "tracks": ("tracks",),
    "unified": ALL_LAYERS,
}

MANIFEST_VERSION = 1


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: str):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage


# ---------------------------------------------------------------- manifest


def manifest_path(run_dir: Path) -> Path:
    return Path(run_dir) / "manifest.json"


def load_manifest(run_dir: Path) -> dict:
    p = manifest_path(run_dir)
    if not p.exists():
        return {"format_version": MANIFEST_VERSION, "stages": {}}
    with open(p) as fh:
        return json.load(fh)


def save_manifest(run_dir: Path, manifest: dict) -> None:
    p = manifest_path(run_dir)
    tmp = p.with_suffix(".json.tmp")
    with open(tmp, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    os.replace(tmp, p)


def hash_paths(paths: list[Path]) -> str:
    """Order-stable content hash over files (directories walk recursively)."""
    h = hashlib.sha256()
    expanded: list[Path] = []
    for p in paths:
        p = Path(p)
        if p.is_dir():
            expanded.extend(sorted(q for q in p.rglob("*") if q.is_file()))
        elif p.is_file():
            expanded.append(p)
        else:
            h.update(f"missing:{p}".encode())
    for q in expanded:
        h.update(str(q.name).encode())
        h.update(q.read_bytes())
    return h.hexdigest()[:16]


def _section_hash(obj) -> str:
    if dataclasses.is_dataclass(obj):
        obj = to_dict(obj) if isinstance(obj, PipelineConfig) else dataclasses.asdict(obj)

    def fix(o):
        if isinstance(o, dict):
            return {k: fix(v) for k, v in o.items()}
        if isinstance(o, (tuple, list)):
            return [fix(v) for v in o]
        return o

    blob = json.dumps(fix(obj), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _stage_current(manifest: dict, stage: str, cfg_hash: str, input_hash: str, run_dir: Path) -> bool:
    entry = manifest["stages"].get(stage)
    if not entry:
        return False
    if entry.get("config_hash") != cfg_hash or entry.get("input_hash") != input_hash:
        return False
    return all((run_dir / out).exists() for out in entry.get("outputs", []))


def _record_stage(
    manifest: dict, stage: str, cfg_hash: str, input_hash: str, outputs: list[str], t0: float
) -> None:
    manifest["stages"][stage] = {
        "config_hash": cfg_hash,
        "input_hash": input_hash,
        "outputs": outputs,
        "duration_s": round(time.time() - t0, 3),
        "completed_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }


# ---------------------------------------------------------------- stages


def scene_class_for_index(cfg: PipelineConfig, i: int) -> str:
    classes = cfg.data.scene_classes
    return classes[i % len(classes)]


def _min_visibility(masks: np.ndarray, n_instances: int) -> int:
    # instance ids are 1-based; 0 is background
    counts = [
        int((masks[f] == inst).sum())
        for f in range(masks.shape[0])
        for inst in range(1, n_instances + 1)
    ]
    return min(counts)


def generate_clip(cfg: PipelineConfig, index: int):
    """Draw scene seeds until every instance stays visible in every frame."""
    d = cfg.data
    scene_class = scene_class_for_index(cfg, index)
    base = d.seed + index
    for attempt in range(d.max_attempts):
        seed = base + attempt * 100_003
        spec = random_scene(
            seed,
            F=d.frames,
            H=d.height,
            W=d.width,
            scene_class=scene_class,
            n_track_points=d.n_track_points,
        )
        clip, truth = simulate(spec)
        if _min_visibility(truth.masks, spec.n_objects) >= d.min_visible_px:
            return spec, clip, truth
        log.info("clip %d: seed %d rejected (occlusion), retrying", index, seed)
    raise StageError(
        "gen-data",
        f"clip {index}: no scene with >= {d.min_visible_px} visible px/instance "
        f"in {d.max_attempts} attempts",
    )


def run_gen_data(cfg: PipelineConfig, run_dir: Path) -> Path:
    data_dir = run_dir / "data"
    data_dir.mkdir(parents=True, exist_ok=True)
    records = []
    for i in range(cfg.data.n_clips):
        spec, clip, truth = generate_clip(cfg, i)
        score = score_record_from_truth(truth, spec, video_id=clip_dirname(i))
        write_clip(data_dir, i, spec, clip, truth, score)
        records.append(score)
    write_scores_ndjson(records, data_dir / "scores.ndjson")
    return data_dir


def percep_frames_for_clip(clip_dir: Path, layers=ALL_LAYERS) -> np.ndarray:
    """Re-render the perception video [3, F, H, W] from stored ground truth."""
    spec = read_spec(clip_dir)
    truth = read_truth(clip_dir)
    colors = assign_colors(truth.track_positions[:, 0, :])
    pclip = render_percep(
        truth.track_positions,
        colors,
        truth.masks,
        truth.pointmap,
        spec.camera,
        layers=layers,
    )
    return pclip.frames


def run_encode_percep(cfg: PipelineConfig, run_dir: Path) -> list[Path]:
    data_dir = run_dir / "data"
    outs = []
    for clip_dir in list_clip_dirs(data_dir):
        frames = percep_frames_for_clip(clip_dir)
        write_frames(clip_dir / "percep", frames)
        outs.append(clip_dir / "percep")
    if not outs:
        raise StageError("encode-percep", f"no clips under {data_dir}")
    return outs


def run_curate(cfg: PipelineConfig, run_dir: Path) -> dict:
    data_dir = run_dir / "data"
    records = read_scores_ndjson(data_dir / "scores.ndjson")
    c = cfg.curation
    pool = filter_pool(records, vqa_min=c.vqa_min, reality_min=c.reality_min, richness_min=c.richness_min)
    if not pool:
        raise StageError("curate", "quality filter admitted zero clips")
    Y = assign_labels(pool, tau=c.tau)
    irbl = irbl_weights(Y)
    weights = video_weights(Y, irbl)
    chosen, idx, report = resample(pool, Y, irbl, n_out=c.n_out, seed=c.seed, with_replacement=c.with_replacement)
    out = {
        "pool_ids": [r.video_id for r in pool],
        "chosen_ids": [r.video_id for r in chosen],
        "weights": [float(w) for w in weights],
        "counts_before": [int(x) for x in report["counts_before"]],
        "counts_after": [int(x) for x in report["counts_after"]],
        "n_pool": report["n_pool"],
        "n_out": report["n_out"],
    }
    path = run_dir / "curated.json"
    with open(path, "w") as fh:
        json.dump(out, fh, indent=2)
    return out


def is_validation_id(video_id: str) -> bool:
    """Seed-stable 10% holdout."""
    digest = hashlib.sha256(video_id.encode()).digest()
    return digest[0] % 10 == 0


def split_ids(ids: list[str]) -> tuple[list[str], list[str]]:
    train = [i for i in ids if not is_validation_id(i)]
    val = [i for i in ids if is_validation_id(i)]
    if not train:  # degenerate tiny pools: train on everything
        train = list(ids)
    return train, val


def build_latent_dataset(
    data_dir: Path,
    ids: list[str],
    codec_cfg: CodecConfig,
    layers=ALL_LAYERS,
    from_disk_percep: bool = True,
) -> LatentPairs:
    """Encode paired (RGB, perception) latents for the given clip ids.

    With ``from_disk_percep`` the stored percep PNGs are used (the dataset
    artifact is the source of truth); otherwise perception is re-rendered
    in memory with the requested layer subset — that is what the modality
    ablation does, so every row sees the same float-precision path.
    """
    zs_r, zs_p, ys = [], [], []
    for vid in ids:
        clip_dir = data_dir / vid
        rgb = read_rgb(clip_dir)
        if from_disk_percep and layers == ALL_LAYERS:
            from .world.dataset import read_percep

            percep = read_percep(clip_dir)
        else:
            percep = percep_frames_for_clip(clip_dir, layers=layers)
        spec = read_spec(clip_dir)
        zs_r.append(encode(rgb, codec_cfg).data)
        zs_p.append(encode(percep, codec_cfg).data)
        ys.append(SCENE_CLASSES.index(spec.scene_class))
    return LatentPairs(
        z_rgb=torch.stack(zs_r).float(),
        z_percep=torch.stack(zs_p).float(),
        y=torch.tensor(ys, dtype=torch.long),
    )


def check_channels(cfg: PipelineConfig) -> None:
    want = cfg.codec.latent_channels(3)
    if cfg.backbone.in_channels != want:
        raise ValueError(
            f"backbone.in_channels={cfg.backbone.in_channels} but the codec "
            f"produces {want} latent channels; set backbone.in_channels={want}"
        )


def run_train_teacher(cfg: PipelineConfig, run_dir: Path) -> Path:
    check_channels(cfg)
    with open(run_dir / "curated.json") as fh:
        curated = json.load(fh)
    train_ids, _ = split_ids(curated["chosen_ids"])
    data = build_latent_dataset(run_dir / "data", train_ids, cfg.codec)
    res = stage1_train(data, cfg.arch, cfg.backbone, cfg.bct, cfg.train, run_dir / "teacher")
    return res["checkpoint"]


def run_distill(cfg: PipelineConfig, run_dir: Path) -> Path:
    if cfg.arch != "parallel":
        raise StageError("distill", f"distillation needs the parallel teacher, run arch={cfg.arch!r}")
    with open(run_dir / "curated.json") as fh:
        curated = json.load(fh)
    train_ids, _ = split_ids(curated["chosen_ids"])
    data = build_latent_dataset(run_dir / "data", train_ids, cfg.codec)
    res = stage2_train(run_dir / "teacher" / "ckpt-final.pt", data, cfg.distill, run_dir / "student")
    return res["checkpoint"]


def _latent_shape(cfg: PipelineConfig) -> tuple[int, int, int, int]:
    return cfg.codec.latent_shape((3, cfg.data.frames, cfg.data.height, cfg.data.width))


def sample_student(cfg: PipelineConfig, run_dir: Path, n: int, scene_class: str) -> list[np.ndarray]:
    student, _ = load_student(run_dir / "student" / "ckpt-final.pt")
    y = torch.full((n,), SCENE_CLASSES.index(scene_class), dtype=torch.long)
    z = sample(
        student,
        (n, *_latent_shape(cfg)),
        y,
        steps=cfg.sample.steps,
        seed=cfg.sample.seed,
        guidance_scale=cfg.sample.guidance_scale,
        null_class=cfg.backbone.null_class,
    )
    return [np.clip(decode(_latent(zi, cfg)), 0.0, 1.0) for zi in z]


def sample_teacher(cfg: PipelineConfig, run_dir: Path, n: int, scene_class: str) -> tuple[list, list]:
    """Joint dual-stream sampling; returns (rgb clips, percep clips)."""
    teacher, _ = load_stage1_model(run_dir / "teacher" / "ckpt-final.pt")
    y = torch.full((n,), SCENE_CLASSES.index(scene_class), dtype=torch.long)
    c, f, h, w = _latent_shape(cfg)

    def paired(zcat, y_in, t):
        zr, zp = zcat.chunk(2, dim=1)
        er, ep = teacher.joint_forward(zr, zp, y_in, t)
        return torch.cat([er, ep], dim=1)

    z = sample(
        paired,
        (n, 2 * c, f, h, w),
        y,
        steps=cfg.sample.steps,
        seed=cfg.sample.seed,
        guidance_scale=cfg.sample.guidance_scale,
        null_class=cfg.backbone.null_class,
    )
    rgb, percep = z.chunk(2, dim=1)
    rgbs = [np.clip(decode(_latent(zi, cfg)), 0.0, 1.0) for zi in rgb]
    perceps = [np.clip(decode(_latent(zi, cfg)), 0.0, 1.0) for zi in percep]
    return rgbs, perceps


def _latent(z: torch.Tensor, cfg: PipelineConfig):
    from .codec import LatentBlock

    return LatentBlock(z, cfg.codec)


def run_sample(cfg: PipelineConfig, run_dir: Path) -> Path:
    out = run_dir / "samples"
    out.mkdir(parents=True, exist_ok=True)
    n = cfg.sample.n_videos
    sc = cfg.sample.scene_class
    t_rgb, t_percep = sample_teacher(cfg, run_dir, n, sc)
    for k, (fr, fp) in enumerate(zip(t_rgb, t_percep)):
        write_frames(out / "teacher" / f"clip-{k:03d}" / "rgb", fr)
        write_frames(out / "teacher" / f"clip-{k:03d}" / "percep", fp)
    if (run_dir / "student" / "ckpt-final.pt").exists():
        s_rgb = sample_student(cfg, run_dir, n, sc)
        for k, fr in enumerate(s_rgb):
            write_frames(out / "student" / f"clip-{k:03d}" / "rgb", fr)
    with open(out / "info.json", "w") as fh:
        json.dump({"scene_class": sc, "n_videos": n, "steps": cfg.sample.steps}, fh)
    return out


def run_evaluate(cfg: PipelineConfig, run_dir: Path) -> Path:
    from .world.dataset import read_frames

    out = run_dir / "eval"
    out.mkdir(parents=True, exist_ok=True)
    sc = cfg.sample.scene_class
    reports: dict[str, toypc.ToyPCReport] = {}

    # detector ceiling on held-out ground truth of the same class
    gt_clips, gt_classes = [], []
    data_dir = run_dir / "data"
    for clip_dir in list_clip_dirs(data_dir):
        spec = read_spec(clip_dir)
        if spec.scene_class == sc and len(gt_clips) < cfg.sample.n_videos:
            gt_clips.append(read_rgb(clip_dir))
            gt_classes.append(spec.scene_class)
    if gt_clips:
        reports["ground-truth"] = toypc.evaluate_toy_pc(gt_clips, gt_classes)

    for variant in ("teacher", "student"):
        vdir = run_dir / "samples" / variant
        if not vdir.exists():
            continue
        clips = [read_frames(d / "rgb") for d in sorted(vdir.glob("clip-*"))]
        if clips:
            reports[variant] = toypc.evaluate_toy_pc(clips, [sc] * len(clips))

    if not reports:
        raise StageError("evaluate", "nothing to evaluate: no samples, no matching data")
    for name, rep in reports.items():
        toypc.write_report_csv(rep, out / f"toypc-{name}.csv")
    toypc.plot_report(reports, out / "toypc.png")
    def _finite(v: float):
        return v if np.isfinite(v) else None

    with open(out / "summary.json", "w") as fh:
        json.dump(
            {
                name: {
                    "wall_penetration": _finite(rep.wall_penetration),
                    "count_stability": _finite(rep.count_stability),
                    "smoothness": _finite(rep.smoothness),
                }
                for name, rep in reports.items()
            },
            fh,
            indent=2,
        )
    return out


# ---------------------------------------------------------------- driver

_STAGE_FUNCS = {
    "gen-data": run_gen_data,
    "encode-percep": run_encode_percep,
    "curate": run_curate,
    "train-teacher": run_train_teacher,
    "distill": run_distill,
    "sample": run_sample,
    "evaluate": run_evaluate,
}

# what each stage's input hash is computed from (upstream artifacts)
_STAGE_INPUTS = {
    "gen-data": (),
    "encode-percep": ("data/scores.ndjson",),
    "curate": ("data/scores.ndjson",),
    "train-teacher": ("curated.json",),
    "distill": ("curated.json", "teacher/ckpt-final.pt"),
    "sample": ("teacher/ckpt-final.pt", "student/ckpt-final.pt"),
    "evaluate": ("samples/info.json",),
}

_STAGE_OUTPUTS = {
    "gen-data": ("data/scores.ndjson",),
    "encode-percep": ("data/clip-00000000/percep",),
    "curate": ("curated.json",),
    "train-teacher": ("teacher/ckpt-final.pt",),
    "distill": ("student/ckpt-final.pt",),
    "sample": ("samples/info.json",),
    "evaluate": ("eval/summary.json",),
}

_STAGE_CONFIG_SECTIONS = {
    "gen-data": lambda c: c.data,
    "encode-percep": lambda c: c.data,
    "curate": lambda c: c.curation,
    "train-teacher": lambda c: {"backbone": dataclasses.asdict(c.backbone), "bct": dataclasses.asdict(c.bct), "train": dataclasses.asdict(c.train), "codec": dataclasses.asdict(c.codec), "arch": c.arch},
    "distill": lambda c: {"distill": dataclasses.asdict(c.distill), "codec": dataclasses.asdict(c.codec)},
    "sample": lambda c: c.sample,
    "evaluate": lambda c: c.sample,
}


def run_stage(cfg: PipelineConfig, stage: str) -> Path:
    """Run exactly one stage (manifest is still updated)."""
    if stage not in STAGES:
        raise ValueError(f"unknown stage {stage!r}; stages: {', '.join(STAGES)}")
    run_dir = resolve_out_dir(cfg.out_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    manifest = load_manifest(run_dir)
    cfg_hash = _section_hash(_STAGE_CONFIG_SECTIONS[stage](cfg))
    input_hash = hash_paths([run_dir / rel for rel in _STAGE_INPUTS[stage]])
    t0 = time.time()
    try:
        _STAGE_FUNCS[stage](cfg, run_dir)
    except StageError:
        raise
    except Exception as exc:  # noqa: BLE001 - annotate with the stage name
        raise StageError(stage, f"{type(exc).__name__}: {exc}") from exc
    _record_stage(manifest, stage, cfg_hash, input_hash, list(_STAGE_OUTPUTS[stage]), t0)
    save_manifest(run_dir, manifest)
    return run_dir


def run_pipeline(cfg: PipelineConfig, skip_to: str | None = None, force: bool = False) -> Path:
    """Run all stages in order; returns the run directory.

    Completed stages (matching config + input hashes, outputs present) are
    skipped unless ``force``.  ``skip_to`` jumps straight to a stage,
    trusting whatever artifacts already exist upstream.
    """
    if skip_to is not None and skip_to not in STAGES:
        raise ValueError(f"unknown stage {skip_to!r}; stages: {', '.join(STAGES)}")
    run_dir = resolve_out_dir(cfg.out_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    from .config import save_config

    save_config(cfg, run_dir / "config.yaml")
    manifest = load_manifest(run_dir)
    manifest["config_hash"] = config_hash(cfg)

    started = skip_to is None
    for stage in STAGES:
        if not started:
            if stage == skip_to:
                started = True
            else:
                log.info("[%s] skipped (--skip-to %s)", stage, skip_to)
                continue
        cfg_hash = _section_hash(_STAGE_CONFIG_SECTIONS[stage](cfg))
        input_hash = hash_paths([run_dir / rel for rel in _STAGE_INPUTS[stage]])
        if not force and _stage_current(manifest, stage, cfg_hash, input_hash, run_dir):
            log.info("[%s] up to date, skipping", stage)
            continue
        t0 = time.time()
        log.info("[%s] running", stage)
        try:
            _STAGE_FUNCS[stage](cfg, run_dir)
        except StageError:
            raise
        except Exception as exc:  # noqa: BLE001 - annotate with the stage name
            raise StageError(stage, f"{type(exc).__name__}: {exc}") from exc
        _record_stage(manifest, stage, cfg_hash, input_hash, list(_STAGE_OUTPUTS[stage]), t0)
        save_manifest(run_dir, manifest)
        log.info("[%s] done in %.1fs", stage, manifest["stages"][stage]["duration_s"])
    return run_dir
