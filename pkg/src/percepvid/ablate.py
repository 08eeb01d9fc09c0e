"""Ablation sweeps: architecture, perception modality, and distillation.

Every axis runs its full declared row set on identical data, steps, and
seeds; a row that blows up is recorded as a failed row (the table always
contains every declared name) and the sweep continues.  The directional
comparisons are *reported*, never asserted — at desk scale the orderings
of the full-size experiments need not survive.

Row sets:

* arch      — parallel | channel | spatial      (joint-model design)
* modality  — seg | xyz | tracks | unified      (perception layer subset)
* distill   — baseline | teacher | teacher-no-links | student

The scalar each row reports is a deterministic validation diffusion loss:
noise-MSE averaged over a fixed timestep grid with frozen noise draws, so
rows are comparable to the last digit.  Dual-stream rows score their RGB
half with the paired perception latent present; single-stream rows score
their only output.  ToyPC metrics come from a short sampling run per row.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import time
import traceback
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .codec import LatentBlock, decode
from .config import PipelineConfig
from .evaluate import ToyPCReport, evaluate_toy_pc
from .model.bct import BCTConfig
from .model.diffusion import noise_forward, sample
from .pipeline import MODALITY_LAYERS, build_latent_dataset, split_ids
from .training import (
    LatentPairs,
    stage1_train,
    stage2_train,
    train_single_stream,
)
from .world.scene import SCENE_CLASSES

log = logging.getLogger(__name__)

AXES: dict[str, tuple[str, ...]] = {
    "arch": ("parallel", "channel", "spatial"),
    "modality": ("seg", "xyz", "tracks", "unified"),
    "distill": ("baseline", "teacher", "teacher-no-links", "student"),
}


@dataclass
class AblationRow:
    axis: str
    name: str
    status: str = "ok"  # "ok" | "failed"
    eval_loss: float = float("nan")
    train_loss: float = float("nan")
    wall_penetration: float = float("nan")
    count_stability: float = float("nan")
    smoothness: float = float("nan")
    duration_s: float = 0.0
    error: str = ""

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


FIELDS = [f.name for f in dataclasses.fields(AblationRow)]


def _eval_grid(data: LatentPairs, n_t: int, seed: int):
    """Frozen (t, eps) pairs shared by every row."""
    gen = torch.Generator().manual_seed(seed)
    ts = torch.linspace(0.1, 0.9, n_t)
    eps_r = torch.randn((n_t,) + tuple(data.z_rgb.shape), generator=gen)
    eps_p = torch.randn((n_t,) + tuple(data.z_percep.shape), generator=gen)
    return ts, eps_r, eps_p


@torch.no_grad()
def eval_joint_loss(model, data: LatentPairs, n_t: int = 4, seed: int = 1234) -> float:
    """Deterministic RGB-side validation loss for dual-stream models."""
    ts, eps_r, eps_p = _eval_grid(data, n_t, seed)
    total = 0.0
    for i, t in enumerate(ts):
        tb = torch.full((len(data),), float(t))
        zr_t = noise_forward(data.z_rgb, tb, eps_r[i])
        zp_t = noise_forward(data.z_percep, tb, eps_p[i])
        pred_r, _ = model.joint_forward(zr_t, zp_t, data.y, tb)
        total += torch.mean((pred_r - eps_r[i]) ** 2).item()
    return total / len(ts)


@torch.no_grad()
def eval_single_loss(model, data: LatentPairs, n_t: int = 4, seed: int = 1234) -> float:
    """Same protocol for single-stream models (identical noise draws)."""
    ts, eps_r, _ = _eval_grid(data, n_t, seed)
    total = 0.0
    for i, t in enumerate(ts):
        tb = torch.full((len(data),), float(t))
        zr_t = noise_forward(data.z_rgb, tb, eps_r[i])
        pred = model(zr_t, data.y, tb)
        total += torch.mean((pred - eps_r[i]) ** 2).item()
    return total / len(ts)


def _final_train_loss(rows: list[dict]) -> float:
    tail = rows[-10:] if len(rows) >= 10 else rows
    return float(np.mean([r["loss"] for r in tail]))


def _toypc_single(model, cfg: PipelineConfig, seed: int) -> ToyPCReport:
    sc = cfg.sample.scene_class
    n = cfg.sample.n_videos
    y = torch.full((n,), SCENE_CLASSES.index(sc), dtype=torch.long)
    shape = cfg.codec.latent_shape((3, cfg.data.frames, cfg.data.height, cfg.data.width))
    z = sample(model, (n, *shape), y, steps=cfg.sample.steps, seed=seed,
               guidance_scale=cfg.sample.guidance_scale, null_class=cfg.backbone.null_class)
    clips = [np.clip(decode(LatentBlock(zi, cfg.codec)), 0, 1) for zi in z]
    return evaluate_toy_pc(clips, [sc] * n)


def _toypc_joint(model, cfg: PipelineConfig, seed: int) -> ToyPCReport:
    sc = cfg.sample.scene_class
    n = cfg.sample.n_videos
    y = torch.full((n,), SCENE_CLASSES.index(sc), dtype=torch.long)
    c, f, h, w = cfg.codec.latent_shape((3, cfg.data.frames, cfg.data.height, cfg.data.width))

    def paired(zcat, y_in, t):
        zr, zp = zcat.chunk(2, dim=1)
        er, ep = model.joint_forward(zr, zp, y_in, t)
        return torch.cat([er, ep], dim=1)

    z = sample(paired, (n, 2 * c, f, h, w), y, steps=cfg.sample.steps, seed=seed,
               guidance_scale=cfg.sample.guidance_scale, null_class=cfg.backbone.null_class)
    rgb, _ = z.chunk(2, dim=1)
    clips = [np.clip(decode(LatentBlock(zi, cfg.codec)), 0, 1) for zi in rgb]
    return evaluate_toy_pc(clips, [sc] * n)


def _fill_toypc(row: AblationRow, report: ToyPCReport) -> None:
    row.wall_penetration = report.wall_penetration
    row.count_stability = report.count_stability
    row.smoothness = report.smoothness


# -------------------------------------------------------------- row runners


def _run_arch_row(name, cfg, train_data, val_data, out_dir) -> AblationRow:
    row = AblationRow(axis="arch", name=name)
    res = stage1_train(train_data, name, cfg.backbone, cfg.bct, cfg.train, out_dir / name)
    row.train_loss = _final_train_loss(res["rows"])
    row.eval_loss = eval_joint_loss(res["model"], val_data)
    _fill_toypc(row, _toypc_joint(res["model"], cfg, cfg.sample.seed))
    return row


def _run_modality_row(name, cfg, data_dir, train_ids, val_ids, out_dir) -> AblationRow:
    row = AblationRow(axis="modality", name=name)
    layers = MODALITY_LAYERS[name]
    train_data = build_latent_dataset(data_dir, train_ids, cfg.codec, layers=layers, from_disk_percep=False)
    val_data = build_latent_dataset(data_dir, val_ids, cfg.codec, layers=layers, from_disk_percep=False)
    res = stage1_train(train_data, "parallel", cfg.backbone, cfg.bct, cfg.train, out_dir / name)
    row.train_loss = _final_train_loss(res["rows"])
    row.eval_loss = eval_joint_loss(res["model"], val_data)
    _fill_toypc(row, _toypc_joint(res["model"], cfg, cfg.sample.seed))
    return row


def _run_distill_row(name, cfg, train_data, val_data, out_dir, teacher_ckpt) -> AblationRow:
    row = AblationRow(axis="distill", name=name)
    if name == "baseline":
        res = train_single_stream(train_data, cfg.backbone, cfg.train, out_dir / name)
        row.train_loss = _final_train_loss(res["rows"])
        row.eval_loss = eval_single_loss(res["model"], val_data)
        _fill_toypc(row, _toypc_single(res["model"], cfg, cfg.sample.seed))
    elif name == "teacher":
        res = stage1_train(train_data, "parallel", cfg.backbone, cfg.bct, cfg.train, out_dir / name)
        row.train_loss = _final_train_loss(res["rows"])
        row.eval_loss = eval_joint_loss(res["model"], val_data)
        _fill_toypc(row, _toypc_joint(res["model"], cfg, cfg.sample.seed))
    elif name == "teacher-no-links":
        # same dual-branch layout, but no cross-control anywhere
        no_links = BCTConfig(link_blocks=(), pre_link=False, token_emb_std=cfg.bct.token_emb_std)
        res = stage1_train(train_data, "parallel", cfg.backbone, no_links, cfg.train, out_dir / name)
        row.train_loss = _final_train_loss(res["rows"])
        row.eval_loss = eval_joint_loss(res["model"], val_data)
        _fill_toypc(row, _toypc_joint(res["model"], cfg, cfg.sample.seed))
    elif name == "student":
        res = stage2_train(teacher_ckpt, train_data, cfg.distill, out_dir / name)
        row.train_loss = _final_train_loss(res["rows"])
        row.eval_loss = eval_single_loss(res["model"], val_data)
        _fill_toypc(row, _toypc_single(res["model"], cfg, cfg.sample.seed))
    else:
        raise ValueError(f"unknown distill row {name!r}")
    return row


def ablate(cfg: PipelineConfig, axis: str, data_dir, out_dir) -> list[AblationRow]:
    """Run one ablation axis end to end; emits rows.csv + rows.png.

    ``data_dir`` must hold a generated clip corpus (gen-data output); the
    curation step is re-run here so the sweep is self-contained.
    """
    if axis not in AXES:
        raise ValueError(f"axis must be one of {sorted(AXES)}, got {axis!r}")
    data_dir = Path(data_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    from .curation import assign_labels, filter_pool, irbl_weights, read_scores_ndjson, resample

    records = read_scores_ndjson(data_dir / "scores.ndjson")
    c = cfg.curation
    pool = filter_pool(records, vqa_min=c.vqa_min, reality_min=c.reality_min, richness_min=c.richness_min)
    Y = assign_labels(pool, tau=c.tau)
    chosen, _, _ = resample(pool, Y, irbl_weights(Y), n_out=min(c.n_out, len(pool)), seed=c.seed)
    train_ids, val_ids = split_ids([r.video_id for r in chosen])
    if not val_ids:
        val_ids = train_ids[: max(1, len(train_ids) // 10)]

    rows: list[AblationRow] = []
    teacher_ckpt = None
    shared_train = shared_val = None
    if axis in ("arch", "distill"):
        shared_train = build_latent_dataset(data_dir, train_ids, cfg.codec)
        shared_val = build_latent_dataset(data_dir, val_ids, cfg.codec)

    for name in AXES[axis]:
        t0 = time.time()
        try:
            if axis == "arch":
                row = _run_arch_row(name, cfg, shared_train, shared_val, out_dir)
            elif axis == "modality":
                row = _run_modality_row(name, cfg, data_dir, train_ids, val_ids, out_dir)
            else:
                if name == "student" and teacher_ckpt is None:
                    raise RuntimeError("teacher row must succeed before the student row")
                row = _run_distill_row(name, cfg, shared_train, shared_val, out_dir, teacher_ckpt)
                if name == "teacher":
                    teacher_ckpt = out_dir / name / "ckpt-final.pt"
        except Exception as exc:  # noqa: BLE001 - per-row isolation is the contract
            log.warning("ablation row %s/%s failed: %s", axis, name, exc)
            row = AblationRow(axis=axis, name=name, status="failed", error=f"{type(exc).__name__}: {exc}")
            log.debug("%s", traceback.format_exc())
        row.duration_s = round(time.time() - t0, 2)
        rows.append(row)

    write_rows_csv(rows, out_dir / "rows.csv")
    plot_rows(rows, out_dir / "rows.png")
    with open(out_dir / "rows.json", "w") as fh:
        json.dump([r.to_dict() for r in rows], fh, indent=2)
    return rows


def write_rows_csv(rows: list[AblationRow], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=FIELDS)
        writer.writeheader()
        for r in rows:
            writer.writerow(r.to_dict())


def plot_rows(rows: list[AblationRow], path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    names = [r.name for r in rows]
    metrics = ("eval_loss", "count_stability", "wall_penetration")
    fig, axes = plt.subplots(1, len(metrics), figsize=(4 * len(metrics), 3.5))
    for ax, m in zip(axes, metrics):
        vals = [getattr(r, m) for r in rows]
        colors = ["#b04a4a" if r.status == "failed" else "#4878a8" for r in rows]
        ax.bar(range(len(names)), [0.0 if np.isnan(v) else v for v in vals], color=colors)
        ax.set_xticks(range(len(names)))
        ax.set_xticklabels(names, rotation=20, ha="right", fontsize=8)
        ax.set_title(m)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
