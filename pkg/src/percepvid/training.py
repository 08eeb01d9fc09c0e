"""Stage I (joint teacher) and stage II (relation distillation) training.

Both loops are deliberately plain: a seeded permutation sampler over an
in-memory latent dataset, AdamW, a CSV loss log, periodic atomic
checkpoints, and nothing else.  One ``torch.Generator`` seeded once drives
every stochastic draw (batch order, timesteps, noise, condition dropout),
which together with model construction under ``torch.manual_seed`` makes a
run bit-reproducible from its config.

Stage I optimizes the unweighted mean of the two modality noise-MSE
losses; the timestep t is shared within each (RGB, percep) pair -- the
branches must sit at the same noise level for pixel-aligned cross-control
to mean anything -- while the noise draws are independent.

Stage II freezes the teacher, initializes the student from the teacher's
shared weights (task embeddings folded into biases), and optimizes

    L = L_diffusion(RGB) + lambda * L_distill

where L_distill aligns relation maps at the control-link blocks.  The
frozen teacher runs its full dual-stream pass with the paired perception
latent so its RGB hidden states actually carry perceptual control.  The
projector gets its own (higher) learning rate: at desk scale a fresh MLP
cannot move far enough in a few hundred steps at the model's tiny rate.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import torch

from .distill.distiller import Projector, distill_loss
from .model.backbone import Backbone, BackboneConfig
from .model.bct import (
    BCTConfig,
    BCTTeacher,
    SpatialwiseModel,
    build_channelwise,
    make_student,
)
from .model.checkpoint import load_checkpoint, save_checkpoint
from .model.diffusion import diffusion_loss_given, drop_condition, noise_forward

ARCHES = ("parallel", "channel", "spatial")


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    steps: int = 500
    batch_size: int = 4
    lr: float = 2e-4  # stage I
    lr_stage2: float = 2e-5  # student weights in stage II
    lr_projector: float = 1e-3  # fresh projector needs a faster schedule
    weight_decay: float = 0.0
    lambda_distill: float = 0.5
    cond_drop_p: float = 0.1
    seed: int = 0
    log_every: int = 1
    ckpt_every: int = 250


@dataclass
class LatentPairs:
    """In-memory training set of paired latents."""

    z_rgb: torch.Tensor  # [N, c, f, h, w]
    z_percep: torch.Tensor  # [N, c, f, h, w]
    y: torch.Tensor  # [N] long

    def __len__(self) -> int:
        return self.z_rgb.shape[0]


class _BatchSampler:
    """Seeded epoch-permutation batcher."""

    def __init__(self, n: int, batch_size: int, generator: torch.Generator):
        self.n = n
        self.batch_size = min(batch_size, n)
        self.generator = generator
        self._queue: list[int] = []

    def next_batch(self) -> torch.Tensor:
        while len(self._queue) < self.batch_size:
            perm = torch.randperm(self.n, generator=self.generator).tolist()
            self._queue.extend(perm)
        batch = self._queue[: self.batch_size]
        self._queue = self._queue[self.batch_size :]
        return torch.tensor(batch, dtype=torch.long)


def write_loss_csv(path: Path, rows: list[dict], fieldnames: list[str]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)


def plot_loss_curves(csv_path: Path, png_path: Path, columns: list[str]) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    steps, series = [], {c: [] for c in columns}
    with open(csv_path) as fh:
        for row in csv.DictReader(fh):
            steps.append(int(row["step"]))
            for c in columns:
                series[c].append(float(row[c]))
    fig, ax = plt.subplots(figsize=(7, 4))
    for c in columns:
        ax.plot(steps, series[c], label=c)
    ax.set_xlabel("step")
    ax.set_ylabel("loss")
    ax.set_yscale("log")
    ax.legend()
    fig.tight_layout()
    fig.savefig(png_path, dpi=110)
    plt.close(fig)


def build_stage1_model(arch: str, backbone_cfg: BackboneConfig, bct_cfg: BCTConfig, seed: int):
    """Construct the arch-specific joint model with seeded initialization."""
    if arch not in ARCHES:
        raise ValueError(f"arch must be one of {ARCHES}, got {arch!r}")
    torch.manual_seed(seed)
    if arch == "parallel":
        return BCTTeacher(backbone_cfg, bct_cfg)
    if arch == "channel":
        return build_channelwise(backbone_cfg)
    return SpatialwiseModel(Backbone(backbone_cfg))


def _joint_step_losses(model, batch_z_rgb, batch_z_percep, y, t, eps_r, eps_p):
    zr_t = noise_forward(batch_z_rgb, t, eps_r)
    zp_t = noise_forward(batch_z_percep, t, eps_p)
    pred_r, pred_p = model.joint_forward(zr_t, zp_t, y, t)
    loss_r = torch.mean((pred_r - eps_r) ** 2)
    loss_p = torch.mean((pred_p - eps_p) ** 2)
    return loss_r, loss_p


def stage1_train(
    data: LatentPairs,
    arch: str,
    backbone_cfg: BackboneConfig,
    bct_cfg: BCTConfig,
    train_cfg: TrainConfig,
    out_dir,
) -> dict:
    """Train one joint model; returns paths and the loss history.

    Output directory gains ckpt-final.pt (plus periodic ckpt-<step>.pt),
    losses.csv (step, loss, loss_rgb, loss_percep) and losses.png.
    """
    if len(data) == 0:
        raise TrainingError("empty dataset")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model = build_stage1_model(arch, backbone_cfg, bct_cfg, train_cfg.seed)
    model.train()
    opt = torch.optim.AdamW(model.parameters(), lr=train_cfg.lr, weight_decay=train_cfg.weight_decay)
    gen = torch.Generator().manual_seed(train_cfg.seed)
    sampler = _BatchSampler(len(data), train_cfg.batch_size, gen)
    null_class = backbone_cfg.null_class

    rows = []
    for step in range(1, train_cfg.steps + 1):
        idx = sampler.next_batch()
        zr = data.z_rgb[idx]
        zp = data.z_percep[idx]
        y = data.y[idx]
        B = zr.shape[0]
        t = torch.rand(B, generator=gen)
        eps_r = torch.randn(zr.shape, generator=gen)
        eps_p = torch.randn(zp.shape, generator=gen)
        y_in = drop_condition(y, null_class, train_cfg.cond_drop_p, gen)

        loss_r, loss_p = _joint_step_losses(model, zr, zp, y_in, t, eps_r, eps_p)
        loss = 0.5 * (loss_r + loss_p)
        if not torch.isfinite(loss):
            raise TrainingError(f"non-finite loss at step {step}: {loss.item()}")
        opt.zero_grad()
        loss.backward()
        opt.step()

        if step % train_cfg.log_every == 0 or step == train_cfg.steps:
            rows.append(
                {
                    "step": step,
                    "loss": loss.item(),
                    "loss_rgb": loss_r.item(),
                    "loss_percep": loss_p.item(),
                }
            )
        if train_cfg.ckpt_every and step % train_cfg.ckpt_every == 0 and step < train_cfg.steps:
            save_checkpoint(
                out_dir / f"ckpt-{step}.pt", model, kind=f"stage1-{arch}",
                configs={"backbone": backbone_cfg, "bct": bct_cfg, "train": train_cfg},
                step=step,
            )

    final = out_dir / "ckpt-final.pt"
    save_checkpoint(
        final, model, kind=f"stage1-{arch}",
        configs={"backbone": backbone_cfg, "bct": bct_cfg, "train": train_cfg},
        step=train_cfg.steps,
    )
    csv_path = out_dir / "losses.csv"
    write_loss_csv(csv_path, rows, ["step", "loss", "loss_rgb", "loss_percep"])
    plot_loss_curves(csv_path, out_dir / "losses.png", ["loss", "loss_rgb", "loss_percep"])
    return {"checkpoint": final, "csv": csv_path, "rows": rows, "model": model}


def load_stage1_model(path):
    """Rebuild a stage-I model (any arch) from its checkpoint."""
    payload = load_checkpoint(path)
    kind = payload["kind"]
    backbone_cfg = backbone_config_from_dict(payload["configs"]["backbone"])
    if kind == "stage1-parallel":
        bct_cfg = bct_config_from_dict(payload["configs"]["bct"])
        model = BCTTeacher(backbone_cfg, bct_cfg)
    elif kind == "stage1-channel":
        model = build_channelwise(backbone_cfg)  # rebuilds the widened net
    elif kind == "stage1-spatial":
        model = SpatialwiseModel(Backbone(backbone_cfg))
    else:
        raise ValueError(f"not a stage-1 checkpoint: {kind}")
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model, payload


def backbone_config_from_dict(d: dict) -> BackboneConfig:
    d = dict(d)
    d["patch"] = tuple(d["patch"])
    return BackboneConfig(**d)


def bct_config_from_dict(d: dict) -> BCTConfig:
    d = dict(d)
    d["link_blocks"] = tuple(d["link_blocks"])
    return BCTConfig(**d)


def stage2_train(
    teacher_ckpt,
    data: LatentPairs,
    train_cfg: TrainConfig,
    out_dir,
) -> dict:
    """Distill the frozen dual-stream teacher into a single-stream student.

    Output directory gains ckpt-final.pt, losses.csv with columns
    (step, loss, loss_diff, loss_distill) and losses.png.
    """
    if len(data) == 0:
        raise TrainingError("empty dataset")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    teacher, payload = load_stage1_model(teacher_ckpt)
    if not isinstance(teacher, BCTTeacher):
        raise TrainingError("stage II requires a parallel-arch (teacher) checkpoint")
    teacher.requires_grad_(False)
    teacher.eval()
    backbone_cfg = teacher.base.cfg
    link_set = [l - 1 for l in teacher.link_block_set()]  # 0-based block indices

    torch.manual_seed(train_cfg.seed)
    student = make_student(teacher)
    student.train()
    projector = Projector(backbone_cfg.d)
    opt = torch.optim.AdamW(
        [
            {"params": student.parameters(), "lr": train_cfg.lr_stage2},
            {"params": projector.parameters(), "lr": train_cfg.lr_projector},
        ],
        weight_decay=train_cfg.weight_decay,
    )
    gen = torch.Generator().manual_seed(train_cfg.seed)
    sampler = _BatchSampler(len(data), train_cfg.batch_size, gen)
    grid = student.token_grid(tuple(data.z_rgb.shape[1:]))

    rows = []
    for step in range(1, train_cfg.steps + 1):
        idx = sampler.next_batch()
        zr = data.z_rgb[idx]
        zp = data.z_percep[idx]
        y = data.y[idx]
        B = zr.shape[0]
        t = torch.rand(B, generator=gen)
        eps_r = torch.randn(zr.shape, generator=gen)
        eps_p = torch.randn(zp.shape, generator=gen)

        zr_t = noise_forward(zr, t, eps_r)
        zp_t = noise_forward(zp, t, eps_p)
        with torch.no_grad():
            _, _, teacher_hid, _ = teacher(zr_t, zp_t, y, t, return_hidden=True)
        pred, student_hid = student(zr_t, y, t, return_hidden=True)

        loss_diff = torch.mean((pred - eps_r) ** 2)
        loss_dist = distill_loss(
            [teacher_hid[l] for l in link_set],
            [student_hid[l] for l in link_set],
            projector,
            grid,
        )
        loss = loss_diff + train_cfg.lambda_distill * loss_dist
        if not torch.isfinite(loss):
            raise TrainingError(f"non-finite loss at step {step}: {loss.item()}")
        opt.zero_grad()
        loss.backward()
        opt.step()

        if step % train_cfg.log_every == 0 or step == train_cfg.steps:
            rows.append(
                {
                    "step": step,
                    "loss": loss.item(),
                    "loss_diff": loss_diff.item(),
                    "loss_distill": loss_dist.item(),
                }
            )

    final = out_dir / "ckpt-final.pt"
    save_checkpoint(
        final, student, kind="student",
        configs={"backbone": backbone_cfg, "train": train_cfg},
        step=train_cfg.steps,
        extra={"teacher": str(teacher_ckpt), "lambda": train_cfg.lambda_distill},
    )
    save_checkpoint(
        out_dir / "projector.pt", projector, kind="projector",
        configs={"backbone": backbone_cfg}, step=train_cfg.steps,
    )
    csv_path = out_dir / "losses.csv"
    write_loss_csv(csv_path, rows, ["step", "loss", "loss_diff", "loss_distill"])
    plot_loss_curves(csv_path, out_dir / "losses.png", ["loss", "loss_diff", "loss_distill"])
    return {
        "checkpoint": final,
        "csv": csv_path,
        "rows": rows,
        "model": student,
        "projector": projector,
    }


def load_student(path) -> tuple[Backbone, dict]:
    payload = load_checkpoint(path)
    if payload["kind"] not in ("student", "single"):
        raise ValueError(f"not a student checkpoint: {payload['kind']}")
    cfg = backbone_config_from_dict(payload["configs"]["backbone"])
    model = Backbone(cfg)
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model, payload


def train_single_stream(
    data: LatentPairs,
    backbone_cfg: BackboneConfig,
    train_cfg: TrainConfig,
    out_dir,
) -> dict:
    """Plain RGB-only baseline (the 'no perception anywhere' reference)."""
    if len(data) == 0:
        raise TrainingError("empty dataset")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    torch.manual_seed(train_cfg.seed)
    model = Backbone(backbone_cfg)
    model.train()
    opt = torch.optim.AdamW(model.parameters(), lr=train_cfg.lr, weight_decay=train_cfg.weight_decay)
    gen = torch.Generator().manual_seed(train_cfg.seed)
    sampler = _BatchSampler(len(data), train_cfg.batch_size, gen)
    rows = []
    for step in range(1, train_cfg.steps + 1):
        idx = sampler.next_batch()
        zr = data.z_rgb[idx]
        y = data.y[idx]
        t = torch.rand(zr.shape[0], generator=gen)
        eps = torch.randn(zr.shape, generator=gen)
        y_in = drop_condition(y, backbone_cfg.null_class, train_cfg.cond_drop_p, gen)
        loss = diffusion_loss_given(model, zr, y_in, t, eps)
        if not torch.isfinite(loss):
            raise TrainingError(f"non-finite loss at step {step}")
        opt.zero_grad()
        loss.backward()
        opt.step()
        rows.append({"step": step, "loss": loss.item()})
    final = out_dir / "ckpt-final.pt"
    save_checkpoint(final, model, kind="single", configs={"backbone": backbone_cfg, "train": train_cfg}, step=train_cfg.steps)
    csv_path = out_dir / "losses.csv"
    write_loss_csv(csv_path, rows, ["step", "loss"])
    return {"checkpoint": final, "csv": csv_path, "rows": rows, "model": model}
