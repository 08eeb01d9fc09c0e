"""Relation-alignment distillation loss and the trainable projector."""

from __future__ import annotations

import torch
import torch.nn as nn

from .relations import relation_spatial, relation_temporal


class Projector(nn.Module):
    """Two-layer MLP h_phi mapping student width d to teacher width d."""

    def __init__(self, d_student: int, d_teacher: int | None = None, hidden_mult: int = 2):
        super().__init__()
        d_teacher = d_teacher or d_student
        hidden = hidden_mult * d_student
        self.net = nn.Sequential(nn.Linear(d_student, hidden), nn.SiLU(), nn.Linear(hidden, d_teacher))

    def forward(self, x):
        return self.net(x)


def _as_grid(hidden: torch.Tensor, grid: tuple[int, int]) -> torch.Tensor:
    """[B, n, d] -> [B, f, n_s, d] using the patchify token order (f-major)."""
    B, n, d = hidden.shape
    f, n_s = grid
    if f * n_s != n:
        raise ValueError(f"token grid {grid} incompatible with n={n}")
    return hidden.reshape(B, f, n_s, d)


def relation_gap(teacher_grid: torch.Tensor, student_grid: torch.Tensor) -> torch.Tensor:
    """Mean |delta R_spa| + mean |delta R_temp| for one aligned block."""
    spa = torch.mean(torch.abs(relation_spatial(teacher_grid) - relation_spatial(student_grid)))
    temp = torch.mean(torch.abs(relation_temporal(teacher_grid) - relation_temporal(student_grid)))
    return spa + temp


def distill_loss(
    teacher_hiddens: list[torch.Tensor],
    student_hiddens: list[torch.Tensor],
    projector: Projector,
    grid: tuple[int, int],
) -> torch.Tensor:
    """Mean over aligned blocks of the spatial+temporal relation gaps.

    Args:
        teacher_hiddens: per-block [B, n, d] post-link RGB-branch states,
            already detached / produced under no_grad (teacher is frozen).
        student_hiddens: matching per-block [B, n, d] student states.
        projector: h_phi applied to every student hidden state.
        grid: (f, n_s) token grid of the latent.

    Returns:
        scalar in [0, 4] (each term is a mean of |cos - cos| <= 2).
    """
    if len(teacher_hiddens) != len(student_hiddens):
        raise ValueError("mismatched block sets for distillation")
    if not teacher_hiddens:
        raise ValueError("empty block set")
    gaps = []
    for ht, hs in zip(teacher_hiddens, student_hiddens):
        tg = _as_grid(ht.detach(), grid)
        sg = _as_grid(projector(hs), grid)
        gaps.append(relation_gap(tg, sg))
    return torch.stack(gaps).mean()
