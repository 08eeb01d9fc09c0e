"""Joint RGB+perception architectures over one shared DiT.

Three ways to couple the two modalities, all built on :class:`Backbone`:

* ``BCTTeacher`` -- weight-shared parallel branches.  Each branch gets its
  own task embedding added to the timestep embedding (and a distinct pair
  added to the input tokens).  Zero-initialized linear control links cross-
  inject hidden states at a block subset S, plus one bidirectional pair
  before the first block.  At initialization every link is exactly zero, so
  the two branches are provably independent single-stream passes.

* ``ChannelwiseModel`` -- latents concatenated on the channel axis, one
  pass, constant sequence length.  When widened from an existing backbone,
  the extra input columns and output rows start at zero so the RGB half
  reproduces the original model exactly.

* ``SpatialwiseModel`` -- each modality patchified independently and the
  token sequences concatenated along width, disambiguated by a rotary
  width offset; sequence length doubles.

The cross-update is simultaneous: both links read the *pre-update* hidden
state of the opposite branch:

    h_rgb'    = h_rgb    + Link_{p->r}(h_percep)
    h_percep' = h_percep + Link_{r->p}(h_rgb)
"""

from __future__ import annotations

import copy
from dataclasses import dataclass

import torch
import torch.nn as nn

from .backbone import Backbone, BackboneConfig, zero_module


@dataclass
class BCTConfig:
    # 1-based indices of blocks whose outputs are cross-linked; mirrors an
    # every-few-blocks placement at K=8 desk scale.
    link_blocks: tuple[int, ...] = (2, 5, 8)
    pre_link: bool = True
    token_emb_std: float = 0.02


class BCTTeacher(nn.Module):
    """Bidirectionally controlled dual-branch teacher."""

    def __init__(self, base_cfg: BackboneConfig, bct_cfg: BCTConfig | None = None):
        super().__init__()
        bct_cfg = bct_cfg or BCTConfig()
        for l in bct_cfg.link_blocks:
            if not 1 <= l <= base_cfg.K:
                raise ValueError(f"link block {l} outside 1..{base_cfg.K}")
        self.bct_cfg = bct_cfg
        self.base = Backbone(base_cfg)
        d = base_cfg.d
        # Timestep-added task embeddings start at zero (a fresh teacher is
        # then exactly the base model on either branch); the token-added
        # pair is small-normal so branches can diverge once links train.
        self.e_rgb = nn.Parameter(torch.zeros(d))
        self.e_percep = nn.Parameter(torch.zeros(d))
        self.tok_rgb = nn.Parameter(torch.randn(d) * bct_cfg.token_emb_std)
        self.tok_percep = nn.Parameter(torch.randn(d) * bct_cfg.token_emb_std)

        keys = (["pre"] if bct_cfg.pre_link else []) + [str(l) for l in bct_cfg.link_blocks]
        self.links_p2r = nn.ModuleDict({k: zero_module(nn.Linear(d, d)) for k in keys})
        self.links_r2p = nn.ModuleDict({k: zero_module(nn.Linear(d, d)) for k in keys})

    @property
    def cfg(self) -> BackboneConfig:
        return self.base.cfg

    def link_block_set(self) -> tuple[int, ...]:
        return tuple(self.bct_cfg.link_blocks)

    def forward(
        self,
        z_rgb: torch.Tensor,
        z_percep: torch.Tensor,
        y: torch.Tensor,
        t: torch.Tensor,
        return_hidden: bool = False,
    ):
        """Run both branches; returns (eps_rgb, eps_percep[, hiddens pair]).

        Hidden lists hold each branch's post-link output of every block
        (the states the distiller aligns against at blocks in S).
        """
        if z_rgb.shape != z_percep.shape:
            raise ValueError(f"modality shape mismatch: {z_rgb.shape} vs {z_percep.shape}")
        base = self.base
        c_rgb = base.condition(t, y, cond_add=self.e_rgb)
        c_percep = base.condition(t, y, cond_add=self.e_percep)

        h_r = base.patchify(z_rgb) + self.tok_rgb
        h_p = base.patchify(z_percep) + self.tok_percep
        if "pre" in self.links_p2r:
            a, b = h_r, h_p
            h_r = a + self.links_p2r["pre"](b)
            h_p = b + self.links_r2p["pre"](a)

        pos = base.positions(z_rgb.shape, device=z_rgb.device) if base.rope else None
        cos, sin = base.rope_tables(pos)
        linked = set(self.bct_cfg.link_blocks)
        hid_r: list[torch.Tensor] = []
        hid_p: list[torch.Tensor] = []
        for i, block in enumerate(base.blocks, start=1):
            a = block(h_r, c_rgb, cos, sin)
            b = block(h_p, c_percep, cos, sin)
            if i in linked:
                h_r = a + self.links_p2r[str(i)](b)
                h_p = b + self.links_r2p[str(i)](a)
            else:
                h_r, h_p = a, b
            if return_hidden:
                hid_r.append(h_r)
                hid_p.append(h_p)

        eps_r = base.unpatchify(base.final(h_r, c_rgb), z_rgb.shape)
        eps_p = base.unpatchify(base.final(h_p, c_percep), z_percep.shape)
        if return_hidden:
            return eps_r, eps_p, hid_r, hid_p
        return eps_r, eps_p

    def joint_forward(self, z_rgb, z_percep, y, t):
        return self.forward(z_rgb, z_percep, y, t)

    def rgb_branch_forward(self, z_rgb, y, t, return_hidden: bool = False):
        """RGB branch alone, links inactive (the 'no perceptual control'
        variant, also the student's step-0 reference)."""
        return self.base(
            z_rgb, y, t,
            cond_add=self.e_rgb,
            token_add=self.tok_rgb,
            return_hidden=return_hidden,
        )

    def percep_branch_forward(self, z_percep, y, t, return_hidden: bool = False):
        """Perception branch alone, links inactive."""
        return self.base(
            z_percep, y, t,
            cond_add=self.e_percep,
            token_add=self.tok_percep,
            return_hidden=return_hidden,
        )

    def param_count(self) -> int:
        return sum(p.numel() for p in self.parameters())


def teacher_forward(teacher: BCTTeacher, z_rgb, z_percep, y, t, return_hidden=False):
    return teacher(z_rgb, z_percep, y, t, return_hidden=return_hidden)


class ChannelwiseModel(nn.Module):
    """Single-stream fusion on the channel axis (constant sequence length)."""

    def __init__(self, net: Backbone, modality_channels: int):
        super().__init__()
        if net.cfg.in_channels != 2 * modality_channels:
            raise ValueError("net must take 2x modality channels")
        self.net = net
        self.c = modality_channels

    def forward(self, z_rgb, z_percep, y, t):
        if z_rgb.shape != z_percep.shape:
            raise ValueError("modality shape mismatch")
        both = torch.cat([z_rgb, z_percep], dim=1)
        out = self.net(both, y, t)
        return out[:, : self.c], out[:, self.c :]

    joint_forward = forward

    def param_count(self) -> int:
        return sum(p.numel() for p in self.parameters())


def widen_channelwise(base: Backbone) -> ChannelwiseModel:
    """Build the channel-fusion model from a single-modality backbone.

    The widened input projection keeps the original weights for the first
    c channels and zero for the new ones; the widened output head copies
    the original rows and zero-fills the rest.  At initialization the RGB
    half of the joint output therefore equals the base model's output.
    """
    cfg = base.cfg
    wide_cfg = copy.deepcopy(cfg)
    wide_cfg.in_channels = 2 * cfg.in_channels
    wide_cfg.out_channels = 2 * (cfg.out_channels or cfg.in_channels)
    net = Backbone(wide_cfg)
    src = base.state_dict()
    dst = net.state_dict()
    for name, tensor in src.items():
        if name in ("patch_proj.weight",):
            dst[name].zero_()
            dst[name][:, : tensor.shape[1]] = tensor
        elif name in ("final.proj.weight", "final.proj.bias"):
            dst[name].zero_()
            dst[name][: tensor.shape[0]] = tensor
        else:
            dst[name].copy_(tensor)
    net.load_state_dict(dst)
    return ChannelwiseModel(net, cfg.in_channels)


def build_channelwise(cfg: BackboneConfig) -> ChannelwiseModel:
    """Fresh channel-fusion model (for from-scratch ablation training)."""
    return widen_channelwise(Backbone(cfg))


class SpatialwiseModel(nn.Module):
    """Single-stream fusion along the token width axis (2x sequence)."""

    def __init__(self, net: Backbone):
        super().__init__()
        self.net = net

    def forward(self, z_rgb, z_percep, y, t):
        if z_rgb.shape != z_percep.shape:
            raise ValueError("modality shape mismatch")
        net = self.net
        x_r = net.patchify(z_rgb)
        x_p = net.patchify(z_percep)
        n = x_r.shape[1]
        x = torch.cat([x_r, x_p], dim=1)
        c = net.condition(t, y)
        cos = sin = None
        if net.rope is not None:
            _, _, gw = net.grid_shape(z_rgb.shape)
            pos_r = net.positions(z_rgb.shape, device=z_rgb.device)
            pos_p = net.positions(z_percep.shape, w_offset=gw, device=z_percep.device)
            cos, sin = net.rope.angles(torch.cat([pos_r, pos_p], dim=0))
        for block in net.blocks:
            x = block(x, c, cos, sin)
        out = net.final(x, c)
        eps_r = net.unpatchify(out[:, :n], z_rgb.shape)
        eps_p = net.unpatchify(out[:, n:], z_percep.shape)
        return eps_r, eps_p

    joint_forward = forward

    def param_count(self) -> int:
        return sum(p.numel() for p in self.parameters())


def channelwise_forward(model: ChannelwiseModel, z_rgb, z_percep, y, t):
    return model(z_rgb, z_percep, y, t)


def spatialwise_forward(model: SpatialwiseModel, z_rgb, z_percep, y, t):
    return model(z_rgb, z_percep, y, t)


def make_student(teacher: BCTTeacher) -> Backbone:
    """Initialize the single-stream student from the teacher.

    Copies the shared DiT weights and folds the RGB task embeddings into
    existing biases (timestep-MLP output bias and patch-projection bias),
    so the student is architecturally identical to the base single-stream
    model -- same parameter count, same token count, same inference cost --
    while reproducing the teacher's link-free RGB branch at step 0.
    """
    student = Backbone(copy.deepcopy(teacher.base.cfg))
    student.load_state_dict(teacher.base.state_dict())
    with torch.no_grad():
        student.t_embedder.mlp[2].bias += teacher.e_rgb
        student.patch_proj.bias += teacher.tok_rgb
    return student
