"""Pairwise token-relation maps over a (frames x spatial-sites) hidden grid.

Similarity is cosine.  A zero-norm token is defined to have similarity 0
against everything, itself included, so relation matrices have unit
diagonals exactly where tokens are nonzero and stay finite everywhere.

Both maps accept arbitrary leading batch axes:

    relation_spatial:  [..., f, n_s, d] -> [..., f, n_s, n_s]
    relation_temporal: [..., f, n_s, d] -> [..., n_s, f, f]
"""

from __future__ import annotations

import torch


def _cosine_gram(h: torch.Tensor) -> torch.Tensor:
    """Cosine similarity of every token pair along dim -2, zero-norm-safe."""
    norms = torch.linalg.vector_norm(h, dim=-1, keepdim=True)
    hn = h / torch.clamp(norms, min=1e-30)
    hn = torch.where(norms > 0, hn, torch.zeros_like(hn))
    return hn @ hn.transpose(-1, -2)


def relation_spatial(hidden: torch.Tensor) -> torch.Tensor:
    """Token-token cosine maps within each frame."""
    return _cosine_gram(hidden)


def relation_temporal(hidden: torch.Tensor) -> torch.Tensor:
    """Frame-frame cosine maps at each spatial site (f and n_s swap roles)."""
    return _cosine_gram(hidden.transpose(-2, -3))
