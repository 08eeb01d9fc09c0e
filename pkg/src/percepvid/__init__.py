"""percepvid: physics-aware joint RGB+perception video diffusion at desk scale.

Subpackages:
    world    -- procedural physics scenes with exact ground-truth annotations
    percep   -- unified pseudo-RGB perception video encoding
    model    -- DiT denoiser, forward/reverse diffusion, dual-branch teacher
    distill  -- relation-based teacher->student distillation
    curation -- score filtering, multi-label balancing, resampling
"""

__version__ = "0.1.0"
