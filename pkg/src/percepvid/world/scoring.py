"""Synthetic score records derived from simulator ground truth.

Stands in for external VLM judging.  The rules are fixed and documented:

* vqa      -- mean absolute inter-frame pixel change mapped into [1, 5]
              through a saturating gain (static clip -> 1, lively clip -> 5);
* reality  -- constant 5: the synthetic corpus is physically self-consistent
              by construction;
* richness -- the simulator's own primitive intensities, passed through.
"""

from __future__ import annotations

from ..curation import ScoreRecord
from .scene import PARTICLE_FLUID, RIGID_BALL, SceneSpec, SceneTruth

# Saturating gain for the vqa rule: picked so a single slowly moving ball at
# 64x64 still clears the 3.0 quality bar while a static clip scores 1.
VQA_GAIN = 1200.0

_BALL_NAMES = ("red", "green", "blue", "yellow", "magenta")


def _subject_phrases(spec: SceneSpec) -> list[str]:
    phrases = []
    ball_no = 0
    for kind in spec.object_kinds:
        if kind == RIGID_BALL:
            phrases.append(f"{_BALL_NAMES[ball_no % len(_BALL_NAMES)]} elastic ball")
            ball_no += 1
        elif kind == PARTICLE_FLUID:
            phrases.append("particle fluid puddle")
    return phrases


def score_record_from_truth(truth: SceneTruth, spec: SceneSpec, video_id: str = "") -> ScoreRecord:
    """Build the ScoreRecord for one simulated clip."""
    vqa = 1.0 + 4.0 * min(1.0, VQA_GAIN * truth.frame_change)
    return ScoreRecord(
        video_id=video_id or f"clip-{spec.seed:08d}",
        vqa=float(vqa),
        reality=5,
        s=truth.physics_labels.copy(),
        subject_phrases=_subject_phrases(spec),
    )
