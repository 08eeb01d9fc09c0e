from .scene import Camera, SceneSpec, SceneTruth, VideoClip, random_scene
from .simulate import simulate
from .scoring import ScoreRecord, score_record_from_truth

__all__ = [
    "Camera",
    "SceneSpec",
    "SceneTruth",
    "VideoClip",
    "random_scene",
    "simulate",
    "ScoreRecord",
    "score_record_from_truth",
]
