import pytest
import torch

from percepvid.config import (
    CurationConfig,
    DataConfig,
    PipelineConfig,
    SampleConfig,
)
from percepvid.model.backbone import BackboneConfig
from percepvid.model.bct import BCTConfig
from percepvid.training import TrainConfig


def tiny_pipeline_config(out_dir: str) -> PipelineConfig:
    """Smallest config that exercises every stage in seconds."""
    return PipelineConfig(
        out_dir=out_dir,
        data=DataConfig(n_clips=8, frames=8, height=32, width=32, n_track_points=64),
        backbone=BackboneConfig(K=4, d=64, heads=4, in_channels=24),
        bct=BCTConfig(link_blocks=(2, 4)),
        train=TrainConfig(steps=12, batch_size=2, ckpt_every=0),
        distill=TrainConfig(steps=10, batch_size=2, ckpt_every=0),
        curation=CurationConfig(n_out=8),
        sample=SampleConfig(steps=4, n_videos=1, scene_class="ball1"),
    )


@pytest.fixture(scope="session")
def tiny_corpus(tmp_path_factory):
    """8-clip generated corpus with percep frames and scores.ndjson."""
    from percepvid.pipeline import run_encode_percep, run_gen_data

    run_dir = tmp_path_factory.mktemp("corpus")
    cfg = tiny_pipeline_config(str(run_dir))
    run_gen_data(cfg, run_dir)
    run_encode_percep(cfg, run_dir)
    return run_dir / "data", cfg


@pytest.fixture(autouse=True)
def _single_thread():
    # keep timings stable and runs deterministic across CI machines
    torch.set_num_threads(max(1, torch.get_num_threads()))
    yield
