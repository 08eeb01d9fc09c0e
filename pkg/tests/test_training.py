"""Training loops: determinism, loss logging, checkpointing."""

import csv

import torch

import pytest

from percepvid.model.backbone import BackboneConfig
from percepvid.model.bct import BCTConfig, BCTTeacher
from percepvid.training import (
    LatentPairs,
    TrainConfig,
    TrainingError,
    load_stage1_model,
    load_student,
    stage1_train,
    stage2_train,
    train_single_stream,
)

BCFG = BackboneConfig(K=3, d=48, heads=4, in_channels=8, n_classes=4)
BCT = BCTConfig(link_blocks=(1, 3))


def _data(n=6, seed=0):
    g = torch.Generator().manual_seed(seed)
    return LatentPairs(
        z_rgb=torch.randn(n, 8, 2, 4, 4, generator=g),
        z_percep=torch.randn(n, 8, 2, 4, 4, generator=g),
        y=torch.randint(0, 4, (n,), generator=g),
    )


def _tc(**kw):
    base = dict(steps=6, batch_size=2, seed=1, ckpt_every=0)
    base.update(kw)
    return TrainConfig(**base)


@pytest.mark.parametrize("arch", ["parallel", "channel", "spatial"])
def test_stage1_runs_all_arches(arch, tmp_path):
    res = stage1_train(_data(), arch, BCFG, BCT, _tc(), tmp_path / arch)
    assert (tmp_path / arch / "ckpt-final.pt").exists()
    assert (tmp_path / arch / "losses.csv").exists()
    assert (tmp_path / arch / "losses.png").exists()
    assert len(res["rows"]) == 6
    model, payload = load_stage1_model(res["checkpoint"])
    assert payload["kind"] == f"stage1-{arch}"


def test_stage1_deterministic(tmp_path):
    r1 = stage1_train(_data(), "parallel", BCFG, BCT, _tc(), tmp_path / "a")
    r2 = stage1_train(_data(), "parallel", BCFG, BCT, _tc(), tmp_path / "b")
    assert [r["loss"] for r in r1["rows"]] == [r["loss"] for r in r2["rows"]]


def test_stage1_prefix_consistency(tmp_path):
    """A shorter run is an exact prefix of a longer one (same seed)."""
    long = stage1_train(_data(), "parallel", BCFG, BCT, _tc(steps=8), tmp_path / "l")
    short = stage1_train(_data(), "parallel", BCFG, BCT, _tc(steps=4), tmp_path / "s")
    assert [r["loss"] for r in long["rows"][:4]] == [r["loss"] for r in short["rows"]]


def test_stage1_zero_lr_is_noop(tmp_path):
    data = _data()
    res = stage1_train(data, "parallel", BCFG, BCT, _tc(lr=0.0, weight_decay=0.0), tmp_path / "z")
    model = res["model"]
    torch.manual_seed(_tc().seed)
    fresh = BCTTeacher(BCFG, BCT)
    for p1, p2 in zip(model.parameters(), fresh.parameters()):
        assert torch.equal(p1, p2)


def test_stage1_csv_columns(tmp_path):
    stage1_train(_data(), "parallel", BCFG, BCT, _tc(), tmp_path / "c")
    with open(tmp_path / "c" / "losses.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert set(rows[0]) == {"step", "loss", "loss_rgb", "loss_percep"}
    assert len(rows) == 6


def test_stage1_empty_dataset_rejected(tmp_path):
    empty = LatentPairs(torch.zeros(0, 8, 2, 4, 4), torch.zeros(0, 8, 2, 4, 4), torch.zeros(0, dtype=torch.long))
    with pytest.raises(TrainingError):
        stage1_train(empty, "parallel", BCFG, BCT, _tc(), tmp_path / "e")


def test_stage1_periodic_checkpoints(tmp_path):
    stage1_train(_data(), "parallel", BCFG, BCT, _tc(steps=5, ckpt_every=2), tmp_path / "p")
    assert (tmp_path / "p" / "ckpt-2.pt").exists()
    assert (tmp_path / "p" / "ckpt-4.pt").exists()
    assert (tmp_path / "p" / "ckpt-final.pt").exists()


def test_stage2_end_to_end(tmp_path):
    data = _data()
    t = stage1_train(data, "parallel", BCFG, BCT, _tc(), tmp_path / "t")
    s = stage2_train(t["checkpoint"], data, _tc(steps=5), tmp_path / "s")
    assert (tmp_path / "s" / "ckpt-final.pt").exists()
    assert (tmp_path / "s" / "projector.pt").exists()
    with open(s["csv"]) as fh:
        rows = list(csv.DictReader(fh))
    assert set(rows[0]) == {"step", "loss", "loss_diff", "loss_distill"}
    student, payload = load_student(s["checkpoint"])
    assert payload["kind"] == "student"
    # student is a plain single-stream net
    out = student(data.z_rgb[:2], data.y[:2], torch.rand(2))
    assert out.shape == data.z_rgb[:2].shape


def test_stage2_requires_parallel_teacher(tmp_path):
    data = _data()
    ch = stage1_train(data, "channel", BCFG, BCT, _tc(), tmp_path / "ch")
    with pytest.raises(TrainingError):
        stage2_train(ch["checkpoint"], data, _tc(), tmp_path / "s2")


def test_stage2_deterministic(tmp_path):
    data = _data()
    t = stage1_train(data, "parallel", BCFG, BCT, _tc(), tmp_path / "t")
    s1 = stage2_train(t["checkpoint"], data, _tc(steps=4), tmp_path / "s1")
    s2 = stage2_train(t["checkpoint"], data, _tc(steps=4), tmp_path / "s2")
    assert [r["loss"] for r in s1["rows"]] == [r["loss"] for r in s2["rows"]]


def test_single_stream_baseline(tmp_path):
    res = train_single_stream(_data(), BCFG, _tc(), tmp_path / "b")
    assert (tmp_path / "b" / "ckpt-final.pt").exists()
    assert len(res["rows"]) == 6


def test_checkpoint_atomic_no_partial_files(tmp_path):
    stage1_train(_data(), "parallel", BCFG, BCT, _tc(steps=3), tmp_path / "a")
    stray = [p for p in (tmp_path / "a").iterdir() if p.suffix not in (".pt", ".csv", ".png")]
    assert stray == []
