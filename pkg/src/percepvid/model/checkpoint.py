"""Single-file checkpoints with a config header, written atomically."""

from __future__ import annotations

import dataclasses
import os
import tempfile
from pathlib import Path

import torch

FORMAT_VERSION = 1


def _cfg_dict(cfg) -> dict:
    return dataclasses.asdict(cfg) if dataclasses.is_dataclass(cfg) else dict(cfg)


def save_checkpoint(path, model: torch.nn.Module, kind: str, configs: dict, step: int, extra: dict | None = None):
    """Serialize model + configs; write-temp-then-rename so a crash never
    leaves a truncated file behind."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "configs": {k: _cfg_dict(v) for k, v in configs.items()},
        "state_dict": model.state_dict(),
        "step": int(step),
        "extra": extra or {},
    }
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            torch.save(payload, fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    payload = torch.load(path, map_location="cpu", weights_only=False)
    if payload.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format in {path}")
    return payload
