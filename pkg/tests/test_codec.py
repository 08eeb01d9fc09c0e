import numpy as np
import pytest
import torch

from percepvid.codec import (
    CodecConfig,
    decode,
    decode_tensor,
    encode,
    encode_tensor,
)
from percepvid.world.scene import VideoClip


def test_roundtrip_close():
    cfg = CodecConfig()
    rng = np.random.default_rng(0)
    x = rng.random((3, 8, 16, 16)).astype(np.float32)
    back = decode(encode(x, cfg))
    assert np.abs(back - x).max() <= 1e-6


def test_shape_contract():
    cfg = CodecConfig(t_f=2, s_f=2)
    z = encode(np.zeros((3, 8, 32, 40), dtype=np.float32), cfg)
    assert tuple(z.data.shape) == (24, 4, 16, 20)
    assert cfg.latent_shape((3, 8, 32, 40)) == (24, 4, 16, 20)
    assert cfg.latent_channels(3) == 24


def test_affine_statistics():
    cfg = CodecConfig(scale=2.0, shift=0.5)
    x = torch.full((3, 2, 2, 2), 0.5)
    z = encode_tensor(x, cfg)
    assert torch.all(z == 0.0)  # shift maps the mid-gray to zero
    x2 = torch.ones((3, 2, 2, 2))
    assert torch.all(encode_tensor(x2, cfg) == 1.0)  # (1-0.5)*2


def test_divisibility_error_names_axis():
    cfg = CodecConfig()
    with pytest.raises(ValueError, match="F"):
        encode(np.zeros((3, 7, 16, 16), dtype=np.float32), cfg)
    with pytest.raises(ValueError, match="H"):
        encode(np.zeros((3, 8, 15, 16), dtype=np.float32), cfg)
    with pytest.raises(ValueError, match="W"):
        encode(np.zeros((3, 8, 16, 15), dtype=np.float32), cfg)


def test_accepts_clip_object():
    frames = np.random.default_rng(1).random((3, 4, 8, 8)).astype(np.float32)
    clip = VideoClip(frames)
    z = encode(clip)
    assert np.abs(decode(z) - frames).max() <= 1e-6


def test_batched_tensor_roundtrip():
    cfg = CodecConfig()
    x = torch.rand(5, 3, 4, 8, 8)
    z = encode_tensor(x, cfg)
    assert z.shape == (5, 24, 2, 4, 4)
    assert torch.allclose(decode_tensor(z, cfg), x, atol=1e-6)


def test_spatial_neighbourhood_grouping():
    """Each latent pixel packs exactly its own t_f x s_f x s_f block."""
    cfg = CodecConfig()
    x = torch.zeros(3, 4, 8, 8)
    x[:, 0:2, 0:2, 0:2] = 1.0  # one full block
    z = encode_tensor(x, cfg)
    # only latent position (0,0,0) should differ from the background value
    bg = (0.0 - cfg.shift) * cfg.scale
    hot = (z != bg).nonzero()
    assert set(hot[:, 1].tolist()) == {0}
    assert set(hot[:, 2].tolist()) == {0}
    assert set(hot[:, 3].tolist()) == {0}
