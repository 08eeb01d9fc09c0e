"""Forward noising, the training objective, and the reverse sampler.

The forward process is implemented exactly as printed:

    z^t = z^0 + sigma_t^2 * eps,     sigma_t^2 = t,  t in [0, 1]

(sigma_t itself is never specified upstream; sigma_t^2 = t is monotone and
recovers the clean latent at t = 0).  Note this does NOT interpolate to
pure noise at t = 1 the way flow-matching schedules do; the discrepancy is
inherited deliberately rather than silently "fixed".

Because no reverse equations exist for this nonstandard forward form, the
deterministic sampler is derived from first principles: the network
predicts eps, so

    zhat^0 = z^t - t * eps_hat
    z^s    = zhat^0 + s * eps_hat  =  z^t - (t - s) * eps_hat

stepping t: 1 -> 0 on a uniform grid.  With steps=1 this collapses to the
single-shot inversion z^0 = z^1 - eps_hat.  Sampling starts from a standard
normal draw at t = 1.
"""

from __future__ import annotations

import torch


def sigma_sq(t: torch.Tensor) -> torch.Tensor:
    return t


def noise_forward(z0: torch.Tensor, t, eps: torch.Tensor) -> torch.Tensor:
    """Apply the forward process at time(s) t.

    Args:
        z0: clean latent [B, c, f, h, w] (or unbatched [c, f, h, w]).
        t: scalar or [B] tensor in [0, 1].
        eps: standard normal noise, same shape as z0.
    """
    if not torch.is_tensor(t):
        t = torch.tensor(float(t), dtype=z0.dtype, device=z0.device)
    if torch.any(t < 0) or torch.any(t > 1):
        raise ValueError("t outside [0, 1]")
    s2 = sigma_sq(t)
    if s2.ndim == 1:  # per-sample times broadcast over latent axes
        s2 = s2.view(-1, *([1] * (z0.ndim - 1)))
    return z0 + s2 * eps


def diffusion_loss_given(model_fn, z0, y, t, eps) -> torch.Tensor:
    """Noise-estimation MSE for fixed draws (deterministic, differentiable)."""
    z_t = noise_forward(z0, t, eps)
    pred = model_fn(z_t, y, t)
    return torch.mean((pred - eps) ** 2)


def drop_condition(y: torch.Tensor, null_class: int, p: float, generator=None) -> torch.Tensor:
    """Replace each label by the null class with probability p."""
    if p <= 0:
        return y
    drop = torch.rand(y.shape, generator=generator, device=y.device) < p
    return torch.where(drop, torch.full_like(y, null_class), y)


def diffusion_loss(
    model_fn,
    z0: torch.Tensor,
    y: torch.Tensor,
    generator: torch.Generator | None = None,
    cond_drop_p: float = 0.0,
    null_class: int | None = None,
) -> torch.Tensor:
    """Draw t ~ U(0,1) per sample and eps ~ N(0,I), return the Eq-style MSE."""
    if z0.shape[0] == 0:
        raise ValueError("empty batch")
    t = torch.rand(z0.shape[0], generator=generator, device=z0.device, dtype=z0.dtype)
    eps = torch.randn(z0.shape, generator=generator, device=z0.device, dtype=z0.dtype)
    if cond_drop_p > 0 and null_class is not None:
        y = drop_condition(y, null_class, cond_drop_p, generator)
    return diffusion_loss_given(model_fn, z0, y, t, eps)


@torch.no_grad()
def sample(
    model_fn,
    latent_shape: tuple[int, ...],
    y: torch.Tensor,
    steps: int = 50,
    seed: int = 0,
    guidance_scale: float = 0.0,
    null_class: int | None = None,
    device="cpu",
) -> torch.Tensor:
    """Deterministic reverse pass; returns the final latent batch.

    Args:
        model_fn: (z, y, t) -> eps prediction.
        latent_shape: [B, c, f, h, w].
        y: [B] class indices.
        steps: reverse steps >= 1.
        guidance_scale: w > 0 blends conditional and null predictions as
            eps = eps_null + (1 + w) * (eps_cond - eps_null).
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    gen = torch.Generator(device=device).manual_seed(seed)
    z = torch.randn(latent_shape, generator=gen, device=device)
    B = latent_shape[0]
    ts = torch.linspace(1.0, 0.0, steps + 1, device=device)
    for i in range(steps):
        t_now = ts[i].expand(B)
        eps_hat = model_fn(z, y, t_now)
        if guidance_scale > 0 and null_class is not None:
            y_null = torch.full_like(y, null_class)
            eps_null = model_fn(z, y_null, t_now)
            eps_hat = eps_null + (1.0 + guidance_scale) * (eps_hat - eps_null)
        z = z - (ts[i] - ts[i + 1]) * eps_hat
    return z
