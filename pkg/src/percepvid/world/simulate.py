"""Deterministic physics for balls in a box and damped particle fluids.

Ball dynamics are integrated *event by event*: between contacts every ball
follows the exact closed-form ballistic arc

    p(t) = p0 + v0*t + 0.5*a*t^2,    v(t) = v0 + a*t

which conserves mechanical energy to floating-point rounding, so the
restitution=1 conservation invariant holds without a tolerance budget for
integration error.  Contacts are resolved at their analytic times:

* wall contact on a gravity-free axis: linear solve;
* floor/ceiling contact: stable quadratic solve;
* ball-ball contact: sign-change scan + bisection on |dp(t)|^2 - R^2
  (the polynomial is quadratic whenever both bodies share the same
  acceleration, quartic when one of them is resting on the floor; one
  numeric path covers both).

Impulses use restitution ``e``: wall hits flip the normal velocity
component, pair hits exchange momentum along the center line with masses
m = r^3.  A ball whose post-bounce vertical speed cannot carry it upward
for even one frame is clamped into a resting state (no Zeno cascades).

The fluid is deliberately crude: independent particles with per-frame
velocity damping and a position clamp against the box walls.  It exists to
give the corpus a second dynamics class, not to model liquids.
"""

from __future__ import annotations

import numpy as np

from .. import primitives
from ..percep.points import sample_mask_pixels
from .kernels import render_frame
from .scene import (
    FLUID_PALETTE_INDEX,
    INSTANCE_PALETTE,
    PARTICLE_FLUID,
    RIGID_BALL,
    SceneSpec,
    SceneTruth,
    VideoClip,
)

_T_EPS = 1e-12
_MAX_EVENTS_PER_FRAME = 10_000


class SimulationError(RuntimeError):
    pass


def _ballistic(p, v, resting, g, tau):
    """Advance all balls by tau along their exact arcs (in place)."""
    ay = np.where(resting, 0.0, g)
    p[:, 0] += v[:, 0] * tau
    p[:, 2] += v[:, 2] * tau
    p[:, 1] += v[:, 1] * tau + 0.5 * ay * tau * tau
    v[:, 1] += ay * tau


def _wall_time_linear(pos, vel, lo, hi):
    """Earliest contact time with either bound under linear motion."""
    best = np.inf
    if vel > 0.0:
        t = (hi - pos) / vel
        if t >= -_T_EPS:
            best = max(t, 0.0)
    elif vel < 0.0:
        t = (lo - pos) / vel
        if t >= -_T_EPS:
            best = max(t, 0.0)
    return best


def _quad_roots(a, b, c):
    """Real roots of a*t^2 + b*t + c, numerically stable, ascending."""
    if a == 0.0:
        if b == 0.0:
            return ()
        return (-c / b,)
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return ()
    sq = np.sqrt(disc)
    q = -0.5 * (b + np.copysign(sq, b)) if b != 0.0 else -0.5 * sq
    r1 = q / a
    r2 = c / q if q != 0.0 else r1
    return (r1, r2) if r1 <= r2 else (r2, r1)


def _wall_time_gravity(pos, vel, g, lo, hi):
    """Earliest floor/ceiling contact under constant acceleration g."""
    best = np.inf
    # Floor (hi): approaching means v(t) > 0 there.
    for t in _quad_roots(0.5 * g, vel, pos - hi):
        if t >= -_T_EPS and t < best and vel + g * t > 0.0:
            best = max(t, 0.0)
    for t in _quad_roots(0.5 * g, vel, pos - lo):
        if t >= -_T_EPS and t < best and vel + g * t < 0.0:
            best = max(t, 0.0)
    return best


def _pair_contact_time(p_i, v_i, rest_i, p_j, v_j, rest_j, g, R, horizon):
    """First time in (0, horizon] when |p_i(t) - p_j(t)| hits R, or inf.

    Scans f(t) = |dp(t)|^2 - R^2 for a sign change on a fixed grid, then
    bisects.  Exact-quadratic cases are covered by the same path; grazing
    near-misses shorter than the scan step are deliberately ignored.
    """
    ai = 0.0 if rest_i else g
    aj = 0.0 if rest_j else g

    def f(t):
        dx = (p_i[0] - p_j[0]) + (v_i[0] - v_j[0]) * t
        dz = (p_i[2] - p_j[2]) + (v_i[2] - v_j[2]) * t
        dy = (p_i[1] - p_j[1]) + (v_i[1] - v_j[1]) * t + 0.5 * (ai - aj) * t * t
        return dx * dx + dy * dy + dz * dz - R * R

    if f(0.0) <= 0.0:
        # Already overlapping (post-impulse separation step); only count a
        # *new* contact after the pair separates again.
        return np.inf
    n_steps = 64
    prev_t, prev_f = 0.0, f(0.0)
    for s in range(1, n_steps + 1):
        t = horizon * s / n_steps
        ft = f(t)
        if ft <= 0.0:
            lo, hi = prev_t, t
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if f(mid) <= 0.0:
                    hi = mid
                else:
                    lo = mid
            return hi
        prev_t, prev_f = t, ft
    return np.inf


def simulate_states(spec: SceneSpec):
    """Integrate the scene; return per-frame states and event counts.

    Returns:
        ball_pos: [n_balls, F, 3] float64 (box-center-relative coordinates)
        ball_vel: [n_balls, F, 3] float64
        fluid_pos: [n_particles, F, 3] float64 (empty when no fluid)
        events: dict with wall_hits, ball_hits, fluid speed statistics
    """
    spec.validate()
    e = spec.box_extent
    g = spec.gravity
    rest_coef = spec.restitution
    F = spec.F

    ball_idx = [k for k, kind in enumerate(spec.object_kinds) if kind == RIGID_BALL]
    fluid_idx = [k for k, kind in enumerate(spec.object_kinds) if kind == PARTICLE_FLUID]
    if len(fluid_idx) > 1:
        raise SimulationError("at most one fluid instance per scene")

    nb = len(ball_idx)
    radii = np.array([spec.radii[k] for k in ball_idx], dtype=np.float64)
    masses = radii**3
    p = np.array([spec.init_positions[k] for k in ball_idx], dtype=np.float64).reshape(nb, 3)
    v = np.array([spec.init_velocities[k] for k in ball_idx], dtype=np.float64).reshape(nb, 3)
    resting = np.zeros(nb, dtype=bool)

    ball_pos = np.empty((nb, F, 3))
    ball_vel = np.empty((nb, F, 3))
    wall_hits = 0
    ball_hits = 0

    if nb:
        ball_pos[:, 0] = p
        ball_vel[:, 0] = v

    for frame in range(1, F):
        remaining = 1.0
        n_events = 0
        while remaining > 0.0:
            # Earliest wall contact over balls and axes.
            t_wall = np.inf
            wall_ball = wall_axis = -1
            for k in range(nb):
                lo, hi = -(e - radii[k]), e - radii[k]
                for axis in (0, 2):
                    t = _wall_time_linear(p[k, axis], v[k, axis], lo, hi)
                    if t < t_wall:
                        t_wall, wall_ball, wall_axis = t, k, axis
                if resting[k]:
                    continue  # y is frozen while resting
                t = _wall_time_gravity(p[k, 1], v[k, 1], g, lo, hi)
                if t < t_wall:
                    t_wall, wall_ball, wall_axis = t, k, 1

            # Earliest pair contact.
            t_pair = np.inf
            pair = (-1, -1)
            for i in range(nb):
                for j in range(i + 1, nb):
                    horizon = min(remaining, t_wall)
                    if horizon <= 0.0:
                        break
                    t = _pair_contact_time(
                        p[i], v[i], resting[i], p[j], v[j], resting[j], g, radii[i] + radii[j], horizon
                    )
                    if t < t_pair:
                        t_pair, pair = t, (i, j)

            t_next = min(t_wall, t_pair)
            if t_next > remaining:
                _ballistic(p, v, resting, g, remaining)
                break

            _ballistic(p, v, resting, g, t_next)
            remaining -= t_next
            if t_pair < t_wall:
                i, j = pair
                dn = p[i] - p[j]
                norm = np.linalg.norm(dn)
                if norm > 0.0:
                    n = dn / norm
                    v_rel = np.dot(v[i] - v[j], n)
                    if v_rel < 0.0:
                        imp = -(1.0 + rest_coef) * v_rel / (1.0 / masses[i] + 1.0 / masses[j])
                        v[i] += imp / masses[i] * n
                        v[j] -= imp / masses[j] * n
                        ball_hits += 1
                        # A kick can knock a resting ball loose.
                        if resting[i] and v[i, 1] < 0.0:
                            resting[i] = False
                        if resting[j] and v[j, 1] < 0.0:
                            resting[j] = False
            else:
                k, axis = wall_ball, wall_axis
                bound = e - radii[k]
                p[k, axis] = bound if v[k, axis] > 0.0 else -bound
                v[k, axis] *= -rest_coef
                wall_hits += 1
                if axis == 1 and p[k, 1] > 0.0 and abs(v[k, 1]) <= g * 1.0 and rest_coef < 1.0:
                    # Floor bounce too weak to rise for one frame: rest.
                    v[k, 1] = 0.0
                    resting[k] = True
            n_events += 1
            if n_events > _MAX_EVENTS_PER_FRAME:
                raise SimulationError(f"event cascade in frame {frame}")
        if nb:
            ball_pos[:, frame] = p
            ball_vel[:, frame] = v

    # Fluid: damped independent particles, one instance.
    fluid_pos = np.empty((0, F, 3))
    fluid_speed = 0.0
    if fluid_idx:
        k = fluid_idx[0]
        rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 0xF1D0]))
        n_part = spec.fluid_particles
        r = spec.radii[k]
        center = np.asarray(spec.init_positions[k], dtype=np.float64)
        pp = center + rng.normal(scale=0.12, size=(n_part, 3))
        np.clip(pp, -(e - r), e - r, out=pp)
        vv = np.tile(np.asarray(spec.init_velocities[k], dtype=np.float64), (n_part, 1))
        vv += rng.normal(scale=0.01, size=(n_part, 3))
        fluid_pos = np.empty((n_part, F, 3))
        fluid_pos[:, 0] = pp
        speeds = [np.linalg.norm(vv, axis=1).mean()]
        for frame in range(1, F):
            vv[:, 1] += g
            vv *= spec.fluid_damping
            pp += vv
            for axis in range(3):
                lo, hi = -(e - r), e - r
                under = pp[:, axis] < lo
                over = pp[:, axis] > hi
                pp[under, axis] = lo
                pp[over, axis] = hi
                vv[under | over, axis] = 0.0
            fluid_pos[:, frame] = pp
            speeds.append(np.linalg.norm(vv, axis=1).mean())
        fluid_speed = float(np.mean(speeds))

    events = {
        "wall_hits": wall_hits,
        "ball_hits": ball_hits,
        "fluid_speed": fluid_speed,
        "ball_speed": float(np.linalg.norm(ball_vel, axis=2).mean()) if nb else 0.0,
    }
    return ball_pos, ball_vel, fluid_pos, events


def _physics_labels(spec: SceneSpec, events: dict) -> np.ndarray:
    """Map simulator event statistics onto the 17-primitive intensity scale.

    A stand-in rule, not physics: intensities saturate linearly against
    reference rates so that richer scenes score higher but everything stays
    inside [1, 5].  Phenomena the simulator cannot produce stay at 1, except
    the two optic primitives the renderer itself realizes (Lambert
    reflection of the directional light, constant ambient scattering).
    """
    s = np.ones(primitives.M)
    has_balls = any(k == RIGID_BALL for k in spec.object_kinds)
    has_fluid = any(k == PARTICLE_FLUID for k in spec.object_kinds)
    hits = events["wall_hits"] + events["ball_hits"]

    def setp(name, value):
        s[primitives.index_of(name)] = float(np.clip(value, 1.0, 5.0))

    if has_balls:
        setp("rigid_body_motion", 1.0 + 4.0 * min(1.0, events["ball_speed"] / 0.10))
        setp("collision", 1.0 + 4.0 * min(1.0, (events["wall_hits"] + 2 * events["ball_hits"]) / 10.0))
        if hits:
            setp("elastic_motion", 1.0 + 4.0 * spec.restitution * min(1.0, hits / 6.0))
    if has_fluid:
        # Fluids are twice as "sensitive" so a moving puddle dominates.
        setp("liquid_motion", 1.0 + 4.0 * min(1.0, events["fluid_speed"] / 0.05))
    setp("reflection", 4.0)
    setp("scattering", 2.0)
    return s


def simulate(spec: SceneSpec) -> tuple[VideoClip, SceneTruth]:
    """Generate one clip with exact annotations.

    Deterministic in ``spec.seed``.  See the module docstring for the
    integration scheme and :class:`SceneTruth` for the annotation layout.
    """
    ball_pos, ball_vel, fluid_pos, events = simulate_states(spec)

    F, H, W = spec.F, spec.H, spec.W
    cam = spec.camera
    e = spec.box_extent
    ball_idx = [k for k, kind in enumerate(spec.object_kinds) if kind == RIGID_BALL]
    fluid_idx = [k for k, kind in enumerate(spec.object_kinds) if kind == PARTICLE_FLUID]
    nb = len(ball_idx)

    # Per-instance render color (instance id = object index + 1).
    colors = np.empty((spec.n_objects, 3))
    ball_no = 0
    for k, kind in enumerate(spec.object_kinds):
        if kind == RIGID_BALL:
            colors[k] = INSTANCE_PALETTE[ball_no % (len(INSTANCE_PALETTE) - 1)]
            ball_no += 1
        else:
            colors[k] = INSTANCE_PALETTE[FLUID_PALETTE_INDEX]

    frames = np.empty((3, F, H, W), dtype=np.float32)
    masks = np.empty((F, H, W), dtype=np.int16)
    pointmap = np.empty((3, F, H, W), dtype=np.float32)
    centers = np.zeros((spec.n_objects, F, 3))

    n_part = fluid_pos.shape[0]
    for s in range(F):
        sph_c = []
        sph_r = []
        sph_id = []
        for bi, k in enumerate(ball_idx):
            # Shift into camera coordinates: box center sits at (0, 0, z0).
            sph_c.append(ball_pos[bi, s] + np.array([0.0, 0.0, cam.z0]))
            sph_r.append(spec.radii[k])
            sph_id.append(k + 1)
            centers[k, s] = sph_c[-1]
        if n_part:
            k = fluid_idx[0]
            for q in range(n_part):
                sph_c.append(fluid_pos[q, s] + np.array([0.0, 0.0, cam.z0]))
                sph_r.append(spec.radii[k])
                sph_id.append(k + 1)
            centers[k, s] = fluid_pos[:, s].mean(axis=0) + np.array([0.0, 0.0, cam.z0])
        mask, pm, shade = render_frame(
            np.array(sph_c).reshape(-1, 3), np.array(sph_r), np.array(sph_id, dtype=np.int16), cam, e, H, W
        )
        masks[s] = mask
        pointmap[:, s] = pm.astype(np.float32)
        rgb = np.repeat(shade[None, :, :], 3, axis=0)
        for k in range(spec.n_objects):
            m = mask == k + 1
            if m.any():
                rgb[:, m] = colors[k][:, None] * (0.45 + 0.55 * shade[m][None, :])
        frames[:, s] = rgb.astype(np.float32)

    frame_change = float(np.mean(np.abs(np.diff(frames, axis=1)))) if F > 1 else 0.0

    # Ground-truth tracks: surface points sampled on frame 0, rigidly bound
    # to their object (balls) or to the nearest particle (fluid).
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 0x7AC5]))
    rows, cols = sample_mask_pixels(masks[0], spec.n_track_points, rng)
    n_tr = rows.shape[0]
    track_positions = np.empty((n_tr, F, 3))
    track_instance = masks[0, rows, cols].astype(np.int16)
    p0 = pointmap[:, 0, rows, cols].astype(np.float64).T  # [n_tr, 3]
    for i in range(n_tr):
        inst = int(track_instance[i]) - 1
        if spec.object_kinds[inst] == RIGID_BALL:
            bi = ball_idx.index(inst)
            offset = p0[i] - (ball_pos[bi, 0] + np.array([0.0, 0.0, cam.z0]))
            track_positions[i] = ball_pos[bi] + offset + np.array([0.0, 0.0, cam.z0])
        else:
            cam_part0 = fluid_pos[:, 0] + np.array([0.0, 0.0, cam.z0])
            q = int(np.argmin(np.linalg.norm(cam_part0 - p0[i], axis=1)))
            offset = p0[i] - cam_part0[q]
            track_positions[i] = fluid_pos[q] + offset + np.array([0.0, 0.0, cam.z0])

    truth = SceneTruth(
        masks=masks,
        pointmap=pointmap,
        track_positions=track_positions,
        track_instance=track_instance,
        centers=centers,
        physics_labels=_physics_labels(spec, events),
        frame_change=frame_change,
        instance_kinds=list(spec.object_kinds),
    )
    return VideoClip(frames=frames), truth
