"""Scene description and ground-truth containers for the synthetic world.

Geometry conventions, used consistently everywhere downstream:

* The world frame IS the camera frame: the camera sits at the origin looking
  down +z, x points right, y points *down* (so gravity is +y and "down" on
  screen is down in the world).
* The play volume is an axis-aligned cube centered at ``(0, 0, z0)`` with
  half-extent ``box_extent``; its open front faces the camera.
* Pinhole projection: ``u = fx * x / z + cx``, ``v = fy * y / z + cy``.
  Pixel ``(row=i, col=j)`` samples the ray through ``(u=j, v=i)`` exactly, so
  the stored pointmap reprojects onto integer pixel coordinates with zero
  error by construction.
* Units: world lengths are arbitrary; velocities are units/frame and gravity
  units/frame^2 (the simulator steps exactly one frame at a time).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Saturated base colors per instance id (1-based; 0 is background).  The toy
# physical-consistency detector classifies blobs against this same palette,
# so keep entries far apart in hue.
INSTANCE_PALETTE = np.array(
    [
        [0.90, 0.10, 0.10],  # red
        [0.10, 0.75, 0.15],  # green
        [0.15, 0.25, 0.95],  # blue
        [0.95, 0.80, 0.10],  # yellow
        [0.80, 0.15, 0.85],  # magenta
        [0.05, 0.80, 0.85],  # cyan (used by fluid scenes)
    ],
    dtype=np.float64,
)

FLUID_PALETTE_INDEX = 5  # fluids always render cyan

RIGID_BALL = "rigid_ball"
PARTICLE_FLUID = "particle_fluid"

# Scene classes double as the conditioning vocabulary for the denoiser.
SCENE_CLASSES = ("ball1", "ball2", "ball3", "fluid")


@dataclass(slots=True)
class Camera:
    """Pinhole intrinsics plus the fixed distance to the box center."""

    fx: float
    fy: float
    cx: float
    cy: float
    z0: float  # distance from the camera to the box center along +z

    def project(self, points: np.ndarray) -> np.ndarray:
        """Project [..., 3] camera-frame points to [..., 2] (u, v) pixels."""
        p = np.asarray(points, dtype=np.float64)
        z = p[..., 2]
        u = self.fx * p[..., 0] / z + self.cx
        v = self.fy * p[..., 1] / z + self.cy
        return np.stack([u, v], axis=-1)

    @staticmethod
    def default(H: int, W: int, box_extent: float) -> "Camera":
        # Focal length of 1.25*W pixels puts the front face of the box at
        # about five sixths of the frame width; principal point at the
        # pixel-grid center so projections land on the integer lattice
        # symmetrically.
        return Camera(
            fx=1.25 * W,
            fy=1.25 * W,
            cx=(W - 1) / 2.0,
            cy=(H - 1) / 2.0,
            z0=4.0 * box_extent,
        )


@dataclass(slots=True)
class SceneSpec:
    """Complete, deterministic description of one clip."""

    seed: int
    object_kinds: list[str]  # RIGID_BALL or PARTICLE_FLUID per object
    radii: list[float]  # per object; for fluids, the per-particle radius
    init_positions: np.ndarray  # [n_objects, 3], box-center-relative
    init_velocities: np.ndarray  # [n_objects, 3], units/frame
    gravity: float  # units/frame^2 along +y (down on screen)
    restitution: float
    box_extent: float  # half side length of the cubical play volume
    camera: Camera
    F: int = 16
    H: int = 64
    W: int = 64
    scene_class: str = "ball1"
    n_track_points: int = 256
    fluid_particles: int = 40  # particles making up one fluid instance
    fluid_damping: float = 0.9

    @property
    def n_objects(self) -> int:
        return len(self.object_kinds)

    def validate(self) -> None:
        """Raise ValueError when any structural invariant is broken."""
        if self.F < 2:
            raise ValueError(f"F must be >= 2, got {self.F}")
        if self.n_objects < 1:
            raise ValueError("need at least one object")
        if not 0.0 <= self.restitution <= 1.0:
            raise ValueError(f"restitution outside [0, 1]: {self.restitution}")
        if any(r <= 0 for r in self.radii):
            raise ValueError("all radii must be positive")
        if len(self.radii) != self.n_objects:
            raise ValueError("radii/object_kinds length mismatch")
        for kind in self.object_kinds:
            if kind not in (RIGID_BALL, PARTICLE_FLUID):
                raise ValueError(f"unknown object kind {kind!r}")
        e = self.box_extent
        pos = np.asarray(self.init_positions, dtype=np.float64)
        for k, kind in enumerate(self.object_kinds):
            r = self.radii[k]
            if np.any(np.abs(pos[k]) > e - r + 1e-12):
                raise ValueError(f"object {k} does not start inside the box")
        # Overlapping rigid bodies make the very first collision ill-posed.
        balls = [k for k, kind in enumerate(self.object_kinds) if kind == RIGID_BALL]
        for a_i, a in enumerate(balls):
            for b in balls[a_i + 1 :]:
                gap = np.linalg.norm(pos[a] - pos[b]) - (self.radii[a] + self.radii[b])
                if gap < -1e-9:
                    raise ValueError(f"objects {a} and {b} overlap at start")


@dataclass(slots=True)
class VideoClip:
    """RGB frames [3, F, H, W], float32 in [0, 1]."""

    frames: np.ndarray

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.frames.shape)


@dataclass(slots=True)
class SceneTruth:
    """Exact per-clip annotations produced alongside the rendered frames.

    Attributes:
        masks: [F, H, W] int16 instance labels, 0 = background.
        pointmap: [3, F, H, W] float32 camera-frame XYZ for every pixel
            (background pixels carry the box/back-wall hit point).
        track_positions: [N_pts, F, 3] float64, persistent-identity 3D
            trajectories of surface points sampled on frame 0.
        track_instance: [N_pts] int16, the instance each track is bound to.
        centers: [n_objects, F, 3] float64 object centers (fluid: centroid).
        physics_labels: [M] float64 primitive intensities in [1, 5].
        frame_change: mean absolute inter-frame pixel difference of the
            rendered RGB clip (cached here so scoring needs no frames).
        instance_kinds: object kind per instance id - 1.
    """

    masks: np.ndarray
    pointmap: np.ndarray
    track_positions: np.ndarray
    track_instance: np.ndarray
    centers: np.ndarray
    physics_labels: np.ndarray
    frame_change: float
    instance_kinds: list[str]


def random_scene(
    seed: int,
    F: int = 16,
    H: int = 64,
    W: int = 64,
    scene_class: str | None = None,
    n_track_points: int = 256,
) -> SceneSpec:
    """Draw a valid random SceneSpec.

    Scene classes: ``ball1``/``ball2``/``ball3`` put that many elastic balls
    in the box with random radii, positions and velocities; ``fluid`` drops a
    damped particle puddle.  All randomness flows from ``seed``; the same
    seed always yields the same spec.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xC1E4]))
    if scene_class is None:
        scene_class = SCENE_CLASSES[int(rng.integers(len(SCENE_CLASSES)))]
    if scene_class not in SCENE_CLASSES:
        raise ValueError(f"unknown scene class {scene_class!r}")

    e = 1.0
    cam = Camera.default(H, W, e)
    if scene_class == "fluid":
        kinds = [PARTICLE_FLUID]
        radii = [float(rng.uniform(0.06, 0.09))]
        # Puddle center: upper half so it visibly falls and settles.
        pos = np.array([[rng.uniform(-0.4, 0.4), rng.uniform(-0.6, -0.1), rng.uniform(-0.3, 0.3)]])
        vel = np.array([[rng.uniform(-0.03, 0.03), 0.0, rng.uniform(-0.02, 0.02)]])
        restitution = 0.3
        gravity = float(rng.uniform(0.012, 0.02))
    else:
        n_balls = int(scene_class[-1])
        kinds = [RIGID_BALL] * n_balls
        # Fewer balls may be bigger; three must still pack without overlap.
        r_hi = 0.40 - 0.04 * n_balls
        radii = [float(rng.uniform(0.22, r_hi)) for _ in range(n_balls)]
        pos = _place_balls(rng, radii, e)
        speed = rng.uniform(0.05, 0.12, size=n_balls)
        direction = rng.normal(size=(n_balls, 3))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        vel = direction * speed[:, None]
        restitution = float(rng.uniform(0.75, 1.0))
        gravity = float(rng.uniform(0.008, 0.018))

    return SceneSpec(
        seed=seed,
        object_kinds=kinds,
        radii=radii,
        init_positions=pos,
        init_velocities=vel,
        gravity=gravity,
        restitution=restitution,
        box_extent=e,
        camera=cam,
        F=F,
        H=H,
        W=W,
        scene_class=scene_class,
        n_track_points=n_track_points,
    )


def _place_balls(rng: np.random.Generator, radii: list[float], e: float) -> np.ndarray:
    """Rejection-place non-overlapping ball centers inside the box."""
    centers: list[np.ndarray] = []
    for r in radii:
        for _ in range(1000):
            c = rng.uniform(-(e - r) * 0.85, (e - r) * 0.85, size=3)
            if all(np.linalg.norm(c - p) > r + rp + 0.05 for p, rp in zip(centers, radii)):
                centers.append(c)
                break
        else:  # pragma: no cover - radii are small enough that this cannot trip
            raise RuntimeError("could not place balls without overlap")
    return np.array(centers)
