"""The fixed taxonomy of physical primitives scored per clip.

Seventeen fine-grained phenomena grouped into three domains.  Intensity
scores live in [1, 5]; 1 means "absent".  Order matters: score vectors are
plain arrays indexed by this list.
"""

DYNAMIC = [
    "rigid_body_motion",
    "collision",
    "liquid_motion",
    "gas_motion",
    "elastic_motion",
    "deformation",
]

THERMODYNAMIC = [
    "melting",
    "solidification",
    "vaporization",
    "liquefaction",
    "combustion",
    "explosion",
]

OPTIC = [
    "reflection",
    "refraction",
    "scattering",
    "interference_diffraction",
    "unnatural_light_source",
]

PRIMITIVES = DYNAMIC + THERMODYNAMIC + OPTIC
M = len(PRIMITIVES)  # 17

DYNAMIC_SLICE = slice(0, 6)
THERMODYNAMIC_SLICE = slice(6, 12)
OPTIC_SLICE = slice(12, 17)

SCORE_MIN = 1.0
SCORE_MAX = 5.0


def index_of(name: str) -> int:
    return PRIMITIVES.index(name)
