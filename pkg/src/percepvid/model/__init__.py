from .backbone import Backbone, BackboneConfig
from .bct import BCTConfig, BCTTeacher, ChannelwiseModel, SpatialwiseModel, make_student
from .diffusion import diffusion_loss, diffusion_loss_given, noise_forward, sample

__all__ = [
    "Backbone",
    "BackboneConfig",
    "BCTConfig",
    "BCTTeacher",
    "ChannelwiseModel",
    "SpatialwiseModel",
    "make_student",
    "diffusion_loss",
    "diffusion_loss_given",
    "noise_forward",
    "sample",
]
