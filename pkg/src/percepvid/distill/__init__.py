from .relations import relation_spatial, relation_temporal
from .distiller import Projector, distill_loss

__all__ = ["relation_spatial", "relation_temporal", "Projector", "distill_loss"]
