from .tensor import Tensor, Tape, backward, active_tape, EngineError, ShapeError, GeometryError
from .geometry import ConvGeometry
from .backend import backend_name, get_backend, set_backend
from . import ops
from .ops import BNState, BN_EPS, BN_MOMENTUM
from .container import save_tensor, load_tensor, write_array, read_array, ContainerError

__all__ = [
    "Tensor", "Tape", "backward", "active_tape",
    "EngineError", "ShapeError", "GeometryError", "ConvGeometry",
    "backend_name", "get_backend", "set_backend", "ops",
    "BNState", "BN_EPS", "BN_MOMENTUM",
    "save_tensor", "load_tensor", "write_array", "read_array", "ContainerError",
]
