"""Object motion segmentation for event cameras with a reconfigurable in-sensor array model."""

__version__ = "0.1.0"

from .errors import BoundsError, EventParseError, FeasibilityError, OmsError, ValidationError
from .events import (
    DvsEvent,
    EventFrame,
    Geometry,
    GroundTruthMask,
    accumulate_frame,
    align_frames_to_masks,
    parse_event_stream,
)
from .hardware import (
    HwArrayConfig,
    PixelRole,
    build_array_config,
    quantize_tau,
    simulate_frame,
    trip_fraction,
)
from .metrics import IouReport, iou, mean_iou, object_size_class
from .oms import Kernel, OmsConfig, OmsFrame, convolve_mean, make_kernel, oms_compute, oms_reference
from .synth import ObjectSpec, SceneSpec, gen_scene
