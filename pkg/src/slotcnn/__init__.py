"""slotcnn: compile CNN models to slot-parallel ciphertext schedules and run
them on an exact leveled-SIMD simulator, verified against a plaintext oracle.
"""

from .errors import (
    CapacityExceeded,
    FootprintOverflow,
    LevelExhausted,
    NonDivisibleDims,
    NotFlattened,
    OversizedInput,
    PaddingUnsupported,
    ParseError,
    ShapeMismatch,
    SlotCnnError,
    SlotMismatch,
    TargetAboveCurrent,
    UnknownModel,
)
from .he_backend import DEFAULT_PARAMS, Backend, CipherVector, HEParams, OpCounter, PlainVector
from .model import (
    FC,
    RELU_COEFFS,
    ApproxReLU,
    AvgPool2d,
    Conv1d,
    Conv2d,
    Flatten,
    LayerTrace,
    ModelSpec,
    Square,
    ValidationReport,
    builtin,
    builtin_names,
    flatten_dispatch,
    layer_forward,
    load_model,
    model_from_dict,
    model_to_dict,
    mult_depth,
    reference_infer,
    trace_layout,
    validate,
)
from .packing import PackPlan, batch_pack, batch_unpack, flatten_input, footprint
from .layers import (
    CipherState,
    LayoutState,
    apply_layer,
    approx_relu,
    avgpool,
    conv,
    drop_level,
    fc,
    fc_operation_counts,
    flatten,
    square,
    valid_positions,
)
from .engine import (
    CostModel,
    LayerMetrics,
    OpMetrics,
    estimate_cost,
    infer,
    run_inference,
    verify_against_oracle,
)

__version__ = "0.1.0"
