"""Jump detection in regression with an error-contaminated predictor."""

from .kernels import Family, KernelSpec, Side, evaluate, kernel_from_name
from .estimators import (
    DetectorConfig,
    JumpEstimate,
    ObservedSample,
    conventional_onesided,
    detect_jump,
    robust_onesided,
    shifted_onesided,
)
from .baseline import LlkCurve, dke_detect, llk_fit
from .bandwidth import BandwidthSearchConfig, BootstrapResult, bootstrap_resample, percentile_ci, select_bandwidth
from .datagen import GeneratorConfig, ResponseModel, builtin_response, generate, standardized_draw
from .errors import (
    AllCandidatesFailed,
    EmptyWindow,
    InvalidConfig,
    JumpFinderError,
    NoValidGridPoint,
    ParseError,
)

__version__ = "0.1.0"
