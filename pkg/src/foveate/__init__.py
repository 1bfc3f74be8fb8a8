"""Budget-constrained adaptive image sampling with black-box feedback.

The package warps an image with a conformal (Mobius) transform so that a
chosen region receives a disproportionate share of a fixed pixel budget,
samples uniformly in the warped space, and unwarps.  The four warp
coefficients are optimized at inference time from two signals: a
perceptual loss against the full-resolution image and, through a
gradient-free SPSA estimator, the semantic agreement of a black-box
question-answering oracle.  Four static samplers (uniform, log-polar,
sunflower spiral, radial) provide information-matched baselines, and a
CLI harness runs budget sweeps and reports accuracy tables.
"""

from .errors import (
    DegenerateParams,
    DimensionMismatch,
    FoveateError,
    HarnessError,
    LengthMismatch,
    MissingPlugin,
    OracleError,
    OracleUnavailable,
    OutOfBounds,
    ZeroBaseline,
    ZeroVector,
)
from .geometry import (
    ComplexPoint,
    MobiusParams,
    SphereGeom,
    SpherePoint,
    mobius_apply,
    mobius_compose,
    mobius_inverse_apply,
    normalize,
    pixel_to_sphere,
    sphere_to_pixel,
    stereo_project,
    stereo_unproject,
)
from .harness import (
    DatasetItem,
    ExperimentConfig,
    ExperimentReport,
    accuracy_retained,
    delta_gain,
    load_dataset,
    read_image,
    run_experiment,
    write_image,
)
from .metrics import LossWeights, PerceptualScorer, mse, perceptual_loss, sdsp_saliency, vsi
from .optimizer import (
    AdaptConfig,
    AdaptResult,
    QuestionItem,
    adapt,
    combine_gradients,
    fd_perceptual_gradient,
    sample_questions,
    spsa_gradient,
    update_question_weights,
)
from .oracle import (
    AnswerEchoOracle,
    HttpOracle,
    OracleReply,
    OracleRequest,
    RegionFidelityOracle,
    StdioOracle,
)
from .samplers import (
    PixelBudget,
    SampleSet,
    SamplingSpec,
    bass_pipeline,
    budget_pixel_count,
    log_polar_sample,
    radial_sample,
    sunflower_sample,
    uniform_sample,
)
from .semantic import normalize_embedding, text_loss
from .warp import CoverageMask, ImageBuffer, bilinear_sample, forward_warp, inverse_warp

__version__ = "0.1.0"
