"""feasmap: data-driven feasible-region estimation for constrained NMPC.

Pipeline: sample the state box with a low-discrepancy sequence, label each
point by solving a finite-horizon feasibility problem, train a Gaussian-kernel
SVM on the labels, calibrate strict inner/outer thresholds, and erode the
learned region by the disturbance bound for the perturbed system.
"""

from .config import RunConfig, load_config, load_preset, validate_config
from .dynamics import (
    BoxSet,
    PiecewiseConstant,
    SystemModel,
    Trajectory,
    eval_rhs,
    get_model,
    integrate,
    make_cart_spring,
)
from .oracle import (
    FeasibilityResult,
    LabeledSample,
    LabelingResult,
    OcpSpec,
    cart_spring_ocp,
    enrich_feasible,
    label_dataset,
    solve_feasibility,
    verify_terminal_assumptions,
)
from .pipeline import RunManifest, compare_runs, run_pipeline
from .region import (
    RegionModel,
    build_region,
    calibrate,
    classify,
    erode_region,
    extract_boundary,
    region_metrics,
)
from .sampling import SampleSet, halton, halton_sample_set, scale_to_box, star_discrepancy
from .setgeom import (
    EllipsoidSet,
    ErodedEllipsoid,
    dist_to_ellipsoid_boundary,
    ellipsoid_contains,
    erode_ellipsoid,
    verify_rci,
)
from .svm import (
    KernelSpec,
    SvmModel,
    TrainConfig,
    decision_value,
    decision_values,
    kernel_eval,
    predict,
    train,
    training_accuracy,
)

__version__ = "0.1.0"
