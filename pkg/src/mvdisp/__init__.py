"""Multiview disparity estimation with a robust Welsch data term.

A global variational estimator for co-planar camera arrays: the data residual
of every view is scored with a bounded Welsch loss (scale chosen
automatically and clamped monotone), minimised by IRLS with conjugate-gradient
inner solves, views are included progressively by growing baseline, and
inter-stage warping happens at doubled resolution through nine averaged
nearest-neighbour disparity hypotheses.
"""

from .core import (
    BaselineVec,
    CameraGeometry,
    DisparityField,
    ImageGrid,
    PenaltyKind,
    SolverConfig,
    View,
    ViewSet,
    disparity_from_w,
    normalize_baselines,
)
from .data import (
    SceneSpec,
    Slat,
    add_noise,
    crosshair_view_set,
    generate_slats,
    load_lightfield,
    load_slats_dir,
    noisy_viewset,
    read_pfm,
    save_slats_dir,
    write_pfm,
    write_pgm,
)
from .experiment import (
    METHODS,
    PAPER_ALPHAS,
    ExperimentRow,
    best_alpha_envelope,
    emit_csv,
    run_experiment,
    run_lightfield_benchmark,
)
from .hires_warp import make_hypotheses, multi_hypothesis_warp, upsample_disparity_nn
from .imgproc import (
    bilinear_warp,
    decimate_sinc2,
    diff_blur,
    dog_gradient,
    gaussian_blur,
    upsample_sinc2,
)
from .metrics import rmse_hypotheses, rmse_plain
from .robust import SigmaState, clamp_sigma, estimate_sigma_d, penalty_value, penalty_weight
from .schedule import (
    CustomOrder,
    GateFormula,
    StagePlan,
    needs_lowpass,
    plan_schedule,
    run_progressive,
    views_at_stage,
)
from .solver import (
    EnergyBreakdown,
    LinearizedView,
    assemble_weights,
    cg_solve,
    el_operator,
    energy_eval,
    irls_solve,
    laplacian_apply,
    linearize_view,
)

__version__ = "0.1.0"
