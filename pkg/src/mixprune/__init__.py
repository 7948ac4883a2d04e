"""mixprune: post-training, retraining-free pruning for linear layers.

Weights are removed by Hessian-based saliency, survivors are compensated with
the exact least-squares (or sequential second-order) update, and a global
sparsity budget is spread across layers in inverse proportion to their
sensitivity.  Everything runs on plain float64 numpy arrays; models move
through a bit-exact single-file container format (MXPT) plus a JSON manifest.
"""

from . import allocator, calibration, fixtures, model_io, pipeline, pruner, saliency, tensor_core
from .allocator import (
    LayerSensitivity,
    SparsityPlan,
    allocate_sparsity,
    layer_sensitivity,
    plan_uniform,
)
from .calibration import HessianState, accumulate, dampen, hessian_from_rows, invert_hessian, new_state
from .errors import (
    BudgetError,
    ConfigError,
    CorruptionError,
    FormatError,
    MixpruneError,
    NotPositiveDefiniteError,
    NumericalError,
    ShapeError,
    ValidationError,
    VersionError,
)
from .fixtures import gen_fixture, write_fixture
from .model_io import (
    LayerSpec,
    load_manifest,
    read_container,
    read_container_file,
    validate_manifest,
    write_container,
    write_container_file,
)
from .pipeline import PruneConfig, eval_model, run_pipeline
from .pruner import (
    PrunedLayer,
    layer_recon_error,
    obs_downdate,
    prune_blocked,
    prune_iterative_obs,
    prune_only,
    reconstruct_closed_form,
)
from .saliency import (
    SaliencyMap,
    SparsityMask,
    compute_saliency,
    register_criterion,
    select_mask_nm,
    select_mask_unstructured,
)

__version__ = "0.1.0"
