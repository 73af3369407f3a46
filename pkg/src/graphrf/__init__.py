"""Random-walk features for estimating Taylor-series functions of weighted
adjacency matrices, with an exact dense oracle, a Monte-Carlo graph-ODE
solver, kernelized clustering/regression, and trainable modulation
functions."""

__version__ = "0.1.0"

from .graphs import (
    Graph,
    GraphFormatError,
    bundled_graph,
    binary_tree,
    erdos_renyi,
    from_dense,
    from_text,
    laplacian_graph,
    load_edge_list,
    normalized_adjacency,
    random_regular,
    save_edge_list,
    spectral_radius,
    triangulated_grid,
)
from .modulation import (
    CoeffSeq,
    DivergenceError,
    KernelSpec,
    ModulationFn,
    UnsupportedClosedFormError,
    closed_form_modulation,
    convolve,
    heat_modulation,
    indicator_modulation,
    load_table,
    min_batch_size,
    modulation_for,
    rademacher_bound,
    symmetric_from_coeffs,
    taylor_coeffs,
    walk_plan,
)
from .oracle import (
    exact_kernel,
    exact_taylor_kernel,
    expm,
    form_scale,
    normalized_exact_kernel,
    taylor_kernel,
)
from .walker import (
    FeatureMatrix,
    LengthFeatureTensor,
    SeedCollisionError,
    feature_pair,
    sample_features,
    sample_length_features,
)
from .estimator import estimate_gram, kernel_matvec, relative_frobenius_error
from .ode import OdeProblem, simulate_exact, simulate_grf
from .applications import (
    angular_error,
    clustering_error,
    kernel_kmeans,
    kernel_regression_predict,
    load_attributes,
    random_mask,
    save_attributes,
)
from .neural import (
    NeuralModParams,
    TrainConfig,
    TrainingDivergedError,
    implied_coefficients,
    neural_mod_eval,
    neural_modulation,
    train_modulation,
)
from .seeding import derive_seed
