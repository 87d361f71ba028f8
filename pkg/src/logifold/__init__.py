"""Decision-graph classifiers, semilinear sets, and fuzzy ensemble voting."""

from .graph import (  # noqa: F401
    AffineMap,
    Arrow,
    LogicalGraph,
    evaluate,
    evaluate_batch,
    evaluate_pathsum,
    graph_from_dict,
    graph_to_dict,
    load_graph,
    relabel,
    require_valid,
    save_graph,
    sign_vector,
    validate_graph,
)
from .networks import (  # noqa: F401
    NetworkSpec,
    SpecializedNet,
    compile_relu_net,
    compile_step_net,
    forward_classical,
    forward_smooth,
    load_model,
    random_network,
    save_model,
)
from .algebra import (  # noqa: F401
    boolean_combine,
    constant_graph,
    identity_graph,
    parametrize,
    product,
    zero_locus_lift,
)
from .semilinear import (  # noqa: F401
    BasicSemilinearSet,
    SemilinearFunction,
    SemilinearSet,
    from_llgraph,
    load_semilinear,
    save_semilinear,
    to_llgraph,
)
from .approx import (  # noqa: F401
    LabeledGrid,
    approximate,
    chart_family,
    grid_from_function,
    load_grid,
    mismatch_measure,
    save_grid,
)
from .fuzzy import (  # noqa: F401
    FuzzyLogicalGraph,
    StateSpace,
    evaluate_fuzzy,
    from_relu_softmax_net,
    from_sigmoid_net,
    fuzzy_intersection,
    fuzzy_product,
    fuzzy_union,
    load_fuzzy,
    outcome_distribution,
    save_fuzzy,
)
from .training import (  # noqa: F401
    Dataset,
    Hyperparams,
    classification_accuracy,
    load_dataset,
    relabel_for_blocks,
    save_dataset,
    specialize,
    synth_dataset,
    train_sgd,
)
from .ensemble import (  # noqa: F401
    Embedding,
    ModelChart,
    accuracy_curve,
    build_target_graph,
    chart_from_net,
    fuzzy_accuracy,
    refinement,
)
from .voting import (  # noqa: F401
    LogifoldBundle,
    calibrate,
    expected_accuracy,
    fuzzy_belonging,
    make_bundle,
    make_phi,
    valid_paths,
    vote_along_path,
    vote_at_node,
    vote_shared_targets,
    vote_with_validation_history,
)
from .config import RunConfig, config_hash, load_config  # noqa: F401

__all__ = [
    "AffineMap",
    "Arrow",
    "BasicSemilinearSet",
    "Dataset",
    "Embedding",
    "FuzzyLogicalGraph",
    "Hyperparams",
    "LabeledGrid",
    "LogicalGraph",
    "LogifoldBundle",
    "ModelChart",
    "NetworkSpec",
    "RunConfig",
    "SemilinearFunction",
    "SemilinearSet",
    "SpecializedNet",
    "StateSpace",
    "accuracy_curve",
    "approximate",
    "boolean_combine",
    "build_target_graph",
    "calibrate",
    "chart_family",
    "chart_from_net",
    "classification_accuracy",
    "compile_relu_net",
    "compile_step_net",
    "config_hash",
    "constant_graph",
    "evaluate",
    "evaluate_batch",
    "evaluate_fuzzy",
    "evaluate_pathsum",
    "expected_accuracy",
    "forward_classical",
    "forward_smooth",
    "from_llgraph",
    "from_relu_softmax_net",
    "from_sigmoid_net",
    "fuzzy_accuracy",
    "fuzzy_belonging",
    "fuzzy_intersection",
    "fuzzy_product",
    "fuzzy_union",
    "graph_from_dict",
    "graph_to_dict",
    "grid_from_function",
    "identity_graph",
    "load_config",
    "load_dataset",
    "load_fuzzy",
    "load_graph",
    "load_grid",
    "load_model",
    "load_semilinear",
    "make_bundle",
    "make_phi",
    "mismatch_measure",
    "outcome_distribution",
    "parametrize",
    "product",
    "random_network",
    "refinement",
    "relabel",
    "relabel_for_blocks",
    "require_valid",
    "save_dataset",
    "save_fuzzy",
    "save_graph",
    "save_grid",
    "save_model",
    "save_semilinear",
    "sign_vector",
    "specialize",
    "synth_dataset",
    "to_llgraph",
    "train_sgd",
    "valid_paths",
    "validate_graph",
    "vote_along_path",
    "vote_at_node",
    "vote_shared_targets",
    "vote_with_validation_history",
    "zero_locus_lift",
]
