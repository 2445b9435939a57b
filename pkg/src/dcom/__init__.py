"""Dynamic coverage-and-margin active learning over embedding spaces."""

from .baselines import (
    StrategySpec,
    select_by_uncertainty,
    select_coreset,
    select_probcover,
    select_random,
)
from .data import (
    EmbeddingSet,
    MixtureSpec,
    euclidean_distance,
    gen_gaussian_mixture,
    l2_normalize,
    read_embedding_file,
    read_label_file,
    write_embedding_file,
    write_label_file,
)
from .engine import (
    DComConfig,
    PoolState,
    QueryResult,
    ball_purity_predicted,
    competence_score,
    compute_tau,
    dcom_select,
    delta_grid,
    expand_delta,
    run_iteration,
)
from .graph import (
    CoverageState,
    RadiusGraph,
    build_radius_graph,
    covered_set,
    out_degree_rank,
    prune_incoming_for_covered,
    prune_outgoing_for_labeled,
)
from .harness import (
    ExperimentRecord,
    evaluate_accuracy,
    run_al_loop,
    summarize,
    write_report,
)
from .learners import (
    Learner,
    LearnerSpec,
    SoftmaxMatrix,
    nnn_classify,
    normalize_unit_interval,
    predict_softmax,
    train_learner,
    uncertainty_scores,
)
from .purity import (
    PurityCurve,
    estimate_purity_curve,
    is_pure_ball,
    kmeans_cluster,
    select_initial_delta,
)

__version__ = "0.1.0"
