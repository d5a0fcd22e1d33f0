"""Desk-scale simulator for decentralized stochastic optimization over
directed networks with row-stochastic mixing matrices.

Subpackages by concern:

* :mod:`rowgossip.topology` -- graph generators and in-degree weighting
* :mod:`rowgossip.spectral` -- Perron vectors, contraction metrics, verifiers
* :mod:`rowgossip.gossip` -- partial averaging and diagonal-corrected means
* :mod:`rowgossip.optim` -- gradient tracking, plain and multi-gossip
* :mod:`rowgossip.problems` -- gradient oracles and benchmark instances
* :mod:`rowgossip.harness` -- experiment drivers, config, CSV/JSON output
"""

from .errors import (
    ConfigError,
    ConvergenceError,
    GenerationError,
    InvalidGraphError,
    InvalidMatrixError,
    InvalidWeightError,
    ProbeError,
    RowGossipError,
    RunAborted,
    SmallDiagonalError,
)
from .gossip import (
    a_step,
    consensus_error,
    locality_checks,
    multi_gossip,
    pull_diag_average,
    pull_diag_trace,
)
from .optim import (
    GtState,
    StepReport,
    gt_step,
    init_gt,
    init_mg,
    mg_step,
    recommended_rounds,
    recommended_rounds_alt,
    run,
)
from .problems import (
    GradientOracle,
    HardInstanceOracle,
    LogisticOracle,
    QuadraticOracle,
    SyntheticDataset,
    chain_h,
    chain_h1,
    chain_h1_grad,
    chain_h2,
    chain_h2_grad,
    chain_h_grad,
    make_hard_instance,
    make_quadratic,
    make_synthetic_logistic,
    noisy,
    prog,
)
from .spectral import (
    NetworkMetrics,
    check_diag_floor,
    compute_metrics,
    diag_floor_threshold,
    perron_vector,
    pi_operator_norm,
    spectral_norm,
    verify_diag_convergence,
    verify_rolling_sum,
)
from .topology import (
    DirectedGraph,
    MixingMatrix,
    build_complete,
    build_directed_ring,
    build_exponential,
    build_geometric,
    build_grid,
    build_nearest_neighbor,
    load_edge_list,
    load_matrix_csv,
    save_edge_list,
    save_matrix_csv,
    weights_from_indegree,
)

__version__ = "0.1.0"
