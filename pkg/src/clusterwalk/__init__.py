"""Oracle-guided graph-traversal clustering over embedding similarity graphs.

Build a thresholded similarity graph from unit-norm embeddings, grow clusters
inside each connected component by asking a membership oracle about the
best-connected neighbor, prune edges on rejection, and finish with an
oracle-guided merge pass across clusters.
"""

from .exceptions import (
    ClusterwalkError,
    ConfigurationError,
    InputError,
    ParseError,
    RunAborted,
)
from .graph import (
    BETA_CLAMP,
    DEFAULT_BETA,
    DEFAULT_TAU,
    EmbeddingRecord,
    RelationalGraph,
    build_graph,
    cluster_neighborhood,
    compute_edge_weight,
    connected_components,
    remove_cluster_candidate_edges,
    weighted_degree,
)
from .io import (
    DatasetManifest,
    RunResult,
    SweepResult,
    label_map,
    load_embeddings,
    load_graph,
    load_manifest,
    load_noise_report,
    load_result,
    load_sweep,
    save_embeddings,
    save_graph,
    save_manifest,
    save_noise_report,
    save_result,
    save_sweep,
)
from .metrics import (
    NMI_NORMALIZATIONS,
    ContingencyTable,
    contingency_table,
    nmi,
    rand_index,
)
from .oracles import (
    DEFAULT_TEMPLATE,
    EmbeddingOracle,
    EnsembleNoisyOracle,
    ExactOracle,
    MembershipOracle,
    MembershipQuery,
    MergeQuery,
    OracleDecision,
    PromptTemplate,
    build_membership_prompt,
    build_merge_prompt,
    parse_conclusion,
)
from .remote import RemoteOracle, RetryPolicy
from .synth import PlantedSpec, generate_dataset, graph_noise_report
from .traversal import (
    Cluster,
    TraversalConfig,
    TraversalTrace,
    merge_clusters,
    run_clustering,
    seed_cluster,
    select_candidate,
    select_representatives,
    traverse_component,
)

__version__ = "0.1.0"
