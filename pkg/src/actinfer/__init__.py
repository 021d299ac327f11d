"""actinfer: knowledge-grounded open-world activity inference.

The engine grounds candidate objects in per-frame oracle likelihoods
backed by a commonsense knowledge graph, discovers (action, object)
activities by energy minimization over pattern-theory configurations,
and iteratively refines action priors with a learned visual-semantic map.
"""

from .concepts import RELATIONS, RelationKind, canon_concept
from .errors import ActInferError, DataError, TrainingError, UsageError
from .grounding import (
    GroundedScore,
    LikelihoodTable,
    SearchSpace,
    ground_frame,
    load_likelihoods,
    load_search_space,
)
from .inference import (
    ActionPriorTable,
    AnnealSchedule,
    Configuration,
    EnergyTransform,
    Interpretation,
    build_configuration,
    energy,
    infer_exhaustive,
    infer_mcmc,
)
from .kgraph import (
    AffinityParams,
    EgoGraph,
    KnowledgeGraph,
    KPath,
    load_graph,
    load_graph_file,
)
from .actionmap import (
    ClipActionTargets,
    EmbeddingTable,
    FeatureTable,
    LinearMap,
    TrainConfig,
    load_embeddings,
    load_features,
    make_training_set,
    predict_actions,
    temporal_smooth,
    train_map,
    word_similarity,
)
from .refine import (
    Label,
    LabelSet,
    RefinementConfig,
    refine_loop,
    zero_shot_map,
    zero_shot_scores,
)
from .metrics import (
    MetricReport,
    accuracy,
    class_map,
    mean_nbws,
    word_level_accuracy,
)

__version__ = "0.1.0"
