"""Power-index analysis for rule-based coalition games.

Games are weighted rule lists over up to 64 agents; a coalition's value is
the summed weight of the rules it satisfies. The package computes exact
and Monte-Carlo power indices, generates and labels synthetic rule-set
datasets, trains a dense regressor to predict per-agent indices from
encoded rule tensors, and correlates rule-graph structure with the label
distributions. See the ``mcnpower`` CLI for the end-to-end pipeline.
"""

from .errors import (
    DataFormatError,
    GameSizeError,
    McnPowerError,
    RuleSetValidationError,
    TrainingDivergedError,
    ZeroTotalWeightError,
)
from .game import (
    MAX_AGENTS,
    Coalition,
    Rule,
    RuleSet,
    coalition_value,
    changed_rules,
    delta_weight,
    mask_members,
    mask_of,
    rule_matches,
    ruleset_from_json,
    ruleset_to_json,
    validate_ruleset,
)
from .exact import (
    IndexKind,
    Method,
    PowerVector,
    exact_alg4_estimand,
    exact_alg5_estimand,
    exact_banzhaf_eq1,
    exact_shapley_eq2,
)
from .sampling import (
    McConfig,
    SampleBound,
    derive_seed,
    estimate_criticality_probability,
    hoeffding_samples,
    is_critical,
    mc_banzhaf,
    mc_shapley,
    stream_rng,
)
from .datagen import (
    GenMethod,
    GenSpec,
    LabeledDataset,
    WeightScheme,
    assign_weights,
    decode_rulesets,
    encode_rulesets,
    gen_coinflip,
    gen_mog,
    gen_uniform,
    generate_dataset,
    generate_rulesets,
    label_dataset,
    label_rulesets,
    load_dataset,
    pad_dataset,
    save_dataset,
    split_dataset,
)
from .mlp import (
    MlpModel,
    TrainConfig,
    evaluate,
    forward,
    init_model,
    load_model,
    save_model,
    train,
)
from .graphs import (
    AgentGraph,
    CorrelationRecord,
    GraphMetrics,
    banzhaf_stats,
    build_graph,
    correlation_report,
    graph_metrics,
    spearman,
)

__version__ = "0.1.0"
