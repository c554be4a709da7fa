"""Dependence-aware truth discovery for conflicting multi-source data.

Detects copying (similarity dependence) and deliberate contradiction
(dissimilarity dependence) between structured data sources, and uses the
detected structure to fuse conflicting claims, de-bias opinion
aggregates, and rank sources.
"""

__version__ = "0.1.0"

from .dependence import (
    DependenceConfig,
    DependenceVerdict,
    PairEvidence,
    PropertySplit,
    copier_direction,
    debiased_aggregate,
    dependence_posterior,
    discounted_weights,
    dissimilarity_score,
    pair_evidence,
    rank_sources,
)
from .fusion import (
    FusionConfig,
    FusionResult,
    ItemTruth,
    SourceStats,
    bayes_item_posterior,
    fuse_fixpoint,
    naive_vote,
    source_accuracy,
)
from .model import (
    Dataset,
    InputError,
    Mode,
    Observation,
    latest_snapshot,
    normalize_value,
    parse_observations,
    snapshot_at,
    to_csv,
    to_json,
)
from .simgen import (
    PlantedEdge,
    PlantedTruth,
    ScenarioSpec,
    SourceSpec,
    evaluate_dependence,
    evaluate_fusion,
    generate_scenario,
    scenario_from_dict,
)
from .temporal import (
    TemporalConfig,
    TemporalVerdict,
    UpdateTrace,
    build_traces,
    outdated_copy_score,
    shared_update_stats,
    temporal_verdict,
)
