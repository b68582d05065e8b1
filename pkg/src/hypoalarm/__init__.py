"""Daytime low-glucose alarms from CGM traces and meal times.

Pipeline: parse 5-min CGM records with meal markers, turn each post-meal
window into two-predictor decision instances (current BG and the rate of
decrease from the post-meal peak), fit a cost-weighted depth-pruned
classification tree, and evaluate it with repeated seeded k-fold
cross-validation plus per-patient and severity reporting.
"""

__version__ = "0.1.0"

from .cart import (
    CLASS_H,
    CLASS_N,
    FEATURES,
    CostMatrix,
    Leaf,
    Split,
    SplitCandidate,
    TreeDocumentError,
    TreeNode,
    best_split,
    cost_complexity_alphas,
    format_tree,
    grow_tree,
    leaf_class,
    node_counts,
    parse_tree,
    predict,
    prune_to_depth,
    serialize_tree,
    tree_depth,
    weighted_gini,
)
from .cgm_data import (
    HYPO_THRESHOLD,
    SEVERE_THRESHOLD,
    DataValidationError,
    GlucoseSample,
    PatientSeries,
    PipelineConfig,
    label_hypoglycemia,
    parse_cgm_file,
    sample_at,
    series_to_csv,
    to_mg,
    to_mmol,
)
from .evaluation import (
    ConfusionMatrix,
    FoldPlan,
    PatientRow,
    PerformanceVector,
    RunEntry,
    RunReport,
    SeverityReport,
    SeverityRow,
    allocate_folds,
    confusion,
    cross_validate,
    evaluate_per_patient,
    f_upper_tail,
    instances_to_arrays,
    metrics,
    missed_event_analysis,
    one_way_anova,
    select_best_run,
    select_best_tree,
)
from .features import (
    DecisionInstance,
    MealEpisode,
    build_instances,
    decision_grid,
    find_postprandial_peak,
    horizon_label,
    meal_episodes,
    rate_of_decrease,
    read_feature_csv,
    write_feature_csv,
)
from .synth import SynthConfig, generate_cohort
