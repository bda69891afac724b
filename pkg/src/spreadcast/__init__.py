"""spreadcast: credit-spread forecasting, attribution, and implied ratings."""

__version__ = "0.1.0"

from .evalstats import (
    DegenerateSeriesError,
    DMResult,
    EvalReport,
    dm_matrix,
    dm_test,
    evaluate,
    newey_west_t,
)
from .explain import (
    ImportanceReport,
    ShapVector,
    aggregate_importance,
    linear_shap,
    shap_values,
    tree_shap,
)
from .harness import (
    DEFAULT_GRIDS,
    PredictionSet,
    WindowPlan,
    align,
    run_benchmark,
    run_walk_forward,
)
from .mechanism import MechanismTable, mechanism_table, quintile_sort
from .panel import (
    FeatureManifest,
    Panel,
    PanelError,
    PanelSchema,
    SupervisedSlice,
    build_slice,
    compute_spreads,
    filter_dates,
    load_panel,
    month_index,
    month_label,
    preprocess,
    save_panel,
)
from .rating import (
    LabeledRatingData,
    RatingReport,
    RatingScale,
    classification_metrics,
    fit_rating_model,
    kfold_rating,
    make_scale,
    per_industry_models,
    spreads_to_ratings,
)
from .synth import (
    GroundTruth,
    MechanismCouplings,
    PlantedTerm,
    SynthSpec,
    describe_truth,
    generate,
    oracle_predictions,
)

__all__ = [name for name in dir() if not name.startswith("_")]
