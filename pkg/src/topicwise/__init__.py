"""Topic-segmented multi-modal feature pipeline for interview-level
depression score regression: segment interviews by topic, build fixed-layout
topic-slotted feature vectors, select features in two steps, and train and
evaluate regressors under reproducible protocols.
"""

__version__ = "0.1.0"

from .corpus import (
    Dataset,
    FrameSeries,
    Session,
    SessionMeta,
    Utterance,
    load_dataset,
    load_frame_series,
    parse_transcript,
    slice_frames,
)
from .eval import (
    EvalConfig,
    EvalReport,
    FoldPlan,
    baseline_context_unaware,
    baseline_mean,
    f1_at_threshold,
    mae,
    pearson_cc,
    rmse,
    run_cv,
    run_holdout,
    stratified_folds,
)
from .features import (
    FeatureLayout,
    KeyTopicRule,
    VectorTable,
    WordCategoryDictionary,
    apply_functionals,
    assemble_vector,
    audio_features_for_segment,
    classify_key_topic,
    context_unaware_table,
    featurize_dataset,
    layout_for,
    liwc_counts,
    load_key_topic_rules,
    load_vectors,
    load_word_categories,
    save_vectors,
    video_features_for_segment,
)
from .model import (
    ForestRegressor,
    LinearSvrRegressor,
    MeanRegressor,
    RandomOversampler,
    RegressorSpec,
    SgdRegressor,
    TrainedModel,
    grid_search,
    load_model,
    make_regressor,
    oversample,
    predict,
    save_model,
    train,
)
from .select import (
    CorrelationCache,
    SelectionReport,
    TwoStepSelector,
    cfs_merit,
    cfs_search,
    f_value,
    f_values,
    pearson,
    rank_and_truncate,
)
from .synth import (
    PlantedFeature,
    PlantedTruth,
    SynthSpec,
    generate_corpus,
    load_planted_truth,
    verify_recovery,
)
from .text import edit_distance, normalize_sentence
from .topic import (
    CoverageStats,
    TopicDictionary,
    TopicEntry,
    TopicSegment,
    build_preliminary_dictionary,
    cluster_sentences,
    coverage_stats,
    load_topic_dictionary,
    match_topic,
    merge_topic_windows,
    segment_interview,
)
