"""Calibrate 2PL IRT latent traits from interaction logs, predict them for
never-seen questions from text features, and evaluate both on the sequential
performance-prediction task."""

from .backends import BACKEND
from .evaluate import (
    ClassificationReport,
    SplitSpec,
    classification_report,
    kfold_grid_search,
    majority_baseline,
    regression_metrics,
    split_experiment,
)
from .irt import (
    CalibrationResult,
    IrtConfig,
    PredictionTrace,
    calibrate,
    estimate_skill,
    irf,
    log_likelihood,
    predict_performance,
    predict_with_skill_side_channel,
)
from .regress import (
    ForestModel,
    HyperParams,
    LinearModel,
    TreeNode,
    fit_forest,
    fit_linear,
    fit_tree,
    predict,
)
from .synth import SynthConfig, SynthGroundTruth, generate, recovery_report
from .textpipe import Encoding, Vocabulary, build_vocabulary, encode, preprocess, tfidf
from .types import (
    Choice,
    Interaction,
    InteractionLog,
    ItemParams,
    Question,
    QuestionBank,
    SkillEstimate,
    filter_first_timers,
    filter_min_support,
)

__version__ = "0.1.0"
