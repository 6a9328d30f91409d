"""Patent litigation likelihood and time-to-litigation prediction."""

from .corpus import Corpus, DataOption, PatentRecord, SynthConfig, generate_synthetic, load_corpus, save_corpus
from .errors import (
    ConfigError,
    ConvergenceError,
    CorpusError,
    LitiscopeError,
    ModelFileError,
    TrainingError,
)
from .evalkit import (
    CVReport,
    FittedPipeline,
    PipelineConfig,
    cross_validate,
    fit_pipeline,
    fit_ttl_nested,
    predict_pipeline,
    render_figures,
    write_report,
)
from .litmodel import (
    LitHyperparams,
    LitTrainConfig,
    LitigationModel,
    ScoreTrace,
    load_model,
    save_model,
    score_litigation,
    train_litigation,
)
from .ttlmodel import NodePrediction, YearGroup, classify_nested, year_group

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ConvergenceError",
    "Corpus",
    "CorpusError",
    "CVReport",
    "DataOption",
    "FittedPipeline",
    "LitHyperparams",
    "LitTrainConfig",
    "LitigationModel",
    "LitiscopeError",
    "ModelFileError",
    "NodePrediction",
    "PatentRecord",
    "PipelineConfig",
    "ScoreTrace",
    "SynthConfig",
    "TrainingError",
    "YearGroup",
    "classify_nested",
    "cross_validate",
    "fit_pipeline",
    "fit_ttl_nested",
    "generate_synthetic",
    "load_corpus",
    "load_model",
    "predict_pipeline",
    "render_figures",
    "save_corpus",
    "save_model",
    "score_litigation",
    "train_litigation",
    "write_report",
    "year_group",
]
