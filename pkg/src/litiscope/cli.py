"""Command-line entry point: synth, ingest-check, train, predict, evaluate.

Configuration is a flat ``key = value`` file with ``#`` comments. Every key
has a documented default, unknown keys are rejected, and the fully resolved
configuration is echoed to the run log (stderr) so a run can be audited and
reproduced from its log alone. All randomness flows from the single ``seed``
key through named derivations; nothing reads ambient entropy.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import (
    DataOption,
    SynthConfig,
    apply_data_option,
    generate_synthetic,
    load_corpus,
    save_corpus,
)
from .errors import ConfigError, LitiscopeError, ModelFileError
from .evalkit import (
    DEFAULT_FOLDS,
    DEFAULT_REPS,
    N_TEXTUAL,
    TASK_LITIGATION,
    TASK_TTL,
    FittedPipeline,
    PipelineConfig,
    cross_validate,
    featurize_for,
    fit_pipeline,
    fit_ttl_nested,
    render_figures,
    summary_table,
    write_report,
)
from .geometry import HULL_TOL
from .learners import (
    ENSEMBLE_CUTOFF,
    ENSEMBLE_W_FOREST,
    ENSEMBLE_W_SVM,
    FOREST_TREES,
    SVM_C,
    SVM_GAMMA,
    ensemble_probs,
)
from .litmodel import (
    CLUSTERS_PER_CLASS,
    LitHyperparams,
    LitTrainConfig,
    load_model,
    save_model,
    score_litigation_batch,
)
from .resample import SmoteConfig
from .ttlmodel import classify_nested_batch
from .util import derive_seed

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunConfig:
    """Every run-tunable knob with its documented default."""

    option: DataOption = DataOption.NO_SEC
    n_textual: int = N_TEXTUAL
    min_df: int = 2
    discount_rate: float = 0.0
    synth_per_minority: int = 5
    major_per_synth: int = 1
    k_neighbors: int = 5
    undersample: bool = False
    clusters_per_class: int = CLUSTERS_PER_CLASS
    hull_tol: float = HULL_TOL
    ball_scale: float = 3.5
    hull_ratio_max: float = 1.3
    lit_fraction_min: float = 0.015
    scale_divides: bool = False
    pure: bool = False
    cluster_on_original: bool = False
    balls_include_synthetic: bool = False
    gamma: float = SVM_GAMMA
    svm_c: float = SVM_C
    trees: int = FOREST_TREES
    w_svm: float = ENSEMBLE_W_SVM
    w_forest: float = ENSEMBLE_W_FOREST
    cutoff: float = ENSEMBLE_CUTOFF
    ttl_clusters: int = 5
    ttl_train: bool = False
    folds: int = DEFAULT_FOLDS
    reps: int = DEFAULT_REPS
    task: str = TASK_LITIGATION
    seed: int = 0

    def pipeline(self) -> PipelineConfig:
        try:
            hyper = LitHyperparams(
                ball_scale=self.ball_scale,
                hull_ratio_max=self.hull_ratio_max,
                lit_fraction_min=self.lit_fraction_min,
                scale_divides=self.scale_divides,
                hull_tol=self.hull_tol,
            )
            smote = SmoteConfig(
                n_synth_per_minority=self.synth_per_minority,
                n_major_per_synth=self.major_per_synth,
                k_neighbors=self.k_neighbors,
                undersample_majority=self.undersample,
            )
            lit = LitTrainConfig(
                clusters_per_class=self.clusters_per_class,
                hyper=hyper,
                smote=smote,
                gamma=self.gamma,
                svm_C=self.svm_c,
                n_trees=self.trees,
                w_svm=self.w_svm,
                w_forest=self.w_forest,
                cutoff=self.cutoff,
                cluster_on_original=self.cluster_on_original,
                balls_include_synthetic=self.balls_include_synthetic,
            )
        except ValueError as exc:
            raise ConfigError(f"configuration out of range: {exc}")
        return PipelineConfig(
            option=self.option,
            n_textual=self.n_textual,
            min_df=self.min_df,
            discount_rate=self.discount_rate,
            lit=lit,
            pure=self.pure,
            ttl_clusters=self.ttl_clusters,
        )


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "on", "1"):
        return True
    if t in ("false", "no", "off", "0"):
        return False
    raise ValueError(text)


def _parse_option(text: str) -> DataOption:
    try:
        return DataOption(text.strip().lower())
    except ValueError:
        raise ValueError(text)


def _parse_task(text: str) -> str:
    t = text.strip().lower()
    if t not in (TASK_LITIGATION, TASK_TTL):
        raise ValueError(text)
    return t


# Config key -> (RunConfig field, value parser, human description of the type).
_KEYS = {
    "data.option": ("option", _parse_option, "one of nosec, secdrop, secimpute"),
    "features.n_textual": ("n_textual", int, "an integer"),
    "features.min_df": ("min_df", int, "an integer"),
    "features.discount_rate": ("discount_rate", float, "a number"),
    "smote.synth_per_minority": ("synth_per_minority", int, "an integer"),
    "smote.major_per_synth": ("major_per_synth", int, "an integer"),
    "smote.k_neighbors": ("k_neighbors", int, "an integer"),
    "smote.undersample": ("undersample", _parse_bool, "a boolean"),
    "geometry.clusters_per_class": ("clusters_per_class", int, "an integer"),
    "geometry.hull_tol": ("hull_tol", float, "a number"),
    "model.ball_scale": ("ball_scale", float, "a number"),
    "model.hull_ratio_max": ("hull_ratio_max", float, "a number"),
    "model.lit_fraction_min": ("lit_fraction_min", float, "a number"),
    "model.scale_divides": ("scale_divides", _parse_bool, "a boolean"),
    "model.pure": ("pure", _parse_bool, "a boolean"),
    "model.cluster_on_original": ("cluster_on_original", _parse_bool, "a boolean"),
    "model.balls_include_synthetic": ("balls_include_synthetic", _parse_bool, "a boolean"),
    "learners.gamma": ("gamma", float, "a number"),
    "learners.svm_c": ("svm_c", float, "a number"),
    "learners.trees": ("trees", int, "an integer"),
    "learners.w_svm": ("w_svm", float, "a number"),
    "learners.w_forest": ("w_forest", float, "a number"),
    "learners.cutoff": ("cutoff", float, "a number"),
    "ttl.clusters": ("ttl_clusters", int, "an integer"),
    "ttl.train": ("ttl_train", _parse_bool, "a boolean"),
    "cv.folds": ("folds", int, "an integer"),
    "cv.reps": ("reps", int, "an integer"),
    "cv.task": ("task", _parse_task, "litigation or ttl"),
    "seed": ("seed", int, "an integer"),
}


def parse_config(path) -> RunConfig:
    """Read a config file; absent keys keep their defaults."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}")
    values = {}
    for ln, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"line {ln}: expected `key = value`, got {raw_line.strip()!r}")
        if key not in _KEYS:
            raise ConfigError(f"line {ln}: unknown configuration key {key!r}")
        field, parse, expected = _KEYS[key]
        try:
            values[field] = parse(raw.strip())
        except ValueError:
            raise ConfigError(f"line {ln}: {key} expects {expected}, got {raw.strip()!r}")
    return RunConfig(**values)


def _log_config(cfg: RunConfig) -> None:
    for key, (field, _, _) in _KEYS.items():
        value = getattr(cfg, field)
        if isinstance(value, DataOption):
            value = value.value
        log.info("config %s = %s", key, value)


def _load_run_config(args) -> RunConfig:
    cfg = parse_config(args.config) if args.config else RunConfig()
    _log_config(cfg)
    return cfg


def _cmd_synth(args) -> int:
    cfg = SynthConfig(
        n=args.n,
        litigation_rate=args.rate,
        signal_strength=args.signal,
        seed=args.seed,
        sec_fraction=args.sec_fraction,
        tag=args.tag,
    )
    log.info("synth n=%d rate=%g seed=%d", args.n, args.rate, args.seed)
    corpus = generate_synthetic(cfg)
    save_corpus(corpus, args.out)
    print(
        f"wrote {len(corpus.records)} records "
        f"({corpus.n_litigated()} litigated) to {args.out}"
    )
    return 0


def _cmd_ingest_check(args) -> int:
    corpus = load_corpus(args.corpus)
    with_sec = sum(1 for r in corpus.records if r.sec is not None)
    print(
        f"{len(corpus.records)} records, {corpus.n_litigated()} litigated "
        f"({100 * corpus.litigation_rate():.2f}%), {with_sec} with financials"
    )
    return 0


def _cmd_train(args) -> int:
    cfg = _load_run_config(args)
    corpus = load_corpus(args.corpus)
    fitted = fit_pipeline(corpus, cfg.pipeline(), seed=cfg.seed)
    if cfg.ttl_train:
        fitted = fit_ttl_nested(
            fitted, corpus, cfg.ttl_clusters, derive_seed(cfg.seed, "ttl-nested")
        )
    save_model(args.out, fitted)
    minority, majority = fitted.model.resampled_counts
    print(
        f"trained on {len(corpus.records)} records "
        f"(resampled to {minority}/{majority}), model written to {args.out}"
    )
    return 0


PREDICT_COLUMNS = ("id", "label", "ensemble_p", "hull_ratio", "lit_fraction_ratio", "year_group")


def _predict_lines(fitted: FittedPipeline, corpus) -> list[str]:
    matrix = featurize_for(fitted, corpus)
    X = matrix.values
    if fitted.pure:
        probs, labels = ensemble_probs(fitted.model.ensemble, X)
        traces = None
    else:
        labels, traces = score_litigation_batch(fitted.model, X)

    groups = [""] * len(labels)
    if fitted.nested is not None and labels.any():
        hit = np.flatnonzero(labels)
        assigned = classify_nested_batch(
            fitted.nested, X[hit], tol=fitted.model.hyper.hull_tol
        )
        for i, g in zip(hit, assigned):
            groups[i] = str(int(g))

    lines = ["\t".join(PREDICT_COLUMNS)]
    for i, record in enumerate(corpus.records):
        if traces is None:
            fields = (record.id, str(int(labels[i])), f"{probs[i]:.6f}", "", "", groups[i])
        else:
            t = traces[i]
            fields = (
                record.id,
                str(int(labels[i])),
                "" if t.ensemble_p is None else f"{t.ensemble_p:.6f}",
                f"{t.hull_ratio:.6f}",
                f"{t.lit_fraction_ratio:.6f}",
                groups[i],
            )
        lines.append("\t".join(fields))
    return lines


def _cmd_predict(args) -> int:
    payload = load_model(args.model)
    if not isinstance(payload, FittedPipeline):
        raise ModelFileError("model file does not contain a fitted pipeline")
    # The SEC data option is part of the model: rows are emitted for the
    # records the option keeps (secdrop removes those without financials).
    corpus = apply_data_option(load_corpus(args.corpus), payload.option)
    lines = _predict_lines(payload, corpus)
    body = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(body, encoding="utf-8")
        print(f"wrote {len(lines) - 1} predictions to {args.out}")
    else:
        sys.stdout.write(body)
    return 0


def _cmd_evaluate(args) -> int:
    cfg = _load_run_config(args)
    corpus = load_corpus(args.corpus)
    report = cross_validate(
        corpus,
        cfg.pipeline(),
        folds=cfg.folds,
        reps=cfg.reps,
        seed=cfg.seed,
        task=cfg.task,
    )
    write_report(report, args.out)
    fig_dir = args.figures if args.figures else Path(args.out).parent
    figures = render_figures(report, fig_dir)
    print(summary_table(report))
    print(f"report: {args.out}")
    for path in figures:
        print(f"figure: {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="litiscope",
        description="Patent litigation likelihood and time-to-litigation prediction.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus file")
    p.add_argument("--n", type=int, required=True, help="number of records")
    p.add_argument("--rate", type=float, required=True, help="litigation rate in (0, 1)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--signal", type=float, default=1.0, help="signal strength, 0 = none")
    p.add_argument("--sec-fraction", type=float, default=0.6, dest="sec_fraction",
                   help="fraction of assignees with financials")
    p.add_argument("--tag", default="synthetic", help="keyword tag stored in the corpus")
    p.add_argument("--out", required=True, help="corpus file to write")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("ingest-check", help="load a corpus and print summary counts")
    p.add_argument("--corpus", required=True)
    p.set_defaults(func=_cmd_ingest_check)

    p = sub.add_parser("train", help="fit the pipeline and write a model file")
    p.add_argument("--config", help="config file; defaults apply when omitted")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True, help="model file to write")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="score a corpus with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", help="prediction file to write; stdout when omitted")
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("evaluate", help="replicated cross-validation with report and figures")
    p.add_argument("--config", help="config file; defaults apply when omitted")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True, help="report file to write")
    p.add_argument("--figures", help="figure directory; defaults to the report's directory")
    p.set_defaults(func=_cmd_evaluate)
    return parser


def _setup_logging() -> None:
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    _setup_logging()
    try:
        return args.func(args)
    except LitiscopeError as exc:
        log.error("%s", exc)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
