"""Command-line pipeline: synth, ingest, preprocess, train, predict,
backtest, select-features, aggregate, report, and the all-stages
`pipeline` command.

Each stage reads the previous stage's artifacts from the work directory
and writes versioned outputs stamped with the run's config hash and
seed, so any stage can be re-run in isolation and full runs are
byte-for-byte reproducible.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import aggregate as agg
from . import evaluate, feature_select, ingest, model_core, preprocess, synthetic
from .anfis import AnfisConfig
from .errors import ConfigError, DataError, FundrankError, InvalidConfig, NumericalError
from .fnn import FnnConfig
from .quarters import Quarter
from .rf import RfConfig

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

FAMILY_ROW = {"fnn": "FNN", "rf": "RF", "anfis": "ANFIS"}

UNIVERSE_FILE = "universe.json"
SAMPLES_FILE = "samples.json"
SAMPLES_MERGED_FILE = "samples_merged.json"
SUBSET_FILE = "feature_subset.json"


@dataclass
class PipelineConfig:
    data_dir: str = ""
    benchmark: str = ""
    out: str = "runs"
    seed: int = 0
    k: int = 20
    fs_k: int = 6
    b1: str | None = None  # e.g. "2008Q1"
    b2: str | None = None
    zero_base: str = "zero"
    min_train_samples: int = 20
    global_learning: bool = False
    fnn: FnnConfig = field(default_factory=FnnConfig)
    rf: RfConfig = field(default_factory=RfConfig)
    # ridge well above the solver floor: per-stock consequent solves sit
    # close to the sample budget and need real shrinkage to generalize
    anfis: AnfisConfig = field(default_factory=lambda: AnfisConfig(ridge=0.1))

    def to_dict(self) -> dict:
        """Run identity: everything except where the outputs land."""
        doc = dataclasses.asdict(self)
        doc.pop("out")
        doc["fnn"]["hidden"] = list(self.fnn.hidden)
        return doc

    def hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    def meta(self) -> str:
        return f"config_hash={self.hash()} seed={self.seed}"


def parse_config_file(path: str | Path) -> dict[str, str]:
    """Flat `key = value` pairs; '#' starts a comment."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidConfig(f"{path}:{lineno}: expected key = value")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


_MODEL_CONFIGS = {"fnn": FnnConfig, "rf": RfConfig, "anfis": AnfisConfig}


def _coerce(kind, raw: str):
    if kind is bool or kind == "bool":
        return raw.lower() in ("1", "true", "yes", "on")
    if kind is int:
        return int(raw)
    if kind is float:
        return float(raw)
    return raw


def build_config(file_values: dict[str, str], args: argparse.Namespace) -> PipelineConfig:
    """Defaults, overlaid by config-file values, overlaid by CLI flags."""
    cfg = PipelineConfig()
    model_overrides: dict[str, dict] = {"fnn": {}, "rf": {}, "anfis": {}}
    simple_fields = {
        f.name: f for f in dataclasses.fields(PipelineConfig) if f.name not in _MODEL_CONFIGS
    }
    for key, raw in file_values.items():
        if "." in key:
            prefix, name = key.split(".", 1)
            if prefix not in _MODEL_CONFIGS:
                raise InvalidConfig(f"unknown config section {prefix!r}")
            fields = {f.name: f for f in dataclasses.fields(_MODEL_CONFIGS[prefix])}
            if name not in fields:
                raise InvalidConfig(f"unknown config key {key!r}")
            ftype = fields[name].type
            if name == "hidden":
                value = tuple(int(x) for x in raw.replace(",", " ").split())
            elif name == "patience":
                value = None if raw.lower() in ("none", "") else int(raw)
            elif name == "max_features" or name == "max_depth":
                value = None if raw.lower() in ("none", "") else int(raw)
            elif "int" in str(ftype):
                value = int(raw)
            elif "float" in str(ftype):
                value = float(raw)
            elif "bool" in str(ftype):
                value = _coerce(bool, raw)
            else:
                value = raw
            model_overrides[prefix][name] = value
        else:
            if key not in simple_fields:
                raise InvalidConfig(f"unknown config key {key!r}")
            f = simple_fields[key]
            if key in ("b1", "b2"):
                value = None if raw.lower() in ("none", "") else raw
            elif "int" in str(f.type):
                value = int(raw)
            elif "bool" in str(f.type):
                value = _coerce(bool, raw)
            else:
                value = raw
            setattr(cfg, key, value)
    for prefix, overrides in model_overrides.items():
        if overrides:
            setattr(cfg, prefix, dataclasses.replace(getattr(cfg, prefix), **overrides))
    # CLI flags win
    for name in ("data_dir", "benchmark", "out", "seed", "k", "fs_k", "b1", "b2"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, name, value)
    if getattr(args, "global_learning", False):
        cfg.global_learning = True
    if cfg.b1:
        Quarter.parse(cfg.b1)  # fail fast on malformed boundaries
    if cfg.b2:
        Quarter.parse(cfg.b2)
    return cfg


def _model_config(cfg: PipelineConfig, family: str):
    return getattr(cfg, family)


class StageError(Exception):
    """Wraps a failure with the name of the stage that raised it."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[stage {stage}] {cause}")
        self.stage = stage
        self.cause = cause


def _run_stage(stage: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except FundrankError as exc:
        raise StageError(stage, exc) from exc
    except OSError as exc:
        raise StageError(stage, DataError(str(exc))) from exc


# --- stages -----------------------------------------------------------------


def stage_ingest(cfg: PipelineConfig, work: Path) -> tuple[list, object, list[str]]:
    data_dir = Path(cfg.data_dir)
    if not cfg.benchmark:
        raise DataError("no benchmark file configured")
    benchmark_path = Path(cfg.benchmark)
    if not data_dir.is_dir():
        raise DataError(f"data directory {data_dir} does not exist")
    if not benchmark_path.is_file():
        raise DataError(f"benchmark file {benchmark_path} does not exist")
    stock_files = sorted(
        p
        for p in data_dir.glob("*.csv")
        if p.resolve() != benchmark_path.resolve()
        and p.name != synthetic.BENCHMARK_FILENAME
    )
    if not stock_files:
        raise DataError(f"no per-ticker CSV files in {data_dir}")
    universe = [ingest.parse_stock_file(p) for p in stock_files]
    benchmark = ingest.parse_benchmark_file(benchmark_path)
    universe, dropped = ingest.drop_sparse_features(universe)
    universe = [ingest.impute_missing(s) for s in universe]
    ingest.save_universe(work / UNIVERSE_FILE, universe, benchmark, dropped)
    logger.info("ingested %d tickers (%d features dropped)", len(universe), len(dropped))
    return universe, benchmark, dropped


def stage_preprocess(cfg: PipelineConfig, work: Path) -> preprocess.SampleSet:
    universe, benchmark, _ = ingest.load_universe(work / UNIVERSE_FILE)
    sample_set = preprocess.assemble_samples(universe, benchmark, zero_base=cfg.zero_base)
    if cfg.b1 and cfg.b2:
        b1, b2 = Quarter.parse(cfg.b1), Quarter.parse(cfg.b2)
    else:
        b1, b2 = preprocess.default_boundaries(sample_set)
    sample_set = preprocess.split_chronological(sample_set, b1, b2)
    sample_set, _ = preprocess.standardize(sample_set)
    preprocess.save(sample_set, work / SAMPLES_FILE)
    logger.info(
        "assembled %d samples, %d tickers, boundaries %s / %s",
        len(sample_set.samples),
        len(sample_set.tickers),
        b1,
        b2,
    )
    return sample_set


def stage_select_features(
    cfg: PipelineConfig, work: Path, sample_set: preprocess.SampleSet
) -> feature_select.FeatureSubset:
    subset = feature_select.select_features(sample_set, cfg.rf, cfg.fs_k, cfg.seed)
    subset.save(work / SUBSET_FILE)
    logger.info("selected features: %s", ", ".join(subset.names))
    return subset


# A consequent solve right at n_samples == n_params interpolates noise;
# demand some slack before adding another fuzzy input.
SAMPLES_PER_PARAM = 2


def anfis_input_budget(
    cfg: PipelineConfig, subset: feature_select.FeatureSubset, min_train_count: int
) -> feature_select.FeatureSubset:
    """Largest importance-ranked prefix of the subset that a grid fuzzy
    system can actually fit: the rule grid must respect the rule cap and
    the consequent solve must stay comfortably over-determined."""
    m = cfg.anfis.mfs_per_input
    best = 0
    for kp in range(1, subset.k + 1):
        rules = m**kp
        if rules > cfg.anfis.rule_cap:
            break
        if rules * (kp + 1) * SAMPLES_PER_PARAM > min_train_count:
            break
        best = kp
    if best == 0:
        raise ConfigError(
            "no feasible fuzzy input count: even one input exceeds the rule cap "
            f"or the {min_train_count} available train samples"
        )
    return feature_select.FeatureSubset(
        indices=subset.indices[:best],
        names=subset.names[:best],
        importances=subset.importances[:best],
    )


def _min_train_count(sample_set: preprocess.SampleSet) -> int:
    return min(len(sample_set.matrix("train", t)[1]) for t in sample_set.tickers)


def stage_train(
    cfg: PipelineConfig,
    work: Path,
    family: str,
    sample_set: preprocess.SampleSet,
    label: str,
) -> dict[str, model_core.TrainedModel]:
    config = _model_config(cfg, family)
    if cfg.global_learning:
        models = model_core.train_global_model(family, sample_set, config, cfg.seed)
    else:
        models = model_core.train_local_models(
            family, sample_set, config, cfg.seed, min_train_samples=cfg.min_train_samples
        )
    models_dir = work / "models" / label
    models_dir.mkdir(parents=True, exist_ok=True)
    for ticker, tm in models.items():
        tm.save(models_dir / f"{ticker}.json")
    logger.info("trained %d %s model(s) [%s]", len(models), family, label)
    return models


def stage_predict(
    cfg: PipelineConfig,
    work: Path,
    models: dict[str, model_core.TrainedModel],
    sample_set: preprocess.SampleSet,
    label: str,
) -> evaluate.PredictionTable:
    predictions = model_core.predict_all(models, sample_set, "test")
    evaluate.write_predictions_csv(
        work / f"predictions_{label}.csv", predictions, meta=cfg.meta()
    )
    return predictions


def load_models(models_dir: Path) -> dict[str, model_core.TrainedModel]:
    files = sorted(Path(models_dir).glob("*.json"))
    if not files:
        raise DataError(f"no model bundles in {models_dir}")
    models = {}
    for path in files:
        tm = model_core.TrainedModel.load(path)
        models[tm.ticker] = tm
    return models


# --- pipeline ---------------------------------------------------------------

# The paper-shaped run: three baselines, feature-selected reruns, and
# majority-vote aggregation of (FNN+FS, ANFIS+FS, RF).
STRATEGIES = ("FNN", "ANFIS", "RF", "FNN+FS", "ANFIS+FS", "RF+FS")
AGG_MEMBERS = ("FNN+FS", "ANFIS+FS", "RF")


def run_pipeline(cfg: PipelineConfig) -> dict:
    """Execute every stage; returns the report bundle that was written."""
    work = Path(cfg.out)
    work.mkdir(parents=True, exist_ok=True)

    _run_stage("ingest", stage_ingest, cfg, work)
    samples = _run_stage("preprocess", stage_preprocess, cfg, work)
    subset = _run_stage("select-features", stage_select_features, cfg, work, samples)

    merged = _run_stage("preprocess", preprocess.merge_train_validation, samples)
    preprocess.save(merged, Path(cfg.out) / SAMPLES_MERGED_FILE)
    fs_samples = _run_stage("select-features", feature_select.project, merged, subset)
    anfis_subset = _run_stage(
        "train", anfis_input_budget, cfg, subset, _min_train_count(merged)
    )
    anfis_samples = feature_select.project(merged, anfis_subset)

    notes = {
        "anfis_inputs": list(anfis_subset.names),
        "anfis_note": (
            "fuzzy models run on the top feature-importance inputs only: "
            f"{len(anfis_subset.names)} of {len(samples.feature_names)} features keep the "
            f"rule grid within the cap ({cfg.anfis.rule_cap}) and the consequent solve "
            "fully determined"
        ),
    }

    run_inputs = {
        "FNN": ("fnn", merged),
        "ANFIS": ("anfis", anfis_samples),
        "RF": ("rf", merged),
        "FNN+FS": ("fnn", fs_samples),
        "ANFIS+FS": ("anfis", anfis_samples),
        "RF+FS": ("rf", fs_samples),
    }

    predictions: dict[str, evaluate.PredictionTable] = {}
    for label in STRATEGIES:
        family, sset = run_inputs[label]
        models = _run_stage("train", stage_train, cfg, work, family, sset, label)
        predictions[label] = _run_stage(
            "predict", stage_predict, cfg, work, models, sset, label
        )

    actuals = evaluate.actuals_table(merged, "test")
    bundle = _run_stage(
        "report", emit_reports, cfg, work, predictions, actuals, notes
    )
    return bundle


def emit_reports(
    cfg: PipelineConfig,
    work: Path,
    predictions: dict[str, evaluate.PredictionTable],
    actuals: dict,
    notes: dict,
) -> dict:
    tables_dir = work / "tables"
    series_dir = work / "series"
    tables_dir.mkdir(exist_ok=True)
    series_dir.mkdir(exist_ok=True)

    table_meta = cfg.meta()
    if notes.get("anfis_inputs"):
        table_meta += f" anfis_inputs={','.join(notes['anfis_inputs'])}"

    reports: dict[str, dict[str, evaluate.PortfolioReport]] = {"buy": {}, "sell": {}}
    for label, table in predictions.items():
        for side in ("buy", "sell"):
            rep, _ = evaluate.backtest(table, actuals, cfg.k, side)
            reports[side][label] = rep

    universe_rep = evaluate.universe_report(actuals)
    rank_tables = {label: evaluate.rank_table(predictions[label]) for label in AGG_MEMBERS}
    empty_quarters: dict[str, list[str]] = {}
    consensus_rows: dict[str, dict[str, evaluate.PortfolioReport]] = {"buy": {}, "sell": {}}
    for m in (2, 3):
        for side in ("buy", "sell"):
            vote = agg.VoteConfig(
                members=AGG_MEMBERS, threshold=m, k=cfg.k, side=side.upper()
            )
            consensus = agg.aggregate(rank_tables, vote)
            rep, empty = agg.consensus_report(consensus, actuals)
            label = f"Agg{m}"
            consensus_rows[side][label] = rep
            empty_quarters[f"{label}_{side}"] = [str(q) for q in empty]
            with (work / f"consensus_agg{m}_{side}.csv").open("w", newline="") as fh:
                fh.write(f"# {cfg.meta()}\n")
                fh.write("quarter,side,tickers\n")
                for q in sorted(consensus):
                    fh.write(f"{q},{side.upper()},{' '.join(consensus[q])}\n")

    table_specs = {
        "baseline": ("FNN", "ANFIS", "RF"),
        "fs": ("FNN+FS", "ANFIS+FS", "RF+FS"),
        "agg": ("FNN+FS", "ANFIS+FS", "RF", "Agg2", "Agg3"),
    }
    for side in ("buy", "sell"):
        for name, labels in table_specs.items():
            rows = []
            for label in labels:
                rep = consensus_rows[side].get(label) or reports[side][label]
                rows.append((label, rep))
            rows.append(("Universe", universe_rep))
            evaluate.write_report_csv(
                tables_dir / f"{side}_{name}.csv", rows, meta=table_meta
            )
        for label, rep in list(reports[side].items()) + list(consensus_rows[side].items()):
            slug = label.replace("+", "_").lower()
            evaluate.write_series_csv(
                series_dir / f"{slug}_{side}.csv", rep.quarterly, meta=cfg.meta()
            )
    evaluate.write_series_csv(
        series_dir / "universe.csv", universe_rep.quarterly, meta=cfg.meta()
    )

    bundle = {
        "format": "fundrank/report",
        "version": 1,
        "seed": cfg.seed,
        "config_hash": cfg.hash(),
        "config": cfg.to_dict(),
        "notes": notes,
        "empty_consensus_quarters": empty_quarters,
        "tables": {
            side: {
                label: evaluate.report_to_dict(rep)
                for label, rep in list(reports[side].items())
                + list(consensus_rows[side].items())
                + [("Universe", universe_rep)]
            }
            for side in ("buy", "sell")
        },
    }
    (work / "report.json").write_text(json.dumps(bundle, sort_keys=True, indent=2))
    return bundle


# --- argument parsing --------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--data-dir", dest="data_dir", default=None)
    p.add_argument("--benchmark", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--k", type=int, default=None, help="portfolio size")
    p.add_argument("--fs-k", dest="fs_k", type=int, default=None, help="selected feature count")
    p.add_argument("--b1", default=None, help="train/validation boundary, e.g. 2008Q1")
    p.add_argument("--b2", default=None, help="validation/test boundary, e.g. 2013Q2")
    p.add_argument(
        "--global-learning",
        dest="global_learning",
        action="store_true",
        help="one pooled model instead of one per stock",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fundrank",
        description="Rank stocks by predicted next-quarter relative return "
        "from quarterly fundamentals.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic universe")
    _add_common(p)
    p.add_argument("--stocks", type=int, default=70)
    p.add_argument("--quarters", type=int, default=88)
    p.add_argument("--noise-std", type=float, default=2.0)
    p.add_argument("--missing-fraction", type=float, default=0.0)

    for name, help_text in [
        ("ingest", "parse and repair the raw CSV universe"),
        ("preprocess", "build detrended, standardized samples"),
        ("select-features", "rank features by forest importance"),
        ("pipeline", "run every stage end to end"),
        ("report", "re-emit report tables from saved predictions"),
    ]:
        p = sub.add_parser(name, help=help_text)
        _add_common(p)

    p = sub.add_parser("train", help="fit per-stock models for one family")
    _add_common(p)
    p.add_argument("--model", required=True, choices=model_core.MODEL_FAMILIES)

    p = sub.add_parser("predict", help="predict the test partition")
    _add_common(p)
    p.add_argument("--model", required=True, choices=model_core.MODEL_FAMILIES)

    p = sub.add_parser("backtest", help="score portfolios from saved predictions")
    _add_common(p)
    p.add_argument("--predictions", required=True, help="predictions CSV path")
    p.add_argument("--side", choices=("buy", "sell"), default="buy")
    p.add_argument("--label", default="Model")

    p = sub.add_parser("aggregate", help="majority-vote consensus portfolios")
    _add_common(p)
    p.add_argument(
        "--predictions",
        nargs="+",
        required=True,
        help="member prediction CSVs (2 or more)",
    )
    p.add_argument("--agg", type=int, choices=(2, 3), default=2, help="votes required")
    p.add_argument("--side", choices=("buy", "sell"), default="buy")

    return parser


def _resolve_config(args: argparse.Namespace) -> PipelineConfig:
    file_values = parse_config_file(args.config) if args.config else {}
    return build_config(file_values, args)


def _cmd_synth(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    out = cfg.out
    synth_cfg = synthetic.SynthConfig(
        n_stocks=args.stocks,
        n_quarters=args.quarters,
        seed=cfg.seed,
        noise_std=args.noise_std,
        missing_fraction=args.missing_fraction,
    )
    _run_stage("synth", synthetic.generate, synth_cfg, out)
    print(f"wrote {args.stocks} ticker files + benchmark to {out}")
    return EXIT_OK


def _cmd_backtest(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    work = Path(cfg.out)
    predictions = _run_stage(
        "backtest", evaluate.read_predictions_csv, args.predictions
    )
    merged_path = work / SAMPLES_MERGED_FILE
    samples_path = merged_path if merged_path.exists() else work / SAMPLES_FILE
    samples = _run_stage("backtest", preprocess.load, samples_path)
    actuals = evaluate.actuals_table(samples, "test")
    rep, _ = _run_stage("backtest", evaluate.backtest, predictions, actuals, cfg.k, args.side)
    universe_rep = _run_stage("backtest", evaluate.universe_report, actuals)
    out_path = work / f"backtest_{args.label.lower().replace('+', '_')}_{args.side}.csv"
    evaluate.write_report_csv(
        out_path, [(args.label, rep), ("Universe", universe_rep)], meta=cfg.meta()
    )
    print(f"wrote {out_path}")
    return EXIT_OK


def _cmd_aggregate(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    work = Path(cfg.out)
    tables = {}
    for path in args.predictions:
        table = _run_stage("aggregate", evaluate.read_predictions_csv, path)
        tables[Path(path).stem] = evaluate.rank_table(table)
    vote = agg.VoteConfig(
        members=tuple(sorted(tables)), threshold=args.agg, k=cfg.k, side=args.side.upper()
    )
    consensus = _run_stage("aggregate", agg.aggregate, tables, vote)
    merged_path = work / SAMPLES_MERGED_FILE
    samples_path = merged_path if merged_path.exists() else work / SAMPLES_FILE
    samples = _run_stage("aggregate", preprocess.load, samples_path)
    actuals = evaluate.actuals_table(samples, "test")
    rep, empty = _run_stage("aggregate", agg.consensus_report, consensus, actuals)
    out_path = work / f"aggregate_agg{args.agg}_{args.side}.csv"
    evaluate.write_report_csv(out_path, [(f"Agg{args.agg}", rep)], meta=cfg.meta())
    if empty:
        logger.warning("empty consensus in %d quarter(s): %s", len(empty), empty)
    print(f"wrote {out_path}")
    return EXIT_OK


def _cmd_report(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    work = Path(cfg.out)
    merged = _run_stage("report", preprocess.load, work / SAMPLES_MERGED_FILE)
    subset = _run_stage(
        "report", feature_select.FeatureSubset.load, work / SUBSET_FILE
    )
    predictions = {}
    for label in STRATEGIES:
        path = work / f"predictions_{label}.csv"
        predictions[label] = _run_stage("report", evaluate.read_predictions_csv, path)
    actuals = evaluate.actuals_table(merged, "test")
    anfis_subset = _run_stage(
        "report", anfis_input_budget, cfg, subset, _min_train_count(merged)
    )
    notes = {"anfis_inputs": list(anfis_subset.names)}
    _run_stage("report", emit_reports, cfg, work, predictions, actuals, notes)
    print(f"wrote report bundle under {work}")
    return EXIT_OK


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    cfg = _resolve_config(args)
    work = Path(cfg.out)

    if args.command == "synth":
        return _cmd_synth(args, cfg)
    if args.command == "ingest":
        work.mkdir(parents=True, exist_ok=True)
        _run_stage("ingest", stage_ingest, cfg, work)
        print(f"wrote {work / UNIVERSE_FILE}")
        return EXIT_OK
    if args.command == "preprocess":
        _run_stage("preprocess", stage_preprocess, cfg, work)
        print(f"wrote {work / SAMPLES_FILE}")
        return EXIT_OK
    if args.command == "select-features":
        samples = _run_stage("select-features", preprocess.load, work / SAMPLES_FILE)
        subset = _run_stage("select-features", stage_select_features, cfg, work, samples)
        print(f"wrote {work / SUBSET_FILE}: {', '.join(subset.names)}")
        return EXIT_OK
    if args.command == "train":
        samples = _run_stage("train", _load_stage_samples, work)
        _run_stage("train", stage_train, cfg, work, args.model, samples, FAMILY_ROW[args.model])
        print(f"wrote model bundles under {work / 'models' / FAMILY_ROW[args.model]}")
        return EXIT_OK
    if args.command == "predict":
        samples = _run_stage("predict", _load_stage_samples, work)
        label = FAMILY_ROW[args.model]
        models = _run_stage("predict", load_models, work / "models" / label)
        _run_stage("predict", stage_predict, cfg, work, models, samples, label)
        print(f"wrote {work / f'predictions_{label}.csv'}")
        return EXIT_OK
    if args.command == "backtest":
        return _cmd_backtest(args, cfg)
    if args.command == "aggregate":
        return _cmd_aggregate(args, cfg)
    if args.command == "report":
        return _cmd_report(args, cfg)
    if args.command == "pipeline":
        bundle = run_pipeline(cfg)
        print(
            f"pipeline complete: seed={cfg.seed} config_hash={bundle['config_hash']} "
            f"out={cfg.out}"
        )
        return EXIT_OK
    raise InvalidConfig(f"unknown command {args.command!r}")


def _load_stage_samples(work: Path) -> preprocess.SampleSet:
    merged_path = work / SAMPLES_MERGED_FILE
    if merged_path.exists():
        return preprocess.load(merged_path)
    samples = preprocess.load(work / SAMPLES_FILE)
    merged = preprocess.merge_train_validation(samples)
    preprocess.save(merged, merged_path)
    return merged


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=logging.INFO, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr
    )
    try:
        return run(argv)
    except StageError as exc:
        print(f"error {exc}", file=sys.stderr)
        cause = exc.cause
        if isinstance(cause, ConfigError):
            return EXIT_CONFIG
        if isinstance(cause, NumericalError):
            return EXIT_NUMERIC
        return EXIT_DATA
    except (ConfigError, InvalidConfig) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FundrankError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
