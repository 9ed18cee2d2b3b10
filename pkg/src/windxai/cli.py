"""Command line entry point: ``windxai <subcommand>``."""

from __future__ import annotations

import logging
import sys
import time
from collections.abc import Callable, Iterator, Sequence
from contextlib import contextmanager
from dataclasses import asdict
from pathlib import Path
from typing import Any

import click
import pandas as pd
from pydantic import ValidationError

from windxai.analysis.curves import conditional_attribution_curves, curves_frame
from windxai.analysis.faithfulness import faithfulness_frame, yaw_faithfulness
from windxai.analysis.monitoring import Monitor, monitoring_frame
from windxai.analysis.ood import ood_experiment, ood_frame
from windxai.analysis.reports import (
    ExperimentDocument,
    faithfulness_summary,
    print_faithfulness,
    print_ood,
    print_rmse_table,
    print_strategy_reports,
    rmse_frame,
    strategy_frame,
    write_document,
    write_frame,
)
from windxai.analysis.strategy import (
    StrategyReport,
    compare_with_physics,
    min_reference_attributions,
)
from windxai.attribution.reference import ReferenceBuilder, ReferenceStrategy
from windxai.attribution.shapley import attributions_frame, explain_records
from windxai.config import RunConfig, load_run_config, parse_names
from windxai.data.pipeline import (
    DataSplit,
    YawTruthSplit,
    augment_yaw,
    default_split_intervals,
    filter_operational,
    norm_filter,
    split_temporal,
    write_truth_csv,
)
from windxai.data.records import (
    BASE_FEATURES,
    FEATURE_NAMES,
    ScadaRecord,
    parse_scada_csv,
    wind_speeds,
    write_scada_csv,
)
from windxai.data.synthetic import SynthConfig, generate_synthetic
from windxai.errors import ConfigurationError, WindXaiError
from windxai.logs import setup_logging
from windxai.manifest import MANIFEST_NAME, ManifestRecorder, file_digest, text_digest
from windxai.models.mlp import MlpModel, loss_history_frame
from windxai.models.persistence import load_model, save_model
from windxai.models.predictor import evaluate_rmse
from windxai.models.training import TrainedModel, resolve_preset, train_model
from windxai.physics.iec import IecConfig, fit_binned_curve, fit_iec_model

logger = logging.getLogger(__name__)


def run_options(function: Callable[..., Any]) -> Callable[..., Any]:
    """Options shared by every subcommand that trains or explains models."""
    options = [
        click.option(
            "--config",
            "config_path",
            type=click.Path(exists=True, dir_okay=False, path_type=Path),
            help="JSON configuration; explicit flags override its values",
        ),
        click.option(
            "--data",
            type=click.Path(dir_okay=False, path_type=Path),
            help="SCADA CSV file",
        ),
        click.option(
            "--synth-n",
            type=click.INT,
            help="Generate this many synthetic records instead of reading a file",
        ),
        click.option("--synth-seed", type=click.INT, help="Seed of the generator"),
        click.option(
            "--ti-derate",
            type=click.FLOAT,
            help="Turbulence derating of the synthetic turbine",
        ),
        click.option(
            "-o",
            "--out-dir",
            type=click.Path(file_okay=False, path_type=Path),
            help="Output directory",
        ),
        click.option("--seed", type=click.INT, help="Base seed"),
        click.option("--n-seeds", type=click.INT, help="Number of consecutive seeds"),
        click.option("--models", help="Comma-separated: iec, rf, ann_small, ann_large"),
        click.option("--features", help="Comma-separated model inputs"),
        click.option("--val-fraction", type=click.FLOAT),
        click.option("--train-start", help="ISO-8601 start of the training period"),
        click.option("--train-end"),
        click.option("--test-start"),
        click.option("--test-end"),
    ]
    for option in reversed(options):
        function = option(function)
    return function


def _resolve_config(command: str, options: dict[str, Any]) -> RunConfig:
    """Turn subcommand flags into overrides of the (optional) config file."""
    generator = {
        "n_samples": options.pop("synth_n"),
        "seed": options.pop("synth_seed"),
        "ti_derate": options.pop("ti_derate"),
    }
    synth = {key: value for key, value in generator.items() if value is not None}
    overrides: dict[str, Any] = {
        "command": command,
        "data": {"csv": options.pop("data"), "synth": synth or None},
        "output_dir": options.pop("out_dir"),
        "seed": options.pop("seed"),
        "n_seeds": options.pop("n_seeds"),
        "models": parse_names(options.pop("models")),
        "features": parse_names(options.pop("features")),
        "split": {
            "val_fraction": options.pop("val_fraction"),
            "train_start": options.pop("train_start"),
            "train_end": options.pop("train_end"),
            "test_start": options.pop("test_start"),
            "test_end": options.pop("test_end"),
        },
    }
    config_path = options.pop("config_path")
    overrides.update(options)
    config = load_run_config(config_path, overrides)
    logger.debug("Resolved configuration: %s", config.model_dump_json())
    return config


@contextmanager
def _run(config: RunConfig) -> Iterator[ManifestRecorder]:
    """Own the output directory and write the manifest on success."""
    out = config.output_dir
    out.mkdir(parents=True, exist_ok=True)
    recorder = ManifestRecorder(
        command=config.command,
        config=config.model_dump(mode="json"),
        root=out,
    )
    yield recorder
    recorder.write(out / MANIFEST_NAME)


def _load_records(config: RunConfig, recorder: ManifestRecorder) -> list[ScadaRecord]:
    started = time.perf_counter()
    source = config.data
    if source.csv is not None:
        records = parse_scada_csv(source.csv, source.column_map).records
        recorder.input_digest = file_digest(source.csv)
    else:
        assert source.synth is not None
        records, _ = generate_synthetic(source.synth)
        recorder.input_digest = text_digest(source.synth.model_dump_json())
    operational = filter_operational(records)
    logger.info("%d of %d records are operational", len(operational), len(records))
    recorder.time("load", started)
    return operational


def _split(config: RunConfig, records: Sequence[ScadaRecord]) -> DataSplit:
    intervals = config.split.intervals() or default_split_intervals(records)
    return split_temporal(
        records,
        *intervals,
        val_fraction=config.split.val_fraction,
        seed=config.seed,
    )


def _augment(
    config: RunConfig,
    split: DataSplit,
    features: Sequence[str],
) -> tuple[DataSplit, YawTruthSplit | None]:
    if "delta_yaw" not in features or not config.augment_yaw:
        return split, None
    return augment_yaw(
        split,
        sigma_deg=config.yaw_sigma_deg,
        clip_deg=config.yaw_clip_deg,
        v_rated=config.v_rated,
        seed=config.seed,
    )


def _train_runs(
    config: RunConfig,
    split: DataSplit,
) -> Iterator[tuple[str, int, TrainedModel]]:
    """Train every configured model once per seed (the IEC fit only once)."""
    seeds = config.resolved_seeds
    for name in config.models:
        spec = resolve_preset(name, config.features)
        for seed in seeds[:1] if isinstance(spec, IecConfig) else seeds:
            yield name, seed, train_model(spec, split.train, split.val, seed)


def _document(config: RunConfig, metrics: dict[str, Any]) -> ExperimentDocument:
    return ExperimentDocument(
        command=config.command,
        config=config.model_dump(mode="json"),
        seeds=config.resolved_seeds,
        metrics=metrics,
    )


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log debug messages")
@click.version_option(package_name="windxai")
def cli(verbose: bool) -> None:
    """Wind turbine power curve models and their Shapley explanations."""
    setup_logging(verbose)


@cli.command()
@click.option("-n", "--n", "n_samples", type=click.INT, help="Number of records")
@click.option("--seed", type=click.INT, help="Generator seed")
@click.option("--ti-derate", type=click.FLOAT, help="Turbulence derating")
@click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="JSON generator configuration; explicit flags override it",
)
@click.option(
    "-o",
    "--out",
    required=True,
    type=click.Path(dir_okay=False, path_type=Path),
    help="Output CSV file",
)
def synth(
    n_samples: int | None,
    seed: int | None,
    ti_derate: float | None,
    config_path: Path | None,
    out: Path,
) -> None:
    """Generate a synthetic SCADA data set with known latent power."""
    document: dict[str, Any] = {}
    if config_path is not None:
        document = SynthConfig.model_validate_json(
            config_path.read_text(encoding="utf-8"),
        ).model_dump()
    flags = {"n_samples": n_samples, "seed": seed, "ti_derate": ti_derate}
    given = {key: value for key, value in flags.items() if value is not None}
    config = SynthConfig.model_validate({**document, **given})

    recorder = ManifestRecorder(
        command="synth",
        config=config.model_dump(mode="json"),
        root=out.parent,
    )
    records, _ = generate_synthetic(config)
    recorder.add(write_scada_csv(records, out))
    recorder.write(out.with_name(out.name + ".manifest.json"))
    click.echo(click.style(f"Written {len(records)} records to {out}", fg="green"))


@cli.command()
@run_options
def train(**options: Any) -> None:
    """Train models and save them with their loss histories."""
    config = _resolve_config("train", options)
    with _run(config) as recorder:
        split = _split(config, _load_records(config, recorder))
        split, _ = _augment(config, split, config.features or BASE_FEATURES)
        models_dir = config.output_dir / "models"
        started = time.perf_counter()
        for name, seed, model in _train_runs(config, split):
            stem = name if model.kind == "iec" else f"{name}_seed{seed}"
            recorder.add(save_model(model, models_dir / f"{stem}.json"))
            if isinstance(model, MlpModel):
                recorder.add(
                    write_frame(
                        loss_history_frame(model),
                        models_dir / f"{stem}_loss.csv",
                    ),
                )
        recorder.time("train", started)
    click.echo(click.style(f"Models written to {models_dir}", fg="green"))


@cli.command()
@run_options
@click.option(
    "--model-dir",
    type=click.Path(exists=True, file_okay=False, path_type=Path),
    help="Evaluate saved models instead of training",
)
def evaluate(model_dir: Path | None, **options: Any) -> None:
    """Test RMSE of every model (mean and spread over seeds)."""
    config = _resolve_config("evaluate", options)
    with _run(config) as recorder:
        split = _split(config, _load_records(config, recorder))
        split, _ = _augment(config, split, config.features or BASE_FEATURES)
        rmse: dict[str, list[float]] = {}
        if model_dir is not None:
            for path in sorted(model_dir.glob("*.json")):
                name = path.stem.split("_seed")[0]
                rmse.setdefault(name, []).append(
                    evaluate_rmse(load_model(path), split.test),
                )
        else:
            for name, _, model in _train_runs(config, split):
                rmse.setdefault(name, []).append(evaluate_rmse(model, split.test))
        if not rmse:
            raise ConfigurationError("No models to evaluate")

        recorder.add(write_frame(rmse_frame(rmse), config.output_dir / "rmse.csv"))
        recorder.add(
            write_document(
                _document(config, {"rmse_test": rmse}),
                config.output_dir / "experiment.json",
            ),
        )
    print_rmse_table(rmse)


@cli.command()
@run_options
@click.option("--model", "model_name", default="ann_small", show_default=True)
@click.option(
    "--reference",
    type=click.Choice([strategy.value for strategy in ReferenceStrategy]),
    help="Reference point strategy",
)
@click.option(
    "--monitor",
    is_flag=True,
    help="Also decompose deviations from the expected output",
)
def explain(
    model_name: str,
    reference: str | None,
    monitor: bool,
    **options: Any,
) -> None:
    """Shapley attributions of the test set under one reference strategy."""
    options["reference"] = reference
    config = _resolve_config("explain", options)
    features = config.features or (FEATURE_NAMES if monitor else BASE_FEATURES)
    if monitor and "delta_yaw" not in features:
        raise ConfigurationError(
            f"Monitoring requires the feature delta_yaw, missing from {features}",
        )

    with _run(config) as recorder:
        split = _split(config, _load_records(config, recorder))
        split, _ = _augment(config, split, features)
        spec = resolve_preset(model_name, features)
        model = train_model(spec, split.train, split.val, config.seed)

        builder = ReferenceBuilder(split.train, model.feature_schema.names)
        attributions = explain_records(model, split.test, builder, config.reference)
        recorder.add(
            write_frame(
                attributions_frame(attributions, split.test),
                config.output_dir / "attributions.csv",
            ),
        )
        if monitor:
            reports = Monitor(model, split.train).decompose(split.test)
            recorder.add(
                write_frame(
                    monitoring_frame(reports),
                    config.output_dir / "monitoring.csv",
                ),
            )
    click.echo(
        click.style(
            f"Explained {len(attributions)} test records ({config.reference})",
            fg="green",
        ),
    )


@cli.command(name="compare-strategy")
@run_options
def compare_strategy(**options: Any) -> None:
    """Agreement of ML attributions with the physics baseline (r²_phys)."""
    config = _resolve_config("compare-strategy", options)
    with _run(config) as recorder:
        split = _split(config, _load_records(config, recorder))
        physics = fit_iec_model(split.train)
        physics_attrs = min_reference_attributions(physics, split.train, split.test)
        v_test = wind_speeds(split.test)

        curves = {
            "iec": conditional_attribution_curves(
                physics_attrs,
                v_test,
                bin_width=config.curve_bin_width,
            ),
        }
        reports: dict[str, list[StrategyReport]] = {}
        rows = []
        for name in config.models:
            if name == "iec":
                continue
            spec = resolve_preset(name, config.features)
            for seed in config.resolved_seeds:
                model = train_model(spec, split.train, split.val, seed)
                report = compare_with_physics(
                    model,
                    physics,
                    split.train,
                    split.test,
                    physics_attrs=physics_attrs,
                )
                reports.setdefault(name, []).append(report)
                for row in strategy_frame(report).itertuples(index=False):
                    rows.append({"model": name, "seed": seed, **row._asdict()})
                if name not in curves:
                    curves[name] = conditional_attribution_curves(
                        min_reference_attributions(model, split.train, split.test),
                        v_test,
                        bin_width=config.curve_bin_width,
                    )
        if not reports:
            raise ConfigurationError("compare-strategy needs at least one ML model")

        recorder.add(
            write_frame(
                pd.DataFrame(rows, columns=["model", "seed", "feature", "r2"]),
                config.output_dir / "strategy.csv",
            ),
        )
        tidy = pd.concat(
            [
                curves_frame(model_curves).assign(model=name)
                for name, model_curves in curves.items()
            ],
            ignore_index=True,
        )
        recorder.add(write_frame(tidy, config.output_dir / "curves.csv"))
        metrics = {
            name: [report.r2 | {"r2_phys": report.r2_phys} for report in runs]
            for name, runs in reports.items()
        }
        recorder.add(
            write_document(
                _document(config, {"strategy": metrics}),
                config.output_dir / "experiment.json",
            ),
        )
    print_strategy_reports(reports)


@cli.command()
@run_options
@click.option("--model", "model_name", default="ann_small", show_default=True)
@click.option("--augment/--no-augment", "augment", default=None)
@click.option("--bin-kw", type=click.FLOAT, help="Width of the true-loss bins")
def monitor(
    model_name: str,
    augment: bool | None,
    bin_kw: float | None,
    **options: Any,
) -> None:
    """Explain deviations from the expected output and rate faithfulness."""
    options["augment_yaw"] = augment
    options["bin_kw"] = bin_kw
    config = _resolve_config("monitor", options)
    features = config.features or FEATURE_NAMES
    if "delta_yaw" not in features:
        raise ConfigurationError(
            f"Monitoring requires the feature delta_yaw, missing from {features}",
        )

    with _run(config) as recorder:
        split = _split(config, _load_records(config, recorder))
        split, truth = _augment(config, split, features)
        model = train_model(
            resolve_preset(model_name, features),
            split.train,
            split.val,
            config.seed,
        )
        reports = Monitor(model, split.train).decompose(split.test)
        recorder.add(
            write_frame(
                monitoring_frame(reports),
                config.output_dir / "monitoring.csv",
            ),
        )

        faithfulness = []
        if truth is not None:
            recorder.add(write_truth_csv(truth.test, config.output_dir / "truth.csv"))
            builder = ReferenceBuilder(split.train, model.feature_schema.names)
            for strategy in ReferenceStrategy:
                attributions = explain_records(model, split.test, builder, strategy)
                faithfulness.append(
                    yaw_faithfulness(truth.test, attributions, bin_kw=config.bin_kw),
                )
            recorder.add(
                write_frame(
                    faithfulness_frame(faithfulness),
                    config.output_dir / "faithfulness.csv",
                ),
            )
            recorder.add(
                write_frame(
                    faithfulness_summary(faithfulness),
                    config.output_dir / "faithfulness_summary.csv",
                ),
            )
        recorder.add(
            write_document(
                _document(
                    config,
                    {
                        "low_confidence": sum(r.low_confidence for r in reports),
                        "faithfulness": {
                            report.strategy: {
                                "mae": report.mae,
                                "mae_residual": report.mae_residual,
                            }
                            for report in faithfulness
                        },
                    },
                ),
                config.output_dir / "experiment.json",
            ),
        )
    if faithfulness:
        print_faithfulness(faithfulness)


@cli.command()
@run_options
@click.option("--threshold", type=click.FLOAT, help="Norm filter threshold in kW")
def ood(threshold: float | None, **options: Any) -> None:
    """Error on points the norm filter removes versus points it keeps."""
    options["norm_threshold_kw"] = threshold
    config = _resolve_config("ood", options)
    with _run(config) as recorder:
        split = _split(config, _load_records(config, recorder))
        reference_curve = fit_binned_curve(split.train)
        kept = {
            name: norm_filter(part, reference_curve, config.norm_threshold_kw)
            for name, part in (
                ("train", split.train),
                ("val", split.val),
                ("test", split.test),
            )
        }
        physics = fit_iec_model(kept["train"].kept)
        specs = {name: resolve_preset(name, config.features) for name in config.models}
        report = ood_experiment(
            specs,
            kept["train"].kept,
            kept["val"].kept,
            kept["test"].kept,
            kept["test"].removed,
            config.resolved_seeds,
            physics=physics,
        )
        recorder.add(write_frame(ood_frame(report), config.output_dir / "ood.csv"))
        recorder.add(
            write_document(
                _document(
                    config,
                    {
                        "n_kept_test": report.n_kept_test,
                        "n_removed_test": report.n_removed_test,
                        "runs": [asdict(row) for row in report.rows],
                    },
                ),
                config.output_dir / "experiment.json",
            ),
        )
    print_ood(report)


def run_cli(argv: Sequence[str] | None = None) -> int:
    """Run the command line and return its exit code.

    0 on success, 1 on usage or configuration errors, 2 on data errors and
    3 on numerical failures.
    """
    try:
        result = cli.main(
            args=list(argv) if argv is not None else None,
            prog_name="windxai",
            standalone_mode=False,
        )
    except click.exceptions.Abort:
        click.echo(click.style("Aborted", fg="red"), err=True)
        return 1
    except click.ClickException as e:
        e.show()
        return 1
    except WindXaiError as e:
        click.echo(click.style(f"Error: {e}", fg="red"), err=True)
        return e.exit_code
    except ValidationError as e:
        click.echo(click.style(f"Invalid configuration: {e}", fg="red"), err=True)
        return 1
    return result if isinstance(result, int) else 0


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
