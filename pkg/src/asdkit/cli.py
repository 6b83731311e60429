"""Command-line entry point for the screening toolkit.

Thin validated wrappers over the evaluation and service modules: inspect a
dataset, train/evaluate one model, run the clustering sweep, grid-search a
model's hyperparameters, and launch the screening service.  Every command
that executes a manifest prints the manifest hash it ran.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import evaluation
from .dataset import count_missing
from .evaluation import (
    ExperimentManifest,
    grid_search,
    run_clustering_experiment,
    run_experiment,
)
from .pipeline import build_pipeline
from .sources import load_dataset

_DATASET_HELP = "children | adult | combined | path to an ARFF file"


def _load_params(params: str, dataset: str, model: str) -> dict:
    if params == "table4":
        preset = evaluation.TABLE4_OPTIMIZED.get(dataset, {})
        if model not in preset:
            raise click.UsageError(
                f"no table4 preset for model {model!r} on dataset {dataset!r}"
            )
        return dict(preset[model])
    path = Path(params)
    if not path.is_file():
        raise click.UsageError(f"params file {params!r} not found")
    return json.loads(path.read_text())


@click.group()
def main():
    """From-scratch ML toolkit and screening service for ASD screening data."""


@main.command()
@click.argument("dataset")
def inspect(dataset):
    """Print rows, attributes, class counts, and missing counts."""
    try:
        table = load_dataset(dataset)
    except (OSError, ValueError) as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(1)
    missing = count_missing(table)
    classes = table.class_counts()
    click.echo(f"rows: {table.n_rows}")
    click.echo(f"attributes: {len(table.schema.attributes)}")
    click.echo(
        "classes: "
        + ", ".join(f"{k}={v}" for k, v in sorted(classes.items(), reverse=True))
    )
    click.echo(f"missing total: {missing['total']}")
    for name, cnt in missing.items():
        if name != "total" and cnt:
            click.echo(f"  {name}: {cnt}")


_shared = [
    click.option("--dataset", default="children", show_default=True, help=_DATASET_HELP),
    click.option("--impute", default="median", show_default=True,
                 type=click.Choice(["median", "knn", "drop_rows"])),
    click.option("--top-k", default=10, show_default=True, type=int),
    click.option("--seed", default=1, show_default=True, type=int),
    click.option("--test-fraction", default=0.3, show_default=True, type=float),
    click.option("--drop-leaky", is_flag=True, help="remove the AQ-10 sum feature"),
    click.option("--json", "as_json", is_flag=True, help="machine-readable output"),
    click.option("--out", default=None, help="artifact directory"),
]


def shared_options(fn):
    for opt in reversed(_shared):
        fn = opt(fn)
    return fn


@main.command()
@shared_options
@click.option("--model", default="logistic_regression", show_default=True,
              type=click.Choice(list(evaluation.TABLE4_GRIDS.keys())))
@click.option("--params", default="table4", show_default=True,
              help="'table4' or a JSON file of parameters")
@click.option("--folds", default=0, show_default=True, type=int,
              help="cross-validation folds on the training split (0 = off)")
def train(dataset, model, params, impute, top_k, seed, folds, test_fraction,
          drop_leaky, as_json, out):
    """Run the full pipeline for one model and report test metrics."""
    resolved = "table4" if params == "table4" else _load_params(params, dataset, model)
    manifest = ExperimentManifest(
        dataset=dataset,
        model=model,
        params=resolved,
        impute=impute,
        top_k=top_k,
        seed=seed,
        folds=folds,
        test_fraction=test_fraction,
        drop_leaky=drop_leaky,
    )
    result = run_experiment(manifest, out_dir=out)
    click.echo(f"manifest: {manifest.content_hash}", err=True)
    if as_json:
        click.echo(json.dumps({
            "manifest_hash": manifest.content_hash,
            "metrics": result.report.to_dict(),
            "cv": result.fold_scores.to_dict() if result.fold_scores else None,
        }, sort_keys=True))
    else:
        from .metrics import MetricsReport

        click.echo(MetricsReport.markdown_header())
        click.echo(result.report.markdown_row(model))
        if out:
            click.echo(f"artifacts: {out}", err=True)


@main.command()
@shared_options
@click.option("--model-dir", required=True, help="artifact directory of a trained model")
def evaluate(dataset, impute, top_k, seed, test_fraction, drop_leaky, as_json,
             out, model_dir):
    """Score a persisted model on a dataset using its frozen pipeline."""
    from .classifiers import model_from_json_dict
    from .metrics import full_report
    from .pipeline import FrozenPipeline

    d = Path(model_dir)
    model = model_from_json_dict(json.loads((d / "model.json").read_text()))
    pipe = FrozenPipeline.from_dict(json.loads((d / "pipeline.json").read_text()))
    table = load_dataset(dataset)
    m = pipe.transform_table(table, on_unseen="zeros")
    rep = full_report(m.y, model.predict(m.x), model.predict_proba(m.x)[:, 1])
    if as_json:
        click.echo(json.dumps(rep.to_dict(), sort_keys=True))
    else:
        from .metrics import MetricsReport

        click.echo(MetricsReport.markdown_header())
        click.echo(rep.markdown_row(Path(model_dir).name))


@main.command()
@shared_options
@click.option("--k", default=2, show_default=True, type=int)
@click.option("--affinity", default="rbf", show_default=True,
              type=click.Choice(["rbf", "knn_graph"]))
@click.option("--knn-neighbors", default=10, show_default=True, type=int)
def cluster(dataset, impute, top_k, seed, test_fraction, drop_leaky, as_json,
            out, k, affinity, knn_neighbors):
    """Run the five-algorithm clustering sweep (labels withheld)."""
    manifest = ExperimentManifest(
        dataset=dataset, impute=impute, top_k=top_k, seed=seed,
        drop_leaky=drop_leaky,
        clustering={
            **evaluation.CLUSTER_DEFAULTS,
            "k": k,
            "spectral_affinity": affinity,
            "spectral_knn_neighbors": knn_neighbors,
        },
    )
    reports = run_clustering_experiment(manifest, out_dir=out)
    click.echo(f"manifest: {manifest.content_hash}", err=True)
    if as_json:
        click.echo(json.dumps(
            {name: r.to_dict() for name, r in reports.items()}, sort_keys=True
        ))
    else:
        from .metrics import ClusterReport

        click.echo(ClusterReport.markdown_header())
        for name, r in reports.items():
            click.echo(r.markdown_row(name))


@main.command()
@shared_options
@click.option("--model", default="logistic_regression", show_default=True,
              type=click.Choice(list(evaluation.TABLE4_GRIDS.keys())))
@click.option("--folds", default=5, show_default=True, type=int)
@click.option("--objective", default="accuracy", show_default=True)
def gridsearch(dataset, model, impute, top_k, seed, folds, test_fraction,
               drop_leaky, as_json, out, objective):
    """Exhaustive cross-validated search over the model's parameter grid."""
    from .dataset import train_test_split
    from .numerics import SeededRng

    table = load_dataset(dataset)
    pipe, m = build_pipeline(table, impute_strategy=impute, top_k=top_k,
                             drop_leaky=drop_leaky)
    rng = SeededRng(seed)
    train_m, _ = train_test_split(m, test_fraction, rng.split(1))
    result = grid_search(model, train_m, folds, objective=objective, rng=rng.split(2))
    payload = {"best": result.best, "best_score": result.best_score}
    if as_json:
        payload["table"] = list(result.table)
        click.echo(json.dumps(payload, sort_keys=True))
    else:
        click.echo(f"best params: {json.dumps(result.best, sort_keys=True)}")
        click.echo(f"mean CV {objective}: {result.best_score:.4f}")
    if out:
        Path(out).mkdir(parents=True, exist_ok=True)
        (Path(out) / "gridsearch.json").write_text(
            json.dumps({**payload, "table": list(result.table)}, sort_keys=True,
                       default=str) + "\n"
        )


@main.command()
@click.option("--model-dir", "model_dirs", multiple=True, required=True,
              help="artifact directory to serve (repeatable)")
@click.option("--default-model", default=None, help="model_id served by default")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
def serve(model_dirs, default_model, host, port):
    """Launch the screening service over trained model artifacts."""
    import uvicorn

    from .service import create_app

    app = create_app([Path(d) for d in model_dirs], default_model=default_model)
    uvicorn.run(app, host=host, port=port)


@main.command("make-artifacts")
@click.option("--out", default="artifacts", show_default=True)
@click.option("--dataset", default="combined", show_default=True)
@click.option("--model", default="ann", show_default=True)
@click.option("--seed", default=1, show_default=True, type=int)
def make_artifacts(out, dataset, model, seed):
    """Train the default served model and persist its artifact directory."""
    manifest = ExperimentManifest(dataset=dataset, model=model, params="table4", seed=seed)
    out_dir = Path(out) / f"{dataset}-{model}"
    run_experiment(manifest, out_dir=out_dir)
    click.echo(f"manifest: {manifest.content_hash}", err=True)
    click.echo(str(out_dir))


if __name__ == "__main__":
    main()
