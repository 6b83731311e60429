"""Cross-validation, hyperparameter grid search, and experiment running.

The experiment runner executes the full screening pipeline (preprocess,
rank, select, split, optionally cross-validate, train, evaluate) from a
manifest that pins every decision, then persists the manifest, ranking,
model, pipeline, and report.  Rerunning a manifest reproduces its reports
byte for byte.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, asdict
from itertools import product
from pathlib import Path

import numpy as np

from .classifiers import ModelSpec, TrainedModel, train_model
from .clustering import (
    CLUSTER_DEFAULTS,
    agglomerative,
    birch,
    gmm_em,
    kmeans,
    spectral,
    spectral_embedding,
)
from .dataset import DesignMatrix, train_test_split
from .metrics import ClusterReport, MetricsReport, ari, full_report, nmi, silhouette
from .numerics import SeededRng
from .pipeline import FrozenPipeline, build_pipeline, canonical_json, sha256_of
from .sources import dataset_provenance, load_dataset

__all__ = [
    "TABLE4_GRIDS",
    "TABLE4_OPTIMIZED",
    "FoldScores",
    "GridSearchResult",
    "ExperimentManifest",
    "ExperimentResult",
    "k_fold_indices",
    "cross_validate",
    "grid_search",
    "run_experiment",
    "run_clustering_experiment",
]

# Fixed seeds of the reproduction runs.  The source experiments never
# published theirs, so the tolerance contract is evaluated on this pinned
# set; every per-seed value is printed by the acceptance suite.
REPRO_SEEDS = (1, 2, 5, 10, 13)

# Clustering configuration of the reproduction runs (recorded in manifests).
# The library defaults keep the rbf affinity; the reproduction preset uses
# the nearest-neighbour graph, which tracks the screening structure best on
# the real adult data.
TABLE8_CLUSTERING = {
    **CLUSTER_DEFAULTS,
    "spectral_affinity": "knn_graph",
    "spectral_knn_neighbors": 15,
    "spectral_n_init": 10,
}

# Hyperparameter search spaces: one axis list per tunable parameter.
TABLE4_GRIDS: dict[str, dict[str, list]] = {
    "naive_bayes": {
        "var_smoothing": [float(v) for v in np.logspace(0, -9, num=100)],
    },
    "knn": {
        "n_neighbors": [1, 112, 223, 334, 445, 556, 667, 778, 889, 1000],
        "weights": ["uniform", "distance"],
        "algorithm": ["auto", "ball_tree", "kd_tree", "brute"],
        "leaf_size": [1, 112, 223, 334, 445, 556, 667, 778, 889, 1000],
    },
    "svm": {
        "c": [1, 3, 5, 7, 9, 11, 13, 15, 17, 20],
        "kernel": ["linear", "poly", "rbf", "sigmoid"],
        "degree": [1, 2, 3, 4, 5, 6, 7, 8, 9, 10],
    },
    "random_forest": {
        "n_estimators": [200, 400, 600, 800, 1000, 1200, 1400, 1600, 1800, 2000],
        "max_features": ["auto", "sqrt", "log2"],
        "max_depth": [10, 120, 230, 340, 450, 560, 670, 780, 890, 1000],
        "min_samples_split": [2, 5, 10, 14],
        "min_samples_leaf": [1, 2, 4, 6, 8],
        "criterion": ["entropy", "gini"],
    },
    "decision_tree": {
        "criterion": ["gini", "entropy"],
        "max_depth": [150, 155, 160],
        "min_samples_split": list(range(1, 10)),
        "min_samples_leaf": list(range(1, 5)),
    },
    "gradient_boost": {
        "max_depth": list(range(2, 10)),
        "n_estimators": list(range(60, 220, 40)),
        "learning_rate": [0.1, 0.01, 0.05],
    },
    "logistic_regression": {
        "penalty": ["l1", "l2"],
        "c": [0.001, 0.01, 0.1, 1, 10, 100, 1000],
    },
    "ann": {
        "optimizer": ["sgd", "adam", "rmsprop"],
        "batch_size": [8, 16, 32, 64],
    },
}

# Tuned points per dataset (the reproduction presets).
TABLE4_OPTIMIZED: dict[str, dict[str, dict]] = {
    "children": {
        "naive_bayes": {"var_smoothing": 0.4328},
        "knn": {"n_neighbors": 1, "weights": "uniform", "leaf_size": 445, "algorithm": "brute"},
        "svm": {"kernel": "linear", "degree": 3, "c": 13},
        "random_forest": {
            "n_estimators": 800,
            "min_samples_split": 2,
            "min_samples_leaf": 4,
            "max_features": "log2",
            "max_depth": 450,
            "criterion": "entropy",
        },
        "decision_tree": {
            "min_samples_split": 2,
            "min_samples_leaf": 1,
            "max_depth": 155,
            "criterion": "gini",
        },
        "gradient_boost": {"n_estimators": 140, "max_depth": 4, "learning_rate": 0.1},
        "logistic_regression": {"penalty": "l2", "c": 1000},
        "ann": {"optimizer": "adam", "batch_size": 32, "lr_factor": 0.8, "patience": 10},
    },
    "adult": {
        "naive_bayes": {"var_smoothing": 0.2848},
        "knn": {"n_neighbors": 1, "weights": "distance", "leaf_size": 112, "algorithm": "ball_tree"},
        "svm": {"kernel": "linear", "degree": 3, "c": 13},
        "random_forest": {
            "n_estimators": 800,
            "min_samples_split": 2,
            "min_samples_leaf": 4,
            "max_features": "log2",
            "max_depth": 450,
            "criterion": "entropy",
        },
        "decision_tree": {
            "min_samples_split": 3,
            "min_samples_leaf": 1,
            "max_depth": 150,
            "criterion": "entropy",
        },
        "gradient_boost": {"n_estimators": 140, "max_depth": 4, "learning_rate": 0.1},
        "logistic_regression": {"penalty": "l2", "c": 100},
        "ann": {"optimizer": "adam", "batch_size": 32, "lr_factor": 0.8, "patience": 10},
    },
    "combined": {
        "naive_bayes": {"var_smoothing": 0.0284},
        "knn": {"n_neighbors": 1, "weights": "distance", "leaf_size": 112, "algorithm": "ball_tree"},
        "svm": {"kernel": "linear", "degree": 3, "c": 13},
        "random_forest": {
            "n_estimators": 800,
            "min_samples_split": 5,
            "min_samples_leaf": 1,
            "max_features": "sqrt",
            "max_depth": 560,
            "criterion": "entropy",
        },
        "decision_tree": {
            "min_samples_split": 3,
            "min_samples_leaf": 3,
            "max_depth": 160,
            "criterion": "gini",
        },
        "gradient_boost": {"n_estimators": 140, "max_depth": 2, "learning_rate": 0.1},
        "logistic_regression": {"penalty": "l2", "c": 100},
        "ann": {"optimizer": "adam", "batch_size": 32, "lr_factor": 0.8, "patience": 10},
    },
}


def k_fold_indices(
    n: int, k: int, rng: SeededRng, strata: np.ndarray | None = None
) -> list[np.ndarray]:
    """Stratified partition of 0..n-1 into k folds with sizes within 1.

    Samples are dealt class by class into folds on a continuously cycling
    cursor, so both the per-class counts and the totals stay balanced.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    if k > n:
        raise ValueError("k must be <= n")
    strata = np.zeros(n, dtype=np.int64) if strata is None else np.asarray(strata)
    folds: list[list[int]] = [[] for _ in range(k)]
    cursor = 0
    for cls in np.unique(strata):
        idx = np.flatnonzero(strata == cls)
        perm = rng.shuffle(len(idx))
        for i in idx[perm]:
            folds[cursor % k].append(int(i))
            cursor += 1
    return [np.array(sorted(f), dtype=np.int64) for f in folds]


@dataclass(frozen=True)
class FoldScores:
    """Per-fold metric reports with their mean and standard deviation."""

    per_fold: tuple[MetricsReport, ...]
    mean: dict[str, float]
    std: dict[str, float]

    @property
    def k(self) -> int:
        return len(self.per_fold)

    @classmethod
    def from_reports(cls, reports: list[MetricsReport]) -> "FoldScores":
        keys = reports[0].to_dict().keys()
        mean = {}
        std = {}
        for key in keys:
            vals = np.array([r.to_dict()[key] for r in reports])
            # NaN marks a metric undefined on a fold (single-class AUC)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                mean[key] = float(np.nanmean(vals))
                std[key] = float(np.nanstd(vals))
        return cls(tuple(reports), mean, std)

    def to_dict(self) -> dict:
        return {
            "per_fold": [r.to_dict() for r in self.per_fold],
            "mean": self.mean,
            "std": self.std,
        }


def cross_validate(
    spec: ModelSpec, m: DesignMatrix, k: int, rng: SeededRng
) -> FoldScores:
    """Train on k-1 folds, score all eight metrics on the held-out fold."""
    folds = k_fold_indices(m.n_rows, k, rng.split(0), strata=m.y)
    reports = []
    for fi, test_idx in enumerate(folds):
        train_idx = np.array(
            sorted(set(range(m.n_rows)) - set(test_idx.tolist())), dtype=np.int64
        )
        try:
            model = train_model(spec, m.take_rows(train_idx), rng=rng.split(fi + 1))
            test = m.take_rows(test_idx)
            pred = model.predict(test.x)
            proba = model.predict_proba(test.x)[:, 1]
            reports.append(full_report(test.y, pred, proba))
        except Exception as e:
            raise RuntimeError(f"cross-validation failed on fold {fi}: {e}") from e
    return FoldScores.from_reports(reports)


@dataclass(frozen=True)
class GridSearchResult:
    best: dict
    best_score: float
    table: tuple[dict, ...]  # {params, mean_score, std_score, error}

    def to_dict(self) -> dict:
        return {
            "best": self.best,
            "best_score": self.best_score,
            "table": list(self.table),
        }


def _clamped(kind: str, params: dict) -> dict:
    """Repair grid points that are syntactically valid but meaningless."""
    out = dict(params)
    if kind in ("decision_tree", "random_forest"):
        if out.get("min_samples_split", 2) < 2:
            warnings.warn(
                "min_samples_split=1 is meaningless; clamping to 2",
                UserWarning,
                stacklevel=3,
            )
            out["min_samples_split"] = 2
    return out


def grid_search(
    kind: str,
    m: DesignMatrix,
    k: int,
    objective: str = "accuracy",
    rng: SeededRng | None = None,
    grid: dict[str, list] | None = None,
) -> GridSearchResult:
    """Exhaustive cross-validated search over a parameter grid.

    Points are enumerated in axis order; ties on the mean objective keep the
    earliest point.  Invalid points (for example a neighbour count larger
    than the fold) are recorded with their error and skipped.
    """
    grid = grid if grid is not None else TABLE4_GRIDS[kind]
    if not grid:
        raise ValueError("empty grid")
    rng = rng or SeededRng(0)
    axes = list(grid.keys())
    rows = []
    best = None
    for pi, combo in enumerate(product(*(grid[a] for a in axes))):
        params = _clamped(kind, dict(zip(axes, combo)))
        try:
            scores = cross_validate(ModelSpec(kind, params), m, k, rng.split(pi))
            mean = scores.mean[objective]
            std = scores.std[objective]
            rows.append(
                {"params": params, "mean_score": mean, "std_score": std, "error": None}
            )
            if best is None or mean > best[0] + 1e-12:
                best = (mean, params)
        except Exception as e:
            rows.append(
                {
                    "params": params,
                    "mean_score": None,
                    "std_score": None,
                    "error": str(e),
                }
            )
    if best is None:
        raise RuntimeError("no grid point evaluated successfully")
    return GridSearchResult(best[1], best[0], tuple(rows))


@dataclass(frozen=True)
class ExperimentManifest:
    """Everything needed to bit-reproduce one experiment."""

    dataset: str
    model: str = "logistic_regression"
    params: dict | str = field(default_factory=dict)  # dict or "table4"
    impute: str = "median"
    impute_knn_k: int = 5
    impute_drop_max: int = 3
    top_k: int = 10
    drop_leaky: bool = False
    seed: int = 1
    test_fraction: float = 0.3
    folds: int = 0  # 0 disables cross-validation
    clustering: dict = field(default_factory=lambda: dict(CLUSTER_DEFAULTS))

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return canonical_json({"format": "asdkit-manifest/1", **self.to_dict()})

    @property
    def content_hash(self) -> str:
        return sha256_of(self.to_json())

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentManifest":
        d = {k: v for k, v in d.items() if k != "format"}
        return cls(**d)


@dataclass
class ExperimentResult:
    manifest: ExperimentManifest
    report: MetricsReport
    model: TrainedModel
    pipeline: FrozenPipeline
    fold_scores: FoldScores | None
    out_dir: Path | None


def _prepare(manifest: ExperimentManifest):
    table = load_dataset(manifest.dataset)
    pipe, m = build_pipeline(
        table,
        impute_strategy=manifest.impute,
        knn_k=manifest.impute_knn_k,
        drop_max_missing=manifest.impute_drop_max,
        top_k=manifest.top_k,
        drop_leaky=manifest.drop_leaky,
    )
    return table, pipe, m


def _resolve_params(manifest: ExperimentManifest) -> dict:
    """'table4' resolves to the tuned preset; a dict passes through."""
    if manifest.params == "table4":
        preset = TABLE4_OPTIMIZED.get(manifest.dataset)
        if not preset or manifest.model not in preset:
            raise ValueError(
                f"no table4 preset for {manifest.model!r} on {manifest.dataset!r}"
            )
        return dict(preset[manifest.model])
    return dict(manifest.params)


def run_experiment(
    manifest: ExperimentManifest, out_dir: str | Path | None = None
) -> ExperimentResult:
    """Execute the full pipeline for one model and persist the artefacts."""
    try:
        return _run_experiment_inner(manifest, out_dir)
    except Exception as e:
        stage = getattr(e, "asdkit_stage", "experiment")
        raise RuntimeError(f"[{stage}] {e}") from e


def _stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except Exception as e:
        e.asdkit_stage = name
        raise


def _run_experiment_inner(manifest, out_dir) -> ExperimentResult:
    table, pipe, m = _stage("preprocess", _prepare, manifest)
    rng = SeededRng(manifest.seed)
    train, test = _stage(
        "split", train_test_split, m, manifest.test_fraction, rng.split(1)
    )
    params = _resolve_params(manifest)
    spec = ModelSpec(manifest.model, params)
    fold_scores = None
    if manifest.folds >= 2:
        fold_scores = _stage(
            "cross_validate", cross_validate, spec, train, manifest.folds, rng.split(2)
        )
    model = _stage("train", train_model, spec, train, rng.split(3))
    pred = model.predict(test.x)
    proba = model.predict_proba(test.x)[:, 1]
    report = _stage("evaluate", full_report, test.y, pred, proba)
    result = ExperimentResult(manifest, report, model, pipe, fold_scores, None)
    if out_dir is not None:
        result.out_dir = _persist(result, Path(out_dir))
    return result


def _persist(result: ExperimentResult, out_dir: Path) -> Path:
    from . import report as report_mod

    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = result.manifest
    (out_dir / "manifest.json").write_text(manifest.to_json() + "\n")
    (out_dir / "ranking.csv").write_text(result.pipeline.ranking.to_csv())
    (out_dir / "pipeline.json").write_text(result.pipeline.to_json() + "\n")
    model_doc = result.model.to_json_dict()
    model_doc["pipeline_hash"] = result.pipeline.content_hash
    model_doc["manifest_hash"] = manifest.content_hash
    model_doc["dataset"] = manifest.dataset
    (out_dir / "model.json").write_text(canonical_json(model_doc) + "\n")
    report_doc = {
        "format": "asdkit-report/1",
        "manifest_hash": manifest.content_hash,
        "dataset": manifest.dataset,
        "dataset_provenance": dataset_provenance(manifest.dataset),
        "model": manifest.model,
        "metrics": result.report.to_dict(),
        "cv": result.fold_scores.to_dict() if result.fold_scores else None,
    }
    (out_dir / "report.json").write_text(canonical_json(report_doc) + "\n")
    md = [
        f"# {manifest.model} on {manifest.dataset}",
        "",
        MetricsReport.markdown_header(),
        result.report.markdown_row(manifest.model),
        "",
        f"manifest hash: `{manifest.content_hash}`",
    ]
    (out_dir / "report.md").write_text("\n".join(md) + "\n")
    metrics = result.report.to_dict()
    csv_lines = [",".join(["model"] + list(metrics.keys()))]
    csv_lines.append(",".join([manifest.model] + [repr(v) for v in metrics.values()]))
    (out_dir / "report.csv").write_text("\n".join(csv_lines) + "\n")
    report_mod.ranking_figure(result.pipeline.ranking, out_dir / "ranking.png")
    report_mod.metrics_figure(
        {manifest.model: result.report}, out_dir / "metrics.png"
    )
    return out_dir


CLUSTER_ALGORITHMS = ("kmeans", "agglomerative", "gmm", "spectral", "birch")


def run_clustering_experiment(
    manifest: ExperimentManifest,
    out_dir: str | Path | None = None,
    algorithms: tuple[str, ...] = CLUSTER_ALGORITHMS,
) -> dict[str, ClusterReport]:
    """Five-algorithm sweep on the label-free selected matrix."""
    table, pipe, m = _stage("preprocess", _prepare, manifest)
    X = m.x.a
    truth = m.y
    cfg = dict(CLUSTER_DEFAULTS)
    cfg.update(manifest.clustering or {})
    k = int(cfg["k"])
    rng = SeededRng(manifest.seed)
    assignments = {}
    if "kmeans" in algorithms:
        assignments["kmeans"] = kmeans(
            X, k, n_init=int(cfg["kmeans_n_init"]),
            max_iter=int(cfg["kmeans_max_iter"]), rng=rng.split(11)
        )
    if "agglomerative" in algorithms:
        assignments["agglomerative"] = agglomerative(
            X, k, linkage=cfg["agglomerative_linkage"]
        )
    if "gmm" in algorithms:
        assignments["gmm"] = gmm_em(
            X, k, max_iter=int(cfg["gmm_max_iter"]), reg=float(cfg["gmm_reg"]),
            rng=rng.split(12),
        )
    if "spectral" in algorithms:
        assignments["spectral"] = spectral(
            X,
            k,
            affinity=cfg["spectral_affinity"],
            gamma=cfg.get("spectral_gamma"),
            n_neighbors=int(cfg.get("spectral_knn_neighbors", 10)),
            rng=rng.split(13),
            n_init=int(cfg.get("spectral_n_init", 10)),
        )
    if "birch" in algorithms:
        assignments["birch"] = birch(
            X, k, threshold=float(cfg["birch_threshold"]),
            branching_factor=int(cfg["birch_branching_factor"]),
        )
    reports = {}
    for name, assign in assignments.items():
        reports[name] = ClusterReport(
            nmi=nmi(truth, assign.labels),
            ari=ari(truth, assign.labels),
            silhouette=silhouette(X, assign.labels),
        )
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "manifest.json").write_text(manifest.to_json() + "\n")
        doc = {
            "format": "asdkit-cluster-report/1",
            "manifest_hash": manifest.content_hash,
            "dataset": manifest.dataset,
            "dataset_provenance": dataset_provenance(manifest.dataset),
            "reports": {k2: v.to_dict() for k2, v in reports.items()},
        }
        (out / "report.json").write_text(canonical_json(doc) + "\n")
        md = ["# clustering on " + manifest.dataset, "", ClusterReport.markdown_header()]
        csv_lines = ["algorithm,nmi,ari,silhouette"]
        for name in algorithms:
            if name in reports:
                md.append(reports[name].markdown_row(name))
                r = reports[name]
                csv_lines.append(f"{name},{r.nmi!r},{r.ari!r},{r.silhouette!r}")
                (out / f"assignments_{name}.csv").write_text(
                    assignments[name].to_csv()
                )
        (out / "report.md").write_text("\n".join(md) + "\n")
        (out / "report.csv").write_text("\n".join(csv_lines) + "\n")
        from . import report as report_mod

        report_mod.cluster_figure(reports, out / "metrics.png")
    return reports
