"""``tmids`` command line: prepare -> train -> evaluate / cv -> predict / explain / bench.

Exit codes: 0 success, 2 usage error, 3 data error, 4 internal fault.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import shutil
import sys
import tempfile
from pathlib import Path

import click
import numpy as np

from . import explain as ex
from .baseline import MajorityClassifier
from .binarizer import QuantileBinarizer
from .config import RunConfig
from .exceptions import DataError, UsageError
from .ingest import (
    assemble_scenario,
    discover_files,
    encode_labels,
    get_scenario,
    load_manifest,
    read_features,
)
from .metrics import evaluate as evaluate_preds
from .metrics import kfold_cv, measure_latency
from .persist import ModelBundle, load_model, save_model
from .pipeline import TsetlinIDS
from .preprocess import (
    FlowTable,
    apply_standardizer,
    clean,
    fit_standardizer,
    smote,
    standardizer_from_dict,
    standardizer_to_dict,
)
from .tsetlin import TsetlinMachineClassifier

log = logging.getLogger("tmids")

EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 2, 3, 4


# -- helpers -----------------------------------------------------------------


def _config(ctx_obj, **overrides) -> RunConfig:
    cfg = ctx_obj.get("config") or RunConfig()
    cfg = cfg.with_overrides(**overrides).resolved()
    _set_threads(cfg.threads)
    return cfg


def _set_threads(n):
    import numba

    numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))


class _Staging:
    """Write into a temporary directory and move files into place only on success."""

    def __init__(self, target):
        self.target = Path(target)

    def __enter__(self):
        self.target.parent.mkdir(parents=True, exist_ok=True)
        self.tmp = Path(tempfile.mkdtemp(prefix=f".{self.target.name}.", dir=self.target.parent))
        return self.tmp

    def __exit__(self, exc_type, exc, tb):
        if exc_type is not None:
            shutil.rmtree(self.tmp, ignore_errors=True)
            return False
        self.target.mkdir(parents=True, exist_ok=True)
        for p in sorted(self.tmp.iterdir()):
            os.replace(p, self.target / p.name)
        self.tmp.rmdir()
        return False


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_json(path, data):
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _prepared(cfg):
    d = Path(cfg.output_dir) / "prepared"
    needed = ["train.csv", "test.csv", "train_balanced.csv", "standardizer.json", "binarizer.json", "scenario.json"]
    missing = [n for n in needed if not (d / n).exists()]
    if missing:
        raise UsageError(f"{d}: prepared artifacts missing ({', '.join(missing)}); run `tmids prepare` first")
    return d


def _scenario_files(cfg, spec):
    if cfg.train_files or cfg.test_files:
        if spec.sources:
            raise UsageError("explicit train_files/test_files are not supported for intersection scenarios; use data_root")
        files = {"train": [Path(p) for p in cfg.train_files], "test": [Path(p) for p in cfg.test_files]}
        groups = [files]
    elif cfg.data_root:
        root = Path(cfg.data_root)
        if not root.is_dir():
            raise DataError(f"data_root {root} is not a directory")
        files = discover_files(spec, root)
        groups = list(files.values()) if spec.sources else [files]
    else:
        raise UsageError("set data_root or train_files/test_files")
    for g in groups:
        for split in ("train", "test"):
            if not g.get(split):
                raise DataError(f"scenario {spec.id}: no {split} files found")
            for p in g[split]:
                if not Path(p).exists():
                    raise DataError(f"input file not found: {p}")
    return files


def _load_bundle(path) -> ModelBundle:
    bundle = load_model(path)
    if bundle.binarizer is None or bundle.scaler is None:
        raise DataError(f"{path}: model file has no embedded preprocessing")
    return bundle


def _features_for(bundle, path):
    names = list(bundle.binarizer.feature_names_in_)
    try:
        values, labels = read_features(path, names)
    except DataError as exc:
        raise DataError(
            f"{exc} (model is scenario {bundle.scenario} with {len(names)} features)"
        ) from None
    if not np.isfinite(values).all():
        bad = int((~np.isfinite(values).all(axis=1)).sum())
        raise DataError(f"{path}: {bad} rows have missing or non-numeric values; clean them first")
    return values, labels


def _bits(bundle, values):
    return bundle.binarizer.transform(bundle.scaler.transform(values))


# -- commands ----------------------------------------------------------------


@click.group()
@click.option("--config", "config_path", type=click.Path(dir_okay=False), help="YAML run config.")
@click.option("-v", "--verbose", count=True)
@click.pass_context
def cli(ctx, config_path, verbose):
    """Tsetlin Machine intrusion detection for IoMT flow features."""
    logging.basicConfig(level=logging.WARNING - 10 * verbose, format="%(levelname)s %(name)s: %(message)s")
    ctx.ensure_object(dict)
    if config_path:
        if not Path(config_path).exists():
            raise UsageError(f"config file not found: {config_path}")
        ctx.obj["config"] = RunConfig.from_yaml(config_path)


def common_options(f):
    opts = [
        click.option("--scenario", type=click.Choice(["S1", "S2", "S3"])),
        click.option("--data-root", type=str),
        click.option("--output-dir", "-o", type=str),
        click.option("--seed", type=int),
        click.option("--threads", type=int),
    ]
    for opt in reversed(opts):
        f = opt(f)
    return f


def hyper_options(f):
    opts = [
        click.option("--clauses", type=int),
        click.option("--T", "T", type=int),
        click.option("--s", "s", type=float),
        click.option("--epochs", type=int),
        click.option("--n-bins", type=int),
        click.option("--states-per-action", type=int),
        click.option("--clause-budget", type=click.Choice(["per_class", "total"])),
        click.option("--smote-k", type=int),
        click.option("--subsample", type=float),
        click.option("--average", type=click.Choice(["macro", "weighted"])),
        click.option("--folds", type=int),
    ]
    for opt in reversed(opts):
        f = opt(f)
    return f


@cli.command()
@common_options
@hyper_options
@click.option("--train-file", "train_files", multiple=True)
@click.option("--test-file", "test_files", multiple=True)
@click.pass_obj
def prepare(obj, train_files, test_files, **kw):
    """Load, subsample, clean, standardize, SMOTE and fit the binarizer."""
    cfg = _config(obj, train_files=list(train_files) or None, test_files=list(test_files) or None, **kw)
    manifest = load_manifest()
    spec = get_scenario(cfg.scenario, manifest)
    files = _scenario_files(cfg, spec)

    train_raw, test_raw, class_map = assemble_scenario(spec, files, cfg.subsample, cfg.seed, manifest)
    train = clean(train_raw)
    test = clean(test_raw)
    absent = [c for c in spec.classes if c not in set(train.labels)]
    if absent:
        raise DataError(f"training data has no rows for classes {absent}")
    scaler = fit_standardizer(train)
    if cfg.smote:
        balanced = smote(apply_standardizer(scaler, train), cfg.smote_k, np.random.default_rng([cfg.seed, 1]))
    else:
        balanced = apply_standardizer(scaler, train)
    binarizer = QuantileBinarizer(cfg.n_bins).fit(balanced.values, feature_names=list(spec.features))

    out = Path(cfg.output_dir) / "prepared"
    with _Staging(out) as tmp:
        train.to_csv(tmp / "train.csv")
        test.to_csv(tmp / "test.csv")
        balanced.to_csv(tmp / "train_balanced.csv")
        _write_json(tmp / "standardizer.json", standardizer_to_dict(scaler))
        (tmp / "binarizer.json").write_text(binarizer.to_json() + "\n")
        _write_json(tmp / "scenario.json", {
            "scenario": spec.id,
            "features": list(spec.features),
            "classes": list(spec.classes),
            "positive_class": spec.positive_class,
        })
        bal_counts = balanced.class_counts()
        rows = []
        for c in spec.classes:
            rows.append([
                c,
                train_raw.stats["counts"].get(c, 0),
                int((train.labels == c).sum()),
                bal_counts.get(c, 0),
                test_raw.stats["counts"].get(c, 0),
                int((test.labels == c).sum()),
            ])
        _write_csv(tmp / "class_distribution.csv",
                   ["class", "train_loaded", "train_clean", "train_balanced", "test_loaded", "test_clean"], rows)
        _write_json(tmp / "prepare_report.json", {
            "config": cfg.__dict__,
            "clean_train": train.stats,
            "clean_test": test.stats,
            "n_features": spec.n_features,
        })
        (tmp / "config.yaml").write_text(cfg.to_yaml())
    click.echo(f"prepared {len(train)} train / {len(test)} test rows -> {out}")


@cli.command()
@common_options
@hyper_options
@click.option("--no-val", is_flag=True, help="Skip per-epoch test accuracy tracking.")
@click.pass_obj
def train(obj, no_val, **kw):
    """Train the TM on prepared data and write model.tmm + trace.csv."""
    cfg = _config(obj, **kw)
    prep = _prepared(cfg)
    meta = json.loads((prep / "scenario.json").read_text())
    class_map = {c: i for i, c in enumerate(meta["classes"])}
    scaler = standardizer_from_dict(json.loads((prep / "standardizer.json").read_text()))
    binarizer = QuantileBinarizer.from_json((prep / "binarizer.json").read_text())
    balanced = FlowTable.read_csv(prep / "train_balanced.csv", scenario=meta["scenario"])
    X = binarizer.transform(balanced.values)
    y = encode_labels(balanced, class_map)
    tm = TsetlinMachineClassifier(n_classes=len(class_map), **cfg.tm_params())
    val = {}
    if not no_val:
        test = FlowTable.read_csv(prep / "test.csv")
        val = {"X_val": binarizer.transform(scaler.transform(test.values)), "y_val": encode_labels(test, class_map)}
    tm.fit(X, y, feature_names=list(binarizer.get_feature_names_out()), **val)

    bundle = ModelBundle(
        tm=tm, binarizer=binarizer, scaler=scaler, class_names=meta["classes"], scenario=meta["scenario"],
        meta={"positive_class": meta.get("positive_class"), "n_train": int(len(X))},
    )
    out = Path(cfg.output_dir)
    with _Staging(out) as tmp:
        save_model(tmp / "model.tmm", bundle)
        keys = ["epoch", "train_accuracy"] + (["val_accuracy"] if val else [])
        _write_csv(tmp / "trace.csv", keys, [[row[k] for k in keys] for row in tm.trace_])
    click.echo(f"trained {meta['scenario']} TM ({cfg.epochs} epochs) -> {out / 'model.tmm'}")


def _report_files(tmp, report, class_names, model_name):
    (tmp / "report.json").write_text(report.to_json() + "\n")
    _write_csv(tmp / "confusion_matrix.csv", ["true\\pred"] + list(class_names),
               [[class_names[i]] + row for i, row in enumerate(report.confusion_matrix)])
    row = report.table_row(model_name)
    _write_csv(tmp / "metrics.csv", list(row), [list(row.values())])


@cli.command()
@common_options
@click.option("--model", "model_kind", type=click.Choice(["tm", "majority"]), default="tm")
@click.option("--model-file", type=click.Path(dir_okay=False))
@click.option("--input", "input_path", type=click.Path(dir_okay=False))
@click.option("--average", type=click.Choice(["macro", "weighted"]))
@click.pass_obj
def evaluate(obj, model_kind, model_file, input_path, average, **kw):
    """Accuracy/precision/recall/F1 and confusion matrix on a labelled CSV."""
    cfg = _config(obj, average=average, **kw)
    out = Path(cfg.output_dir)
    if model_kind == "majority":
        prep = _prepared(cfg)
        meta = json.loads((prep / "scenario.json").read_text())
        class_map = {c: i for i, c in enumerate(meta["classes"])}
        train_t = FlowTable.read_csv(prep / "train.csv")
        test_t = FlowTable.read_csv(Path(input_path) if input_path else prep / "test.csv")
        base = MajorityClassifier().fit(train_t.values, encode_labels(train_t, class_map))
        y = encode_labels(test_t, class_map)
        pred = base.predict(test_t.values)
        names = meta["classes"]
    else:
        bundle = _load_bundle(model_file or out / "model.tmm")
        path = Path(input_path) if input_path else out / "prepared" / "test.csv"
        values, labels = _features_for(bundle, path)
        if labels is None:
            raise DataError(f"{path}: no label column to evaluate against")
        names = bundle.class_names
        class_map = {c: i for i, c in enumerate(names)}
        y = encode_labels(FlowTable(["_"], np.zeros((len(labels), 1)), labels), class_map)
        pred = bundle.tm.predict(_bits(bundle, values))
    report = evaluate_preds(y, pred, len(names), cfg.average, names)
    with _Staging(out / f"eval_{model_kind}") as tmp:
        _report_files(tmp, report, names, model_kind.upper())
    click.echo(f"accuracy={report.accuracy:.4f} precision={report.precision:.4f} "
               f"recall={report.recall:.4f} f1={report.f1:.4f} ({report.average})")


@cli.command()
@common_options
@hyper_options
@click.option("--model", "model_kind", type=click.Choice(["tm", "majority"]), default="tm")
@click.pass_obj
def cv(obj, model_kind, **kw):
    """Stratified k-fold CV on the cleaned training table (pipeline refit per fold)."""
    cfg = _config(obj, **kw)
    prep = _prepared(cfg)
    meta = json.loads((prep / "scenario.json").read_text())
    names = meta["classes"]
    class_map = {c: i for i, c in enumerate(names)}
    table = FlowTable.read_csv(prep / "train.csv")
    y = encode_labels(table, class_map)
    if model_kind == "majority":
        est = MajorityClassifier()
    else:
        p = cfg.tm_params()
        est = TsetlinIDS(
            n_clauses=p["n_clauses"], T=p["T"], s=p["s"], epochs=p["epochs"], n_bins=cfg.n_bins,
            states_per_action=cfg.states_per_action, clause_budget=cfg.clause_budget, smote=cfg.smote,
            smote_k=cfg.smote_k, n_classes=len(names), random_state=cfg.seed,
        )
    report = kfold_cv(est, table.values, y, cfg.folds, cfg.seed, cfg.average, names, len(names))
    with _Staging(Path(cfg.output_dir) / f"cv_{model_kind}") as tmp:
        _report_files(tmp, report, names, model_kind.upper())
        keys = ["fold", "n_train", "n_val", "accuracy", "precision", "recall", "f1"]
        _write_csv(tmp / "folds.csv", keys, [[f[k] for k in keys] for f in report.folds])
    s = report.fold_summary["accuracy"]
    click.echo(f"{cfg.folds}-fold accuracy {s['mean']:.4f} ± {s['std']:.4f}")


@cli.command()
@common_options
@click.option("--model-file", type=click.Path(dir_okay=False))
@click.option("--input", "input_path", type=click.Path(dir_okay=False), required=True)
@click.option("--output", "output_name", default="predictions.csv", show_default=True)
@click.pass_obj
def predict(obj, model_file, input_path, output_name, **kw):
    """Per-row predicted label and class votes for a feature CSV."""
    cfg = _config(obj, **kw)
    out = Path(cfg.output_dir)
    bundle = _load_bundle(model_file or out / "model.tmm")
    values, _ = _features_for(bundle, input_path)
    votes = bundle.tm.decision_function(_bits(bundle, values))
    pred = np.argmax(votes, axis=1)
    names = bundle.class_names
    rows = [[i, names[p]] + v.tolist() for i, (p, v) in enumerate(zip(pred, votes))]
    with _Staging(out) as tmp:
        _write_csv(tmp / Path(output_name).name, ["row", "label"] + [f"vote_{c}" for c in names], rows)
    click.echo(f"{len(rows)} predictions -> {out / Path(output_name).name}")


@cli.command()
@common_options
@click.option("--model-file", type=click.Path(dir_okay=False))
@click.option("--input", "input_path", type=click.Path(dir_okay=False))
@click.option("--rows", default="0", show_default=True, help="Comma-separated row indices.")
@click.option("--top-k", default=10, show_default=True)
@click.pass_obj
def explain(obj, model_file, input_path, rows, top_k, **kw):
    """Vote, clause-heatmap and rule exports for selected rows."""
    cfg = _config(obj, **kw)
    out = Path(cfg.output_dir)
    bundle = _load_bundle(model_file or out / "model.tmm")
    path = Path(input_path) if input_path else out / "prepared" / "test.csv"
    values, _ = _features_for(bundle, path)
    try:
        idx = [int(r) for r in rows.split(",") if r.strip()]
    except ValueError:
        raise UsageError(f"--rows must be integers, got {rows!r}") from None
    bad = [i for i in idx if not 0 <= i < len(values)]
    if bad:
        raise UsageError(f"row indices out of range: {bad} (input has {len(values)} rows)")
    names = bundle.class_names
    bits = _bits(bundle, values[idx])
    with _Staging(out / "explain") as tmp:
        for i, b in zip(idx, bits):
            (tmp / f"row{i}_votes.csv").write_text(ex.votes_to_csv(ex.class_votes(bundle.tm, b), names))
            amap = ex.activation_map(bundle.tm, b)
            (tmp / f"row{i}_heatmap.csv").write_text(amap.to_csv(names))
            (tmp / f"row{i}_heatmap.svg").write_text(amap.to_svg(names))
        rules = []
        for c in range(len(names)):
            rules += ex.render_rules(bundle.tm, c, top_k, bundle.binarizer,
                                     inverse=bundle.pipeline().raw_edge)
        (tmp / "rules.txt").write_text(ex.rules_to_text(rules, names))
        (tmp / "rules.json").write_text(ex.rules_to_json(rules))
    click.echo(f"explanations for rows {idx} -> {out / 'explain'}")


@cli.command()
@common_options
@click.option("--model-file", type=click.Path(dir_okay=False))
@click.option("--input", "input_path", type=click.Path(dir_okay=False))
@click.option("--n", "n_samples", default=1000, show_default=True)
@click.option("--repetitions", default=5, show_default=True)
@click.pass_obj
def bench(obj, model_file, input_path, n_samples, repetitions, **kw):
    """Single-sample inference latency of the TM kernel (microseconds)."""
    cfg = _config(obj, **kw)
    out = Path(cfg.output_dir)
    bundle = _load_bundle(model_file or out / "model.tmm")
    path = Path(input_path) if input_path else out / "prepared" / "test.csv"
    values, _ = _features_for(bundle, path)
    bits = _bits(bundle, values[:n_samples])
    stats = measure_latency(bundle.tm.predict_one, list(bits), repetitions)
    stats.update({
        "scenario": bundle.scenario,
        "clauses_per_class": int(bundle.tm.clauses_per_class_),
        "n_literals": int(2 * bundle.tm.n_features_in_),
    })
    with _Staging(out / "bench") as tmp:
        _write_json(tmp / "latency.json", stats)
    click.echo(f"mean {stats['mean_us']:.2f} us, p50 {stats['p50_us']:.2f} us, p99 {stats['p99_us']:.2f} us")


def main(argv=None):
    try:
        cli.main(args=argv, prog_name="tmids", standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except UsageError as exc:
        click.echo(f"usage error: {exc}", err=True)
        return EXIT_USAGE
    except DataError as exc:
        click.echo(f"data error: {exc}", err=True)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        log.exception("internal fault")
        click.echo(f"internal error: {exc}", err=True)
        return EXIT_INTERNAL
    return 0


if __name__ == "__main__":
    sys.exit(main())
