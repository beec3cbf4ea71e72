"""Command-line entry point.

One subcommand per operation family (``gen``, ``label``, ``split``,
``exact``, ``approx``, ``samplesize``, ``train``, ``eval``,
``graph-stats``) plus ``pipeline``, which runs a strict JSON config of
chained stages. All reports are JSON, written atomically; exit status is
0 on success, 1 on data errors (one machine-parsable line on stderr), and
2 on usage errors. ``MCNPOWER_WORKERS`` overrides any worker-count flag
but never changes results.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import datagen, graphs, mlp
from .errors import McnPowerError
from .exact import (
    IndexKind,
    PowerVector,
    exact_alg4_estimand,
    exact_alg5_estimand,
    exact_banzhaf_eq1,
    exact_shapley_eq2,
)
from .game import ruleset_from_json
from .sampling import McConfig, derive_seed, hoeffding_samples, mc_banzhaf, mc_shapley
from ._ioutil import atomic_write_text, config_hash

REPORT_FORMAT_VERSION = 1

_EXACT_FNS = {
    "banzhaf-eq1": exact_banzhaf_eq1,
    "shapley-eq2": exact_shapley_eq2,
    "banzhaf-alg4": exact_alg4_estimand,
    "shapley-alg5": exact_alg5_estimand,
}

_WEIGHT_SCHEMES = {
    "uniform": datagen.WeightScheme.UNIFORM,
    "gauss-low": datagen.WeightScheme.GAUSS_LOW,
    "gauss-high": datagen.WeightScheme.GAUSS_HIGH,
}

_LABEL_KINDS = {
    "banzhaf": IndexKind.BANZHAF_ALG4,
    "shapley": IndexKind.SHAPLEY_ALG5,
}


def _workers(requested: int) -> int:
    env = os.environ.get("MCNPOWER_WORKERS")
    if env is not None:
        return max(1, int(env))
    return max(1, requested)


def _emit_report(doc: dict, out: str | None) -> None:
    doc = dict(doc)
    doc.setdefault("format_version", REPORT_FORMAT_VERSION)
    doc.setdefault("config_hash", config_hash(doc))
    text = json.dumps(doc, indent=2) + "\n"
    if out:
        atomic_write_text(out, text)
    else:
        sys.stdout.write(text)


def _load_ruleset(path: str):
    with open(path, encoding="utf-8") as f:
        return ruleset_from_json(f.read())


# --- subcommand handlers -----------------------------------------------------


def _cmd_exact(args) -> int:
    rs = _load_ruleset(args.in_path)
    pv = _EXACT_FNS[args.index](rs)
    _emit_report(pv.to_dict(), args.out)
    return 0


def _cmd_approx(args) -> int:
    rs = _load_ruleset(args.in_path)
    cfg = McConfig(
        n_samples=args.samples, seed=args.seed, workers=_workers(args.workers)
    )
    estimator = mc_banzhaf if args.index == "banzhaf" else mc_shapley
    pv = estimator(rs, cfg)
    _emit_report(pv.to_dict(), args.out)
    return 0


def _cmd_samplesize(args) -> int:
    bound = hoeffding_samples(args.epsilon, args.delta)
    _emit_report(bound.to_dict(), args.out)
    return 0


def _cmd_gen(args) -> int:
    spec = datagen.GenSpec(
        method=datagen.GenMethod(args.method),
        k=args.k,
        n=args.n,
        m=args.m,
        p=args.p,
        c=args.c,
        alpha=args.alpha,
        beta=args.beta,
        weight_scheme=_WEIGHT_SCHEMES[args.weights],
        seed=args.seed,
    )
    ds = datagen.generate_dataset(spec)
    if args.pad_m is not None:
        ds = datagen.pad_dataset(ds, args.pad_m)
    datagen.save_dataset(ds, args.out)
    _emit_report({"written": args.out, "k": ds.k, "n": spec.n, "m": ds.m_eff}, None)
    return 0


def _cmd_label(args) -> int:
    ds = datagen.load_dataset(args.data)
    labeled = datagen.label_dataset(
        ds,
        _LABEL_KINDS[args.index],
        n_samples=args.samples,
        seed=args.seed,
        workers=_workers(args.workers),
    )
    datagen.save_dataset(labeled, args.data)
    _emit_report(
        {"written": args.data, "label_kind": labeled.label_kind.value,
         "samples": args.samples}, None,
    )
    return 0


def _cmd_split(args) -> int:
    ds = datagen.load_dataset(args.data)
    train, test = datagen.split_dataset(ds, args.ratio, args.seed)
    datagen.save_dataset(train, args.train_out)
    datagen.save_dataset(test, args.test_out)
    _emit_report(
        {"train": {"path": args.train_out, "k": train.k},
         "test": {"path": args.test_out, "k": test.k}}, None,
    )
    return 0


def _cmd_train(args) -> int:
    ds = datagen.load_dataset(args.data)
    features, labels = mlp.dataset_arrays(ds)
    cfg = mlp.TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch,
        learning_rate=args.lr,
        seed=args.seed,
    )
    model = mlp.init_model(features.shape[1], labels.shape[1], seed=args.seed)
    model, history = mlp.train(model, features, labels, cfg)
    mlp.save_model(model, args.out)
    _emit_report(
        {"written": args.out, "epochs": args.epochs,
         "final_train_loss": history[-1]}, None,
    )
    return 0


def _cmd_eval(args) -> int:
    model = mlp.load_model(args.model)
    ds = datagen.load_dataset(args.data)
    features, labels = mlp.dataset_arrays(ds)
    _emit_report(mlp.evaluate(model, features, labels), args.report)
    return 0


def _cmd_graph_stats(args) -> int:
    datasets = [datagen.load_dataset(p) for p in args.data]
    records, prevalence = graphs.correlation_report(datasets)
    doc = {
        "datasets": list(args.data),
        "records": [r.to_dict() for r in records],
        "prevalence": prevalence,
    }
    _emit_report(doc, args.out)
    if args.emit_csv:
        atomic_write_text(args.emit_csv, _statistics_csv(datasets, args.data))
    return 0


def _statistics_csv(datasets, paths) -> str:
    columns = [f"banzhaf.{s}" for s in graphs.BANZHAF_STAT_NAMES] + [
        f"{kind}.{s}" for kind in ("req", "ban") for s in graphs.GRAPH_STAT_NAMES
    ]
    lines = ["dataset,datapoint," + ",".join(columns)]
    for path, ds in zip(paths, datasets):
        series = graphs.dataset_statistics(ds)
        for i in range(ds.k):
            cells = [
                "" if series[c][i] is None else repr(float(series[c][i]))
                for c in columns
            ]
            lines.append(f"{path},{i}," + ",".join(cells))
    return "\n".join(lines) + "\n"


# --- pipeline ----------------------------------------------------------------

_STAGE_KEYS = {
    "gen": {"stage", "method", "k", "n", "m", "p", "c", "alpha", "beta",
            "weights", "pad_m", "out", "seed"},
    "label": {"stage", "data", "index", "samples", "workers", "seed"},
    "split": {"stage", "data", "ratio", "train_out", "test_out", "seed"},
    "train": {"stage", "data", "epochs", "batch", "lr", "out", "seed"},
    "eval": {"stage", "model", "data", "report"},
    "graph-stats": {"stage", "data", "out", "emit_csv"},
}

_STAGE_REQUIRED = {
    "gen": {"method", "k", "n", "m", "weights", "out"},
    "label": {"data", "index", "samples"},
    "split": {"data", "ratio", "train_out", "test_out"},
    "train": {"data", "out"},
    "eval": {"model", "data", "report"},
    "graph-stats": {"data", "out"},
}


def _parse_pipeline_config(path: str) -> dict:
    with open(path, encoding="utf-8") as f:
        doc = json.load(f)
    if not isinstance(doc, dict):
        raise McnPowerError("pipeline config must be a JSON object")
    allowed_top = {"seed", "stages"}
    for key in doc:
        if key not in allowed_top:
            raise McnPowerError(f"pipeline config: unknown key {key!r}")
    if "seed" not in doc or "stages" not in doc:
        raise McnPowerError("pipeline config needs 'seed' and 'stages'")
    if not isinstance(doc["stages"], list) or not doc["stages"]:
        raise McnPowerError("'stages' must be a non-empty list")
    for i, stage in enumerate(doc["stages"]):
        if not isinstance(stage, dict) or "stage" not in stage:
            raise McnPowerError(f"stage {i} must be an object with a 'stage' name")
        name = stage["stage"]
        if name not in _STAGE_KEYS:
            raise McnPowerError(f"stage {i}: unknown stage {name!r}")
        for key in stage:
            if key not in _STAGE_KEYS[name]:
                raise McnPowerError(f"stage {i} ({name}): unknown key {key!r}")
        missing = _STAGE_REQUIRED[name] - set(stage)
        if missing:
            raise McnPowerError(
                f"stage {i} ({name}): missing keys {sorted(missing)}"
            )
    return doc


def _cmd_pipeline(args) -> int:
    doc = _parse_pipeline_config(args.config)
    root = os.path.dirname(os.path.abspath(args.config))

    def rel(p: str) -> str:
        return p if os.path.isabs(p) else os.path.join(root, p)

    for i, stage in enumerate(doc["stages"]):
        name = stage["stage"]
        seed = stage.get("seed", derive_seed(doc["seed"], i))
        try:
            _run_stage(name, stage, seed, rel)
        except (McnPowerError, ValueError, OSError) as e:
            _fail(f"pipeline stage {i} ({name}): {e}")
            return 1
    return 0


def _run_stage(name: str, stage: dict, seed: int, rel) -> None:
    if name == "gen":
        spec = datagen.GenSpec(
            method=datagen.GenMethod(stage["method"]),
            k=stage["k"],
            n=stage["n"],
            m=stage["m"],
            p=stage.get("p", 0.5),
            c=stage.get("c", 1),
            alpha=stage.get("alpha", 2.0),
            beta=stage.get("beta", 1.0),
            weight_scheme=_WEIGHT_SCHEMES[stage["weights"]],
            seed=seed,
        )
        ds = datagen.generate_dataset(spec)
        if stage.get("pad_m") is not None:
            ds = datagen.pad_dataset(ds, stage["pad_m"])
        datagen.save_dataset(ds, rel(stage["out"]))
    elif name == "label":
        ds = datagen.load_dataset(rel(stage["data"]))
        labeled = datagen.label_dataset(
            ds,
            _LABEL_KINDS[stage["index"]],
            n_samples=stage["samples"],
            seed=seed,
            workers=_workers(stage.get("workers", 1)),
        )
        datagen.save_dataset(labeled, rel(stage["data"]))
    elif name == "split":
        ds = datagen.load_dataset(rel(stage["data"]))
        train, test = datagen.split_dataset(ds, stage["ratio"], seed)
        datagen.save_dataset(train, rel(stage["train_out"]))
        datagen.save_dataset(test, rel(stage["test_out"]))
    elif name == "train":
        ds = datagen.load_dataset(rel(stage["data"]))
        features, labels = mlp.dataset_arrays(ds)
        cfg = mlp.TrainConfig(
            epochs=stage.get("epochs", 30),
            batch_size=stage.get("batch", 256),
            learning_rate=stage.get("lr", 1e-3),
            seed=seed,
        )
        model = mlp.init_model(features.shape[1], labels.shape[1], seed=seed)
        model, _ = mlp.train(model, features, labels, cfg)
        mlp.save_model(model, rel(stage["out"]))
    elif name == "eval":
        model = mlp.load_model(rel(stage["model"]))
        ds = datagen.load_dataset(rel(stage["data"]))
        features, labels = mlp.dataset_arrays(ds)
        report = mlp.evaluate(model, features, labels)
        report["format_version"] = REPORT_FORMAT_VERSION
        report["config_hash"] = config_hash(report)
        atomic_write_text(rel(stage["report"]), json.dumps(report, indent=2) + "\n")
    elif name == "graph-stats":
        paths = stage["data"]
        if isinstance(paths, str):
            paths = [paths]
        datasets = [datagen.load_dataset(rel(p)) for p in paths]
        records, prevalence = graphs.correlation_report(datasets)
        report = {
            "format_version": REPORT_FORMAT_VERSION,
            "datasets": list(paths),
            "records": [r.to_dict() for r in records],
            "prevalence": prevalence,
        }
        report["config_hash"] = config_hash(report)
        atomic_write_text(rel(stage["out"]), json.dumps(report, indent=2) + "\n")
        if stage.get("emit_csv"):
            atomic_write_text(rel(stage["emit_csv"]), _statistics_csv(datasets, paths))


# --- parser ------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mcnpower",
        description="Power indices, synthetic datasets, regression, and "
        "graph analysis for rule-based coalition games.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("exact", help="exhaustive power indices for a rule-set file")
    p.add_argument("--in", dest="in_path", required=True, metavar="RULESET.json")
    p.add_argument("--index", required=True, choices=sorted(_EXACT_FNS))
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_exact)

    p = sub.add_parser("approx", help="Monte-Carlo power indices for a rule-set file")
    p.add_argument("--in", dest="in_path", required=True, metavar="RULESET.json")
    p.add_argument("--index", required=True, choices=["banzhaf", "shapley"])
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_approx)

    p = sub.add_parser("samplesize", help="Hoeffding sample-size bound")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_samplesize)

    p = sub.add_parser("gen", help="generate a synthetic rule-set dataset")
    p.add_argument("--method", required=True, choices=["uniform", "coinflip", "mog"])
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--p", type=float, default=0.5)
    p.add_argument("--c", type=int, default=1)
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--weights", required=True, choices=sorted(_WEIGHT_SCHEMES))
    p.add_argument("--pad-m", dest="pad_m", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, metavar="DIR")
    p.set_defaults(fn=_cmd_gen)

    p = sub.add_parser("label", help="attach Monte-Carlo labels to a dataset")
    p.add_argument("--index", required=True, choices=sorted(_LABEL_KINDS))
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("data", metavar="DIR")
    p.set_defaults(fn=_cmd_label)

    p = sub.add_parser("split", help="split a dataset into train and test")
    p.add_argument("--data", required=True, metavar="DIR")
    p.add_argument("--ratio", type=float, default=0.8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train-out", required=True, metavar="DIR")
    p.add_argument("--test-out", required=True, metavar="DIR")
    p.set_defaults(fn=_cmd_split)

    p = sub.add_parser("train", help="train the regressor on a labeled dataset")
    p.add_argument("--data", required=True, metavar="DIR")
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch", type=int, default=256)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, metavar="MODELDIR")
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained model on a labeled dataset")
    p.add_argument("--model", required=True, metavar="MODELDIR")
    p.add_argument("--data", required=True, metavar="DIR")
    p.add_argument("--report", metavar="OUT.json")
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("graph-stats", help="correlate graph metrics with labels")
    p.add_argument("--data", action="append", required=True, metavar="DIR")
    p.add_argument("--out", metavar="OUT.json")
    p.add_argument("--emit-csv", dest="emit_csv", metavar="OUT.csv")
    p.set_defaults(fn=_cmd_graph_stats)

    p = sub.add_parser("pipeline", help="run a strict JSON pipeline config")
    p.add_argument("config", metavar="CONFIG.json")
    p.set_defaults(fn=_cmd_pipeline)

    return parser


def _fail(message: str) -> None:
    line = " ".join(str(message).split())
    print(f"error: {line}", file=sys.stderr)


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except McnPowerError as e:
        _fail(f"{e.__class__.__name__}: {e}")
        return 1
    except (ValueError, OSError, json.JSONDecodeError) as e:
        _fail(f"{e.__class__.__name__}: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
