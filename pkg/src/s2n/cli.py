"""Command-line interface: synth / translate / stats / train / eval / bench.

Options resolve in three layers: built-in defaults, then a TOML or JSON
config file (``--config``), then explicit flags. Every file-producing run
writes a provenance record (resolved options, tool version, dataset
checksum) next to its outputs so it can be re-executed.

Errors print one line to stderr with a stable machine-parseable prefix
(E_PARSE, E_VALIDATE, E_SHAPE, E_IO) and exit 1; usage errors exit 2.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import __version__, bench, models
from .data import (
    PRESETS,
    SynthConfig,
    generate_synthetic,
    load_dataset,
    save_dataset,
)
from .exceptions import MissingFileError, ParseError, S2NError
from .homophily import dataset_stats
from .models import ModelConfig, TrainConfig
from .translate import build_s2n, build_stagewise

_ENCODER_CLI = {"gcn": "gcn", "linkx-i": "linkx_i"}


def _dataset_checksum(root: Path) -> str:
    digest = hashlib.sha256()
    for name in ("meta.json", "edges.tsv", "subgraphs.jsonl", "features.bin"):
        path = root / name
        if path.is_file():
            digest.update(name.encode())
            digest.update(path.read_bytes())
    return digest.hexdigest()


def _write_provenance(target: Path, command: str, resolved: dict, dataset_dir: Path | None):
    record = {
        "command": command,
        "config": resolved,
        "version": __version__,
        "dataset_sha256": None if dataset_dir is None else _dataset_checksum(dataset_dir),
    }
    if target.is_dir():
        path = target / "provenance.json"
    else:
        path = target.with_name(target.name + ".provenance.json")
    path.write_text(json.dumps(record, sort_keys=True, indent=1) + "\n")


def _load_config_file(path: str) -> dict:
    p = Path(path)
    if not p.is_file():
        raise MissingFileError(f"config file not found: {p}")
    text = p.read_text()
    try:
        if p.suffix == ".toml":
            return tomllib.loads(text)
        return json.loads(text)
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as e:
        raise ParseError(f"config file {p}: {e}") from e


def _resolve(args: argparse.Namespace, defaults: dict) -> dict:
    """defaults < config file < explicit flags (flags parse with default None)."""
    resolved = dict(defaults)
    if getattr(args, "config", None):
        file_values = _load_config_file(args.config)
        unknown = set(file_values) - set(defaults)
        if unknown:
            raise ParseError(f"config file keys not valid here: {sorted(unknown)}")
        resolved.update(file_values)
    for key in defaults:
        flag = getattr(args, key, None)
        if flag is not None:
            resolved[key] = flag
    return resolved


def _add_config_flag(sub: argparse.ArgumentParser):
    sub.add_argument("--config", help="TOML or JSON file with option defaults")


def _add_model_flags(sub: argparse.ArgumentParser):
    sub.add_argument("--encoder", choices=sorted(_ENCODER_CLI))
    sub.add_argument("--pool", choices=["sum", "max"])
    sub.add_argument("--layers-set", dest="layers_set", type=int, choices=[2, 4])
    sub.add_argument("--layers-graph", dest="layers_graph", type=int, choices=[1, 2])
    sub.add_argument("--hidden-dim", dest="hidden_dim", type=int)
    sub.add_argument("--lr", type=float)
    sub.add_argument("--weight-decay", dest="weight_decay", type=float)
    sub.add_argument("--dropout", type=float)
    sub.add_argument("--clip", type=float)
    sub.add_argument("--epochs", type=int)
    sub.add_argument("--seed", type=int)


_MODEL_DEFAULTS = {
    "encoder": "gcn",
    "pool": "sum",
    "layers_set": 2,
    "layers_graph": 2,
    "hidden_dim": 32,
    "lr": 0.01,
    "weight_decay": 0.0,
    "dropout": 0.0,
    "clip": 0.0,
    "epochs": 200,
    "seed": 0,
}


def _model_config(resolved: dict) -> ModelConfig:
    return ModelConfig(
        encoder_kind=_ENCODER_CLI[resolved["encoder"]],
        pool=resolved["pool"],
        set_layers=resolved["layers_set"],
        graph_layers=resolved["layers_graph"],
        hidden_dim=resolved["hidden_dim"],
        train=TrainConfig(
            lr=resolved["lr"],
            weight_decay=resolved["weight_decay"],
            dropout=resolved["dropout"],
            clip=resolved["clip"],
            epochs=resolved["epochs"],
            seed=resolved["seed"],
        ),
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="s2n",
        description="Coarsen subgraph datasets into node-classification graphs and run the pipeline on them.",
    )
    parser.add_argument("--version", action="version", version=f"s2n {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    synth = commands.add_parser("synth", help="generate a synthetic dataset directory")
    synth.add_argument("--preset", choices=sorted(PRESETS))
    synth.add_argument("--seed", type=int)
    synth.add_argument("--num-subgraphs", dest="num_subgraphs", type=int)
    synth.add_argument("--overlap", type=float, help="pool overlap in [0, 1]")
    synth.add_argument("--separation", type=float)
    synth.add_argument("--out", required=True)
    _add_config_flag(synth)

    translate = commands.add_parser("translate", help="write coarse train/eval graphs")
    translate.add_argument("dataset_dir")
    translate.add_argument("--eval-split", dest="eval_split", choices=["valid", "test"])
    translate.add_argument("--out", required=True)
    _add_config_flag(translate)

    stats = commands.add_parser("stats", help="before/after coarsening statistics")
    stats.add_argument("dataset_dir")
    stats.add_argument("--json", action="store_true", default=None)
    _add_config_flag(stats)

    train = commands.add_parser("train", help="train a classifier on a dataset")
    train.add_argument("dataset_dir")
    train.add_argument("--out", required=True, help="model file to write")
    _add_model_flags(train)
    _add_config_flag(train)

    evaluate = commands.add_parser("eval", help="micro-F1 of a saved model on a split")
    evaluate.add_argument("model_file")
    evaluate.add_argument("dataset_dir")
    evaluate.add_argument("--split", choices=["valid", "test"])
    evaluate.add_argument("--json", action="store_true", default=None)
    _add_config_flag(evaluate)

    cmd_bench = commands.add_parser("bench", help="throughput/latency measurement")
    cmd_bench.add_argument("dataset_dir")
    cmd_bench.add_argument("--json", action="store_true", default=None)
    cmd_bench.add_argument("--table", action="store_true", default=None,
                           help="compare encoder configurations side by side")
    _add_model_flags(cmd_bench)
    _add_config_flag(cmd_bench)

    return parser


def _cmd_synth(args) -> int:
    defaults = {
        "preset": "separable",
        "seed": 0,
        "num_subgraphs": None,
        "overlap": None,
        "separation": None,
        "out": None,
    }
    resolved = _resolve(args, defaults)
    config = dataclasses.replace(PRESETS[resolved["preset"]])
    if resolved["num_subgraphs"] is not None:
        config.num_subgraphs = resolved["num_subgraphs"]
    if resolved["overlap"] is not None:
        config.pool_overlap = resolved["overlap"]
    if resolved["separation"] is not None:
        config.separation = resolved["separation"]
    dataset = generate_synthetic(config, resolved["seed"])
    out = Path(resolved["out"])
    save_dataset(dataset, out)
    resolved["synth_config"] = dataclasses.asdict(config)
    resolved["synth_config"]["split_fracs"] = list(config.split_fracs)
    _write_provenance(out, "synth", resolved, out)
    print(f"wrote {dataset.num_subgraphs} subgraphs over {dataset.graph.num_nodes} nodes to {out}")
    return 0


def _s2n_payload(graph) -> dict:
    return {
        "members": [[int(x) for x in m] for m in graph.members],
        "edges": [[i, j] for i, j in graph.edge_list()],
        "train_count": graph.train_count,
    }


def _cmd_translate(args) -> int:
    defaults = {"eval_split": "valid", "out": None}
    resolved = _resolve(args, defaults)
    dataset = load_dataset(args.dataset_dir)
    train_graph, eval_graph, _ = build_stagewise(dataset, resolved["eval_split"])
    out = Path(resolved["out"])
    out.mkdir(parents=True, exist_ok=True)
    for name, graph in (("train.s2n.json", train_graph), ("eval.s2n.json", eval_graph)):
        (out / name).write_text(
            json.dumps(_s2n_payload(graph), sort_keys=True, separators=(",", ":")) + "\n"
        )
    resolved["dataset_dir"] = args.dataset_dir
    _write_provenance(out, "translate", resolved, Path(args.dataset_dir))
    print(
        f"wrote {out / 'train.s2n.json'} ({train_graph.num_nodes} nodes) and "
        f"{out / 'eval.s2n.json'} ({eval_graph.num_nodes} nodes)"
    )
    return 0


def _stats_value(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def _cmd_stats(args) -> int:
    resolved = _resolve(args, {"json": False})
    dataset = load_dataset(args.dataset_dir)
    full = build_s2n(dataset.subgraphs, [s == "train" for s in dataset.split])
    before, after = dataset_stats(dataset, full)
    if resolved["json"]:
        print(json.dumps(
            {"before": dataclasses.asdict(before), "after": dataclasses.asdict(after)},
            sort_keys=True,
            indent=1,
        ))
        return 0
    rows = [("", "before", "after")]
    for name in ("num_nodes", "num_edges", "density", "num_classes",
                 "node_homophily", "edge_homophily", "isolated_excluded"):
        rows.append((name, _stats_value(getattr(before, name)), _stats_value(getattr(after, name))))
    widths = [max(len(r[k]) for r in rows) for k in range(3)]
    for r in rows:
        print("  ".join(str(r[k]).ljust(widths[k]) for k in range(3)).rstrip())
    return 0


def _cmd_train(args) -> int:
    defaults = dict(_MODEL_DEFAULTS)
    defaults["out"] = None
    resolved = _resolve(args, defaults)
    mc = _model_config(resolved)
    dataset = load_dataset(args.dataset_dir)
    bundle, history = models.train(
        dataset,
        encoder_kind=mc.encoder_kind,
        config=mc.train,
        pool=mc.pool,
        set_layers=mc.set_layers,
        graph_layers=mc.graph_layers,
        hidden_dim=mc.hidden_dim,
    )
    out = Path(resolved["out"])
    models.save_model(bundle, out)
    resolved["dataset_dir"] = args.dataset_dir
    _write_provenance(out, "train", resolved, Path(args.dataset_dir))
    final_loss = history["loss"][-1] if history["loss"] else float("nan")
    final_f1 = history["val_micro_f1"][-1] if history["val_micro_f1"] else float("nan")
    print(f"wrote {out}  final_loss={final_loss:.6f}  val_micro_f1={final_f1:.4f}")
    return 0


def _cmd_eval(args) -> int:
    resolved = _resolve(args, {"split": "test", "json": False})
    bundle = models.load_model(args.model_file)
    dataset = load_dataset(args.dataset_dir)
    score = models.evaluate(bundle, dataset, resolved["split"])
    if resolved["json"]:
        print(json.dumps({"split": resolved["split"], "micro_f1": score}, sort_keys=True))
    else:
        print(f"micro_f1 {score:.6f}")
    return 0


_BENCH_TABLE_CONFIGS = [
    ("gcn", 1),
    ("gcn", 2),
    ("linkx-i", 1),
    ("linkx-i", 2),
]


def _cmd_bench(args) -> int:
    defaults = dict(_MODEL_DEFAULTS)
    defaults["epochs"] = 50
    defaults["json"] = False
    defaults["table"] = False
    resolved = _resolve(args, defaults)
    dataset = load_dataset(args.dataset_dir)

    if resolved["table"]:
        header = ("config", "params", "train/s", "infer/s", "train lat", "infer lat")
        lines = [header]
        for encoder, depth in _BENCH_TABLE_CONFIGS:
            row_resolved = dict(resolved, encoder=encoder, layers_graph=depth)
            mc = _model_config(row_resolved)
            report = bench.measure(mc, dataset, epochs=resolved["epochs"])
            lines.append((
                f"{encoder}-{depth}L",
                str(report.param_count),
                f"{report.train_throughput:.1f}",
                f"{report.infer_throughput:.1f}",
                f"{report.train_latency:.4f}s",
                f"{report.infer_latency:.4f}s",
            ))
        widths = [max(len(row[k]) for row in lines) for k in range(len(header))]
        for row in lines:
            print("  ".join(row[k].ljust(widths[k]) for k in range(len(header))).rstrip())
        return 0

    mc = _model_config(resolved)
    report = bench.measure(mc, dataset, epochs=resolved["epochs"])
    if resolved["json"]:
        print(json.dumps(report.to_dict(), sort_keys=True, indent=1))
    else:
        print(
            f"train_throughput={report.train_throughput:.1f}/s  "
            f"infer_throughput={report.infer_throughput:.1f}/s  "
            f"train_latency={report.train_latency:.4f}s  "
            f"infer_latency={report.infer_latency:.4f}s  "
            f"params={report.param_count}"
        )
    return 0


_HANDLERS = {
    "synth": _cmd_synth,
    "translate": _cmd_translate,
    "stats": _cmd_stats,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "bench": _cmd_bench,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except S2NError as e:
        print(f"{e.code}: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"E_IO: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
