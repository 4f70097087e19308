"""``grag`` command line: parse-amr, build-graphs, train, rerank, eval, report-paths, gen-synthetic.

Every subcommand accepts ``--config file.json``; keys are the long option
names with dashes replaced by underscores. Explicit flags override the file.
Exit status: 0 success, 1 invalid input or configuration, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from collections import Counter
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Callable

from grag import amr as amr_mod
from grag import metrics
from grag.data import DatasetError, generate_synthetic, read_dataset, write_synthetic
from grag.docgraph import NORM_MODES, DocumentGraph
from grag.encoder import EmbeddingFormatError, HashEncoder
from grag.gnn import STRATEGIES
from grag.gnn.checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from grag.gnn.model import GcnModel, predict
from grag.gnn.train import TrainConfig, train
from grag.pipeline import MissingAmr, build_examples, index_amrs, question_graph

log = logging.getLogger("grag")

PENMAN_SUFFIXES = {".amr", ".txt", ".penman"}


class ConfigError(ValueError):
    pass


INPUT_ERRORS = (ConfigError, amr_mod.AmrError, DatasetError, MissingAmr, EmbeddingFormatError,
                CheckpointError, metrics.UnknownDocId, metrics.MissingQuestion, FileNotFoundError)


# ------------------------------------------------------------------- configs


@dataclass
class ParseAmrConfig:
    input_dir: str = ""
    out: str = ""


@dataclass
class BuildGraphsConfig:
    dataset: str = ""
    amr: str = ""
    out_dir: str = ""
    norm_mode: str = "per_channel_dims"
    exclude_question_concept: bool = False


@dataclass
class RunConfig:
    """Training run. ``train`` and ``dev`` are question-record JSONL files."""

    out_dir: str = ""
    train: str = ""
    dev: str = ""
    strategy: str = "g-rag-rl"
    amr: str = ""
    graphs_dir: str = ""
    embeddings_dir: str = ""
    encoder_dim: int = 64
    encoder_seed: int = -1
    hidden_dim: int = 128
    num_layers: int = 2
    dropout: float = 0.1
    learning_rate: float = 1e-4
    batch_size: int = 5
    warmup_steps: int = 1000
    total_steps: int = 50_000
    eval_every: int = 10_000
    pair_cap: int = 500
    weight_decay: float = 0.01
    seed: int = 0
    norm_mode: str = "per_channel_dims"
    exclude_question_concept: bool = False

    def validate(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"strategy must be one of {sorted(STRATEGIES)}")
        if self.norm_mode not in NORM_MODES:
            raise ConfigError(f"norm_mode must be one of {NORM_MODES}")
        message_passing, mode, _ = STRATEGIES[self.strategy]
        if mode == "amr_augmented" and not self.amr and not self.embeddings_dir:
            raise ConfigError(f"strategy {self.strategy} needs --amr (or precomputed --embeddings-dir)")
        if message_passing and not (self.amr or self.graphs_dir):
            raise ConfigError(f"strategy {self.strategy} needs --amr or --graphs-dir")
        for name in ("train", "dev", "amr", "graphs_dir", "embeddings_dir"):
            value = getattr(self, name)
            if value and not Path(value).exists():
                raise ConfigError(f"{name}: {value} does not exist")
        if self.hidden_dim < 1 or self.encoder_dim < 2:
            raise ConfigError("hidden_dim must be >= 1 and encoder_dim >= 2")
        if not 0 <= self.dropout < 1:
            raise ConfigError("dropout must lie in [0, 1)")
        try:
            self.train_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate, batch_size=self.batch_size, warmup_steps=self.warmup_steps,
            total_steps=self.total_steps, eval_every=self.eval_every, loss=STRATEGIES[self.strategy][2],
            weight_decay=self.weight_decay, pair_cap=self.pair_cap, seed=self.seed,
        )

    def encoder(self) -> HashEncoder:
        return HashEncoder(self.encoder_dim, self.seed if self.encoder_seed < 0 else self.encoder_seed)


@dataclass
class RerankConfig:
    checkpoint: str = ""
    dataset: str = ""
    amr: str = ""
    graphs_dir: str = ""
    embeddings_dir: str = ""
    out: str = ""


@dataclass
class EvalConfig:
    scores: str = ""
    qrels: str = ""
    out: str = ""


@dataclass
class ReportPathsConfig:
    amr: str = ""
    qrels: str = ""
    out: str = ""


@dataclass
class GenSyntheticConfig:
    out_dir: str = ""
    seed: int = 0
    n_questions: int = 200
    dev_questions: int = 50
    docs_per_q: int = 20
    positives_per_q: int = 2


REQUIRED = {
    ParseAmrConfig: ("input_dir", "out"),
    BuildGraphsConfig: ("dataset", "amr", "out_dir"),
    RunConfig: ("out_dir", "train"),
    RerankConfig: ("checkpoint", "dataset", "out"),
    EvalConfig: ("scores", "qrels"),
    ReportPathsConfig: ("amr",),
    GenSyntheticConfig: ("out_dir",),
}


def resolve_config(cls, args: argparse.Namespace):
    """Defaults, then the ``--config`` file, then explicit flags."""
    values: dict[str, Any] = {}
    known = {f.name for f in fields(cls)}
    if getattr(args, "config", None):
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = sorted(set(loaded) - known)
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        values.update(loaded)
    for name in known:
        if name in vars(args):
            values[name] = getattr(args, name)
    defaults = cls()
    for f in fields(cls):
        if f.name in values:
            want = type(getattr(defaults, f.name))
            v = values[f.name]
            if want is float and isinstance(v, int) and not isinstance(v, bool):
                values[f.name] = float(v)
            elif not isinstance(v, want) or (want is int and isinstance(v, bool)):
                raise ConfigError(f"{f.name}: expected {want.__name__}, got {v!r}")
    cfg = cls(**values)
    missing = [n for n in REQUIRED.get(cls, ()) if not getattr(cfg, n)]
    if missing:
        raise ConfigError("missing required option(s): " + ", ".join("--" + m.replace("_", "-") for m in missing))
    return cfg


def add_options(parser: argparse.ArgumentParser, cls) -> None:
    parser.add_argument("--config", help="JSON file with option values")
    for f in fields(cls):
        flag = "--" + f.name.replace("_", "-")
        default = f.default
        if isinstance(default, bool):
            parser.add_argument(flag, action=argparse.BooleanOptionalAction, default=argparse.SUPPRESS)
        else:
            parser.add_argument(flag, type=type(default), default=argparse.SUPPRESS,
                                metavar=f.name.upper())


# ------------------------------------------------------------------ commands


def penman_id(block_id: str | None, path: Path) -> tuple[str, str]:
    """``::id <question_id> <doc_id>``; a lone id is the doc id under the file
    stem; files without ``::id`` are named ``<question_id>__<doc_id>``."""
    if block_id:
        parts = block_id.split()
        if len(parts) >= 2:
            return parts[0], parts[1]
        return path.stem, parts[0]
    qid, sep, did = path.stem.partition("__")
    return (qid, did) if sep else ("", path.stem)


def cmd_parse_amr(cfg: ParseAmrConfig) -> int:
    src = Path(cfg.input_dir)
    if not src.is_dir():
        raise ConfigError(f"{src} is not a directory")
    graphs = []
    for path in sorted(p for p in src.iterdir() if p.is_file() and p.suffix in PENMAN_SUFFIXES):
        text = path.read_text(encoding="utf-8")
        for k, (block_id, body) in enumerate(amr_mod.iter_penman_blocks(text)):
            qid, did = penman_id(block_id, path)
            try:
                graphs.append(amr_mod.parse_penman(body, qid, did))
            except amr_mod.AmrError as exc:
                raise amr_mod.AmrError(f"{path.name}: graph {k} ({block_id or path.stem}): {exc}") from None
    graphs.sort(key=lambda g: (g.question_id, g.doc_id))
    Path(cfg.out).parent.mkdir(parents=True, exist_ok=True)
    with open(cfg.out, "w", encoding="utf-8") as fh:
        amr_mod.dump_amr_jsonl(graphs, fh)
    log.info("wrote %d graphs to %s", len(graphs), cfg.out)
    return 0


def read_amr_index(path: str):
    with open(path, encoding="utf-8") as fh:
        try:
            return index_amrs(amr_mod.load_amr_jsonl(fh))
        except amr_mod.AmrError as exc:
            raise amr_mod.AmrError(f"{path}: {exc}") from None


def cmd_build_graphs(cfg: BuildGraphsConfig) -> int:
    if cfg.norm_mode not in NORM_MODES:
        raise ConfigError(f"norm_mode must be one of {NORM_MODES}")
    records = read_dataset(cfg.dataset)
    amrs = read_amr_index(cfg.amr)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for rec in sorted(records, key=lambda r: r.question_id):
        g = question_graph(rec, amrs, cfg.norm_mode, cfg.exclude_question_concept)
        if not g.adjacency:
            log.warning("question %s: documents share no concepts; graph has no edges", rec.question_id)
        (out / f"{rec.question_id}.json").write_text(g.dumps() + "\n", encoding="utf-8")
    return 0


def read_graphs(graphs_dir: str) -> dict[str, DocumentGraph]:
    out = {}
    for path in sorted(Path(graphs_dir).glob("*.json")):
        g = DocumentGraph.from_json(json.loads(path.read_text(encoding="utf-8")))
        out[g.question_id] = g
    return out


def examples_for(records, strategy: str, amr_path: str, graphs_dir: str, embeddings_dir: str,
                 encoder: HashEncoder, norm_mode: str, exclude_question_concept: bool, amrs=None):
    if amrs is None and amr_path:
        amrs = read_amr_index(amr_path)
    graphs = read_graphs(graphs_dir) if graphs_dir else None
    try:
        return build_examples(records, strategy, amrs=amrs, encoder=encoder,
                              embeddings_dir=embeddings_dir or None, graphs=graphs,
                              norm_mode=norm_mode, exclude_question_concept=exclude_question_concept)
    except KeyError as exc:
        raise MissingAmr(str(exc)) from None


def cmd_train(cfg: RunConfig) -> int:
    cfg.validate()
    enc = cfg.encoder()
    amrs = read_amr_index(cfg.amr) if cfg.amr else None
    common = dict(strategy=cfg.strategy, amr_path="", graphs_dir=cfg.graphs_dir,
                  embeddings_dir=cfg.embeddings_dir, encoder=enc, norm_mode=cfg.norm_mode,
                  exclude_question_concept=cfg.exclude_question_concept, amrs=amrs)
    train_set = examples_for(read_dataset(cfg.train), **common)
    dev_set = examples_for(read_dataset(cfg.dev), **common) if cfg.dev else []
    message_passing = STRATEGIES[cfg.strategy][0]
    model = GcnModel.init(enc.dim, cfg.hidden_dim, cfg.num_layers, cfg.dropout, cfg.seed, message_passing)
    result = train(train_set, dev_set, model, cfg.train_config())

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    extra = {"encoder_dim": enc.dim, "encoder_seed": enc.seed, "norm_mode": cfg.norm_mode,
             "exclude_question_concept": cfg.exclude_question_concept}
    save_checkpoint(result.model, out / "model.ckpt", strategy=cfg.strategy, step=result.best_step, extra=extra)
    with open(out / "train_log.jsonl", "w", encoding="utf-8") as fh:
        for entry in result.log:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
    (out / "run_config.json").write_text(json.dumps(dataclasses.asdict(cfg), indent=2, sort_keys=True) + "\n")
    best = max(result.log, key=lambda e: e["dev_mrr"])
    print(f"best step {result.best_step}: dev MRR {best['dev_mrr']:.4f}, dev MHits@10 {best['dev_mhits10']:.4f}")
    return 0


def cmd_rerank(cfg: RerankConfig) -> int:
    model, header = load_checkpoint(cfg.checkpoint)
    extra = header.get("extra", {})
    enc = HashEncoder(extra.get("encoder_dim", model.in_dim), extra.get("encoder_seed", 0))
    strategy = header.get("strategy") or ("gcn" if model.message_passing else "mlp")
    if strategy not in STRATEGIES:
        raise CheckpointError(f"checkpoint names unknown strategy {strategy!r}")
    records = read_dataset(cfg.dataset)
    examples = examples_for(records, strategy, cfg.amr, cfg.graphs_dir, cfg.embeddings_dir, enc,
                            extra.get("norm_mode", "per_channel_dims"),
                            extra.get("exclude_question_concept", False))
    scores = {}
    for rec, ex in zip(records, examples):
        s = predict(model, ex.inputs)
        scores[rec.question_id] = dict(zip(rec.doc_ids, s.tolist()))
    Path(cfg.out).parent.mkdir(parents=True, exist_ok=True)
    metrics.write_scores_tsv(scores, cfg.out)
    return 0


def cmd_eval(cfg: EvalConfig) -> int:
    report = metrics.eval_scores_file(cfg.scores, cfg.qrels)
    if cfg.out:
        Path(cfg.out).write_text(metrics.report_json(report) + "\n")
    print(report.table())
    return 0


def sssp_histogram(graphs, positives: set[tuple[str, str]]) -> dict:
    buckets = {"positive": Counter(), "negative": Counter()}
    for g in graphs:
        label = "positive" if (g.question_id, g.doc_id) in positives else "negative"
        buckets[label][len(amr_mod.sssp_from_question(g))] += 1
    out = {}
    for label, counts in buckets.items():
        n = sum(counts.values())
        out[label] = {
            "n_docs": n,
            "mean_sssp": (sum(k * v for k, v in counts.items()) / n) if n else None,
            "histogram": {str(k): counts[k] for k in sorted(counts)},
        }
    return out


def cmd_report_paths(cfg: ReportPathsConfig) -> int:
    with open(cfg.amr, encoding="utf-8") as fh:
        graphs = amr_mod.load_amr_jsonl(fh)
    positives = set()
    if cfg.qrels:
        positives = {(q, d) for q, docs in metrics.read_qrels_tsv(cfg.qrels).items() for d in docs}
    report = json.dumps(sssp_histogram(graphs, positives), indent=2, sort_keys=True)
    if cfg.out:
        Path(cfg.out).write_text(report + "\n")
    print(report)
    return 0


def cmd_gen_synthetic(cfg: GenSyntheticConfig) -> int:
    try:
        corpus = generate_synthetic(cfg.seed, cfg.n_questions, cfg.docs_per_q, cfg.positives_per_q,
                                    n_dev=cfg.dev_questions)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    write_synthetic(corpus, cfg.out_dir)
    return 0


COMMANDS: dict[str, tuple[type, Callable[[Any], int], str]] = {
    "parse-amr": (ParseAmrConfig, cmd_parse_amr, "convert Penman files to AMR JSONL"),
    "build-graphs": (BuildGraphsConfig, cmd_build_graphs, "build one document graph per question"),
    "train": (RunConfig, cmd_train, "train a reranker"),
    "rerank": (RerankConfig, cmd_rerank, "score documents with a trained checkpoint"),
    "eval": (EvalConfig, cmd_eval, "evaluate a score file against qrels"),
    "report-paths": (ReportPathsConfig, cmd_report_paths, "histogram of SSSP counts, positives vs negatives"),
    "gen-synthetic": (GenSyntheticConfig, cmd_gen_synthetic, "write the planted-answer synthetic corpus"),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="grag", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (cls, _, help_text) in COMMANDS.items():
        add_options(sub.add_parser(name, help=help_text), cls)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    cls, fn, _ = COMMANDS[args.command]
    try:
        return fn(resolve_config(cls, args))
    except INPUT_ERRORS as exc:
        print(f"grag {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        log.debug("runtime failure", exc_info=True)
        print(f"grag {args.command}: runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
