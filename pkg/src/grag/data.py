"""Question records (JSONL) and the planted-answer synthetic corpus."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable

import numpy as np

from grag.amr import QUESTION_CONCEPT, AmrGraph, to_penman
from grag.seeding import derive_seed

N_MAX = 100


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class Document:
    doc_id: str
    text: str
    is_positive: bool = False


@dataclass(frozen=True)
class QuestionRecord:
    question_id: str
    question_text: str
    docs: tuple[Document, ...]

    def __post_init__(self):
        ids = [d.doc_id for d in self.docs]
        if len(set(ids)) != len(ids):
            raise DatasetError(f"duplicate doc ids in question {self.question_id!r}")
        if len(ids) > N_MAX:
            raise DatasetError(f"question {self.question_id!r} has {len(ids)} docs (max {N_MAX})")

    @property
    def doc_ids(self) -> tuple[str, ...]:
        return tuple(d.doc_id for d in self.docs)

    @property
    def labels(self) -> np.ndarray:
        return np.array([1.0 if d.is_positive else 0.0 for d in self.docs])

    @property
    def positives(self) -> set[str]:
        return {d.doc_id for d in self.docs if d.is_positive}

    def to_json(self) -> dict:
        return {
            "question_id": self.question_id,
            "question_text": self.question_text,
            "docs": [{"doc_id": d.doc_id, "text": d.text, "is_positive": d.is_positive} for d in self.docs],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "QuestionRecord":
        try:
            docs = tuple(Document(d["doc_id"], d["text"], bool(d.get("is_positive", False)))
                         for d in obj["docs"])
            return cls(obj["question_id"], obj["question_text"], docs)
        except (KeyError, TypeError) as exc:
            raise DatasetError(f"bad question record: {exc}") from None


def read_dataset(path: str | Path) -> list[QuestionRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                records.append(QuestionRecord.from_json(json.loads(line)))
            except (json.JSONDecodeError, DatasetError) as exc:
                raise DatasetError(f"{path}:{line_no}: {exc}") from None
    return records


def write_dataset(records: Iterable[QuestionRecord], stream: IO[str]) -> None:
    for r in records:
        stream.write(json.dumps(r.to_json(), sort_keys=True) + "\n")


def write_qrels(records: Iterable[QuestionRecord], stream: IO[str]) -> None:
    for r in records:
        for d in r.docs:
            if d.is_positive:
                stream.write(f"{r.question_id}\t{d.doc_id}\t1\n")


# ------------------------------------------------------------------ synthetic

_ONSETS = "b c d f g h j k l m n p r s t v w z".split()
_VOWELS = "a e i o u".split()
_RELATIONS = ("ARG0", "ARG1", "mod", "location", "time", "part-of", "manner")


def _word_list(rng: np.random.Generator, count: int) -> list[str]:
    words: list[str] = []
    seen: set[str] = set()
    while len(words) < count:
        n_syl = int(rng.integers(2, 4))
        w = "".join(_ONSETS[rng.integers(len(_ONSETS))] + _VOWELS[rng.integers(len(_VOWELS))]
                    for _ in range(n_syl))
        if w not in seen and w != QUESTION_CONCEPT:
            seen.add(w)
            words.append(w)
    return words


@dataclass
class SyntheticCorpus:
    train: list[QuestionRecord]
    dev: list[QuestionRecord]
    amrs: list[AmrGraph]


def _doc_amr(rng, qid, did, topics, doc_tokens, answer) -> AmrGraph:
    """AMR for "question: <question><document>": question node with its topic
    concepts, then a random tree over document concepts hanging off a shared
    topic (or off the question node). ``answer`` hangs directly off a topic."""
    nodes = [("q", QUESTION_CONCEPT), ("u", "amr-unknown")]
    edges = [("q", "ARG1", "u")]
    by_concept = {}
    for k, t in enumerate(topics):
        nid = f"t{k}"
        nodes.append((nid, t))
        edges.append(("q", "topic", nid))
        by_concept[t] = nid
    doc_nodes = []
    for tok in doc_tokens:
        if tok in by_concept or tok == answer:
            continue
        nid = f"n{len(doc_nodes)}"
        nodes.append((nid, tok))
        by_concept[tok] = nid
        doc_nodes.append(nid)
    anchors = [by_concept[t] for t in topics if t in doc_tokens] or ["q"]
    for k, nid in enumerate(doc_nodes):
        parent = anchors[int(rng.integers(len(anchors)))] if k == 0 else \
            ([*anchors, *doc_nodes[:k]])[int(rng.integers(len(anchors) + k))]
        edges.append((parent, _RELATIONS[int(rng.integers(len(_RELATIONS)))], nid))
    if answer is not None:
        nodes.append(("a", answer))
        edges.append((anchors[0], "ARG2", "a"))
    if doc_nodes and rng.random() < 0.3:
        nodes.append(("_c0", str(int(rng.integers(2, 20)))))
        edges.append((doc_nodes[0], "quant", "_c0"))
    return AmrGraph(qid, did, tuple(nodes), tuple(edges))


def generate_synthetic(
    seed: int,
    n_questions: int,
    docs_per_q: int = 20,
    positives_per_q: int = 2,
    n_dev: int = 0,
    filler: int = 4,
    pool_size: int = 4,
    answer_mentions: int = 4,
    question_prefix: str = "what is the name of the",
) -> SyntheticCorpus:
    """Separable corpus: each question's positives share a planted answer word
    that appears in their text and on a short AMR path from ``question``.

    Answers come from a small pool disjoint from the filler vocabulary and are
    mentioned ``answer_mentions`` times, so the signal transfers across
    questions and survives 64-dimensional feature hashing.
    """
    if not 0 < positives_per_q <= docs_per_q:
        raise ValueError("need 0 < positives_per_q <= docs_per_q")
    if docs_per_q > N_MAX:
        raise ValueError(f"docs_per_q must be <= {N_MAX}")
    rng = np.random.default_rng(derive_seed(seed, "synthetic"))
    words = _word_list(rng, 1200)
    pool, vocab = words[:pool_size], words[pool_size:]
    records, amrs = [], []
    width = max(2, len(str(docs_per_q - 1)))
    for qi in range(n_questions + n_dev):
        qid = f"q{qi:05d}"
        topics = [vocab[i] for i in rng.choice(len(vocab), size=4, replace=False)]
        answer = pool[int(rng.integers(len(pool)))]
        pos_slots = set(rng.choice(docs_per_q, size=positives_per_q, replace=False).tolist())
        docs = []
        for k in range(docs_per_q):
            did = f"d{k:0{width}d}"
            positive = k in pos_slots
            tokens = [vocab[i] for i in rng.choice(len(vocab), size=filler, replace=False)]
            n_topics = 2 if positive else int(rng.integers(1, 3))
            shared = [topics[i] for i in rng.choice(4, size=n_topics, replace=False)]
            tokens += shared
            if positive:
                tokens += [answer] * answer_mentions
            tokens = [tokens[i] for i in rng.permutation(len(tokens))]
            docs.append(Document(did, " ".join(tokens), positive))
            amrs.append(_doc_amr(rng, qid, did, topics, tokens, answer if positive else None))
        records.append(QuestionRecord(qid, " ".join([question_prefix, *topics]), tuple(docs)))
    return SyntheticCorpus(records[:n_questions], records[n_questions:], amrs)


def write_synthetic(corpus: SyntheticCorpus, out_dir: str | Path) -> None:
    from grag.amr import dump_amr_jsonl

    out = Path(out_dir)
    (out / "penman").mkdir(parents=True, exist_ok=True)
    split_of = {}
    for name, recs in (("train", corpus.train), ("dev", corpus.dev)):
        with open(out / f"{name}.jsonl", "w", encoding="utf-8") as fh:
            write_dataset(recs, fh)
        with open(out / f"qrels_{name}.tsv", "w", encoding="utf-8") as fh:
            write_qrels(recs, fh)
        split_of.update({r.question_id: name for r in recs})
    with open(out / "amr.jsonl", "w", encoding="utf-8") as fh:
        dump_amr_jsonl(corpus.amrs, fh)
    for name in ("train", "dev"):
        with open(out / "penman" / f"{name}.amr", "w", encoding="utf-8") as fh:
            for g in corpus.amrs:
                if split_of.get(g.question_id) == name:
                    fh.write(f"# ::id {g.question_id} {g.doc_id}\n{to_penman(g)}\n\n")
