"""Glue from question records + AMRs to model-ready examples."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from grag.amr import AmrGraph, amr_text, sssp_from_question
from grag.data import QuestionRecord
from grag.docgraph import DocumentGraph, build_document_graph, empty_graph
from grag.encoder import EmbeddingSet, HashEncoder, build_node_features, load_embeddings
from grag.gnn import STRATEGIES
from grag.gnn.model import prepare_inputs
from grag.gnn.train import Example

log = logging.getLogger(__name__)


class MissingAmr(KeyError):
    pass


AmrIndex = Mapping[tuple[str, str], AmrGraph]


def index_amrs(graphs: Iterable[AmrGraph]) -> dict[tuple[str, str], AmrGraph]:
    out = {}
    for g in graphs:
        key = (g.question_id, g.doc_id)
        if key in out:
            raise ValueError(f"two AMR graphs for question {key[0]!r} document {key[1]!r}")
        out[key] = g
    return out


def amrs_for(record: QuestionRecord, amrs: AmrIndex) -> list[AmrGraph]:
    out = []
    for did in record.doc_ids:
        g = amrs.get((record.question_id, did))
        if g is None:
            raise MissingAmr(f"no AMR graph for question {record.question_id!r} document {did!r}")
        out.append(g)
    return out


def question_graph(record: QuestionRecord, amrs: AmrIndex | None, norm_mode: str = "per_channel_dims",
                   exclude_question_concept: bool = False) -> DocumentGraph:
    if amrs is None:
        return empty_graph(record.question_id, record.doc_ids)
    return build_document_graph(amrs_for(record, amrs), record.question_id, norm_mode,
                                 exclude_question_concept)


def question_features(record: QuestionRecord, amrs: AmrIndex | None, mode: str,
                      encoder: HashEncoder) -> EmbeddingSet:
    texts = {}
    if mode == "amr_augmented":
        if amrs is None:
            raise MissingAmr("AMR-augmented features need AMR graphs")
        texts = {g.doc_id: amr_text(sssp_from_question(g)) for g in amrs_for(record, amrs)}
    docs = [(d.doc_id, d.text) for d in record.docs]
    return build_node_features(docs, texts, mode, encoder, record.question_text)


def build_examples(
    records: Sequence[QuestionRecord],
    strategy: str,
    amrs: AmrIndex | None = None,
    encoder: HashEncoder | None = None,
    embeddings_dir: str | Path | None = None,
    graphs: Mapping[str, DocumentGraph] | None = None,
    norm_mode: str = "per_channel_dims",
    exclude_question_concept: bool = False,
) -> list[Example]:
    """One :class:`Example` per record.

    Features come from ``embeddings_dir/<question_id>.emb`` when given, else
    from ``encoder``. Graphs come from ``graphs`` when given, else are built
    from ``amrs``; strategy ``mlp`` never needs either.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; expected one of {sorted(STRATEGIES)}")
    message_passing, mode, _ = STRATEGIES[strategy]
    out = []
    for rec in records:
        if not message_passing:
            graph = empty_graph(rec.question_id, rec.doc_ids)
        elif graphs is not None:
            graph = graphs[rec.question_id]
            if tuple(graph.doc_ids) != rec.doc_ids:
                raise ValueError(f"graph for {rec.question_id!r} lists different documents")
        else:
            if amrs is None:
                raise MissingAmr(f"strategy {strategy!r} needs AMR graphs or prebuilt document graphs")
            graph = question_graph(rec, amrs, norm_mode, exclude_question_concept)
        if embeddings_dir is not None:
            emb = load_embeddings(Path(embeddings_dir) / f"{rec.question_id}.emb")
        else:
            if encoder is None:
                raise ValueError("need an encoder or an embeddings directory")
            emb = question_features(rec, amrs, mode, encoder)
        out.append(Example(prepare_inputs(graph, emb), rec.labels))
    return out
