"""Per-question document graphs built from pairwise AMR overlap."""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from grag.amr import QUESTION_CONCEPT, AmrGraph

NORM_MODES = ("per_channel_dims", "per_row_both")


class MixedQuestionIds(ValueError):
    pass


@dataclass(frozen=True)
class DocumentGraph:
    """Undirected graph over the ``n`` retrieved documents of one question.

    ``raw`` is the ``n x n x 2`` count tensor (common nodes, common edges) and
    ``norm`` its normalized counterpart; ``norm[i, j]`` is the feature carried
    by the message from document ``i`` to document ``j``.
    """

    question_id: str
    doc_ids: tuple[str, ...]
    raw: np.ndarray
    norm: np.ndarray
    norm_mode: str = "per_channel_dims"

    @property
    def n(self) -> int:
        return len(self.doc_ids)

    @property
    def adjacency_matrix(self) -> np.ndarray:
        return (self.raw[:, :, 0] > 0).astype(np.float64)

    @property
    def adjacency(self) -> set[tuple[int, int]]:
        i, j = np.nonzero(np.triu(self.raw[:, :, 0] > 0, k=1))
        return set(zip(i.tolist(), j.tolist()))

    @property
    def degree(self) -> np.ndarray:
        return self.adjacency_matrix.sum(axis=1)

    @property
    def active_nodes(self) -> list[int]:
        return np.nonzero(self.degree > 0)[0].tolist()

    def raw_edge_features(self) -> dict[tuple[int, int], tuple[int, int]]:
        return {(i, j): (int(self.raw[i, j, 0]), int(self.raw[i, j, 1])) for i, j in self.adjacency}

    def to_json(self) -> dict:
        edges = []
        for i, j in sorted(self.adjacency):
            for a, b in ((i, j), (j, i)):
                edges.append({
                    "i": a,
                    "j": b,
                    "common_nodes": int(self.raw[a, b, 0]),
                    "common_edges": int(self.raw[a, b, 1]),
                    "f1": float(self.norm[a, b, 0]),
                    "f2": float(self.norm[a, b, 1]),
                })
        return {
            "question_id": self.question_id,
            "doc_ids": list(self.doc_ids),
            "norm_mode": self.norm_mode,
            "edges": edges,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "DocumentGraph":
        n = len(obj["doc_ids"])
        raw = np.zeros((n, n, 2))
        norm = np.zeros((n, n, 2))
        for e in obj["edges"]:
            i, j = e["i"], e["j"]
            raw[i, j] = raw[j, i] = (e["common_nodes"], e["common_edges"])
            norm[i, j] = (e["f1"], e["f2"])
        return cls(obj["question_id"], tuple(obj["doc_ids"]), raw, norm,
                   obj.get("norm_mode", "per_channel_dims"))

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def common_counts(g_i: AmrGraph, g_j: AmrGraph, exclude_question_concept: bool = False) -> tuple[int, int]:
    """Shared distinct concepts and shared distinct (src, rel, dst) concept triples."""
    ci, cj = g_i.concept_set(), g_j.concept_set()
    ti, tj = g_i.triple_set(), g_j.triple_set()
    if exclude_question_concept:
        ci.discard(QUESTION_CONCEPT)
        cj.discard(QUESTION_CONCEPT)
        ti = {t for t in ti if QUESTION_CONCEPT not in (t[0], t[2])}
        tj = {t for t in tj if QUESTION_CONCEPT not in (t[0], t[2])}
    return len(ci & cj), len(ti & tj)


def normalize_edge_features(raw: np.ndarray, mode: str = "per_channel_dims") -> np.ndarray:
    """Normalize the ``n x n x 2`` count tensor.

    ``per_channel_dims``: channel 1 over the first index (column sums),
    channel 2 over the second index (row sums). ``per_row_both``: both
    channels over the second index. Zero denominators leave zeros.
    """
    if mode not in NORM_MODES:
        raise ValueError(f"unknown norm_mode {mode!r}; expected one of {NORM_MODES}")
    raw = np.asarray(raw, dtype=np.float64)
    out = np.zeros_like(raw)
    axes = (0, 1) if mode == "per_channel_dims" else (1, 1)
    for k, axis in enumerate(axes):
        ch = raw[:, :, k]
        denom = ch.sum(axis=axis, keepdims=True)
        np.divide(ch, denom, out=out[:, :, k], where=denom > 0)
    return out


def build_document_graph(
    amrs: Sequence[AmrGraph],
    question_id: str | None = None,
    norm_mode: str = "per_channel_dims",
    exclude_question_concept: bool = False,
) -> DocumentGraph:
    if not amrs:
        raise ValueError("build_document_graph needs at least one AMR graph")
    qid = amrs[0].question_id if question_id is None else question_id
    bad = [g.doc_id for g in amrs if g.question_id != qid]
    if bad:
        raise MixedQuestionIds(f"documents {bad} do not belong to question {qid!r}")
    n = len(amrs)
    raw = np.zeros((n, n, 2))
    for i, j in combinations(range(n), 2):
        nodes, edges = common_counts(amrs[i], amrs[j], exclude_question_concept)
        if nodes:
            raw[i, j] = raw[j, i] = (nodes, edges)
    return DocumentGraph(
        question_id=qid,
        doc_ids=tuple(g.doc_id for g in amrs),
        raw=raw,
        norm=normalize_edge_features(raw, norm_mode),
        norm_mode=norm_mode,
    )


def empty_graph(question_id: str, doc_ids: Sequence[str]) -> DocumentGraph:
    n = len(doc_ids)
    z = np.zeros((n, n, 2))
    return DocumentGraph(question_id, tuple(doc_ids), z, z.copy())
