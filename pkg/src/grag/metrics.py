"""Ranking metrics with explicit tie handling.

Ties are never broken arbitrarily. Every document gets its competition rank
(1 + number of strictly higher scores) and the size of its tie block; the
tie-aware metrics are computed from those two numbers.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

log = logging.getLogger(__name__)


class NonFiniteScore(ValueError):
    pass


class UnknownDocId(KeyError):
    pass


class MissingQuestion(KeyError):
    pass


@dataclass(frozen=True)
class TiedRanking:
    doc_ids: tuple[str, ...]
    ranks: np.ndarray
    tie_counts: np.ndarray

    def above(self, k: int) -> int:
        """Number of documents in tie blocks strictly above document ``k``."""
        return int(self.ranks[k]) - 1

    def higher_blocks(self, k: int) -> list[tuple[int, int]]:
        blocks = {(int(r), int(t)) for r, t in zip(self.ranks, self.tie_counts) if r < self.ranks[k]}
        return sorted(blocks)


def ranks_from_scores(scores: Sequence[float] | Mapping[str, float]) -> TiedRanking:
    if isinstance(scores, Mapping):
        ids = tuple(scores)
        s = np.array([scores[i] for i in ids], dtype=np.float64)
    else:
        s = np.asarray(scores, dtype=np.float64)
        ids = tuple(str(i) for i in range(len(s)))
    if not np.all(np.isfinite(s)):
        raise NonFiniteScore("scores must be finite")
    ordered = np.sort(s)
    # strictly higher = n - (index of first element > s)
    higher = len(s) - np.searchsorted(ordered, s, side="right")
    equal = np.searchsorted(ordered, s, side="right") - np.searchsorted(ordered, s, side="left")
    return TiedRanking(ids, higher + 1, equal)


# Per-positive terms. r: competition rank, t: tie block size.

def reciprocal_rank(r: int, t: int) -> float:
    return 1.0 / r


def tied_reciprocal_rank(r: int, t: int) -> float:
    if t == 1:
        return 1.0 / r
    return 2.0 / (2 * r + t - 1)


def hit_at(r: int, t: int, k: int = 10) -> float:
    return 1.0 if r <= k else 0.0


def tied_hit_at(r: int, t: int, k: int = 10) -> float:
    """Probability of landing in the top ``k`` when the tie block is shuffled uniformly."""
    return max(0, min(t, k - (r - 1))) / t


def _question_mean(ranking: TiedRanking, positives: Sequence[int], term) -> float:
    vals = [term(int(ranking.ranks[p]), int(ranking.tie_counts[p])) for p in positives]
    return math.fsum(vals) / len(vals)


def _mean_over_questions(rankings, term) -> float:
    per_q = [_question_mean(r, pos, term) for r, pos in rankings if len(pos)]
    if not per_q:
        return 0.0
    return math.fsum(per_q) / len(per_q)


def mrr(rankings: Iterable[tuple[TiedRanking, Sequence[int]]]) -> float:
    """Mean over questions of the mean reciprocal optimistic rank of positives.

    ``rankings`` yields ``(TiedRanking, positive_indices)`` pairs; questions
    without positives are skipped.
    """
    return _mean_over_questions(rankings, reciprocal_rank)


def mhits(rankings, k: int = 10) -> float:
    return _mean_over_questions(rankings, lambda r, t: hit_at(r, t, k))


def mhits10(rankings) -> float:
    return mhits(rankings, 10)


def mtrr(rankings) -> float:
    return _mean_over_questions(rankings, tied_reciprocal_rank)


def tmhits(rankings, k: int = 10) -> float:
    return _mean_over_questions(rankings, lambda r, t: tied_hit_at(r, t, k))


def tmhits10(rankings) -> float:
    return tmhits(rankings, 10)


@dataclass
class EvalReport:
    mrr: float
    mhits10: float
    mtrr: float
    tmhits10: float
    n_questions: int
    per_question: dict[str, dict] = field(default_factory=dict)
    excluded_questions: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "mrr": self.mrr,
            "mhits10": self.mhits10,
            "mtrr": self.mtrr,
            "tmhits10": self.tmhits10,
            "n_questions": self.n_questions,
            "excluded_questions": self.excluded_questions,
            "per_question": self.per_question,
        }

    def table(self) -> str:
        rows = [("metric", "value"), ("MRR", f"{self.mrr:.4f}"), ("MHits@10", f"{self.mhits10:.4f}"),
                ("MTRR", f"{self.mtrr:.4f}"), ("TMHits@10", f"{self.tmhits10:.4f}"),
                ("questions", str(self.n_questions)), ("excluded", str(len(self.excluded_questions)))]
        w = max(len(a) for a, _ in rows)
        return "\n".join(f"{a:<{w}}  {b:>8}" for a, b in rows)


def evaluate(
    scores: Mapping[str, Mapping[str, float]],
    qrels: Mapping[str, set[str]],
) -> EvalReport:
    """Score all questions in ``scores``; questions with no positives are excluded."""
    rankings = []
    per_q = {}
    excluded = []
    for qid in sorted(scores):
        doc_scores = scores[qid]
        positives = qrels.get(qid, set())
        unknown = positives - set(doc_scores)
        if unknown:
            raise UnknownDocId(f"qrels for {qid!r} name documents without scores: {sorted(unknown)}")
        if not positives:
            excluded.append(qid)
            continue
        ranking = ranks_from_scores(doc_scores)
        pos_idx = [k for k, d in enumerate(ranking.doc_ids) if d in positives]
        rankings.append((ranking, pos_idx))
        per_q[qid] = {
            "n_docs": len(ranking.doc_ids),
            "n_positives": len(pos_idx),
            "mrr": _question_mean(ranking, pos_idx, reciprocal_rank),
            "mhits10": _question_mean(ranking, pos_idx, lambda r, t: hit_at(r, t)),
            "mtrr": _question_mean(ranking, pos_idx, tied_reciprocal_rank),
            "tmhits10": _question_mean(ranking, pos_idx, lambda r, t: tied_hit_at(r, t)),
        }
    missing = sorted(set(qrels) - set(scores))
    if missing:
        raise MissingQuestion(f"qrels name questions absent from the score file: {missing}")
    if excluded:
        log.warning("%d question(s) without positives excluded", len(excluded))
    return EvalReport(
        mrr=mrr(rankings),
        mhits10=mhits10(rankings),
        mtrr=mtrr(rankings),
        tmhits10=tmhits10(rankings),
        n_questions=len(rankings),
        per_question=per_q,
        excluded_questions=excluded,
    )


def read_scores_tsv(path: str | Path) -> dict[str, dict[str, float]]:
    scores: dict[str, dict[str, float]] = defaultdict(dict)
    with open(path, newline="") as fh:
        for row in csv.reader(fh, delimiter="\t"):
            if not row:
                continue
            qid, did, val = row[0], row[1], float(row[2])
            scores[qid][did] = val
    return dict(scores)


def read_qrels_tsv(path: str | Path) -> dict[str, set[str]]:
    """Every listed question appears as a key; rows with a label other than 1 add no positive."""
    qrels: dict[str, set[str]] = defaultdict(set)
    with open(path, newline="") as fh:
        for row in csv.reader(fh, delimiter="\t"):
            if not row:
                continue
            qid, did = row[0], row[1]
            label = int(row[2]) if len(row) > 2 else 1
            qrels[qid]
            if label:
                qrels[qid].add(did)
    return dict(qrels)


def write_scores_tsv(scores: Mapping[str, Mapping[str, float]], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        for qid in sorted(scores):
            for did, val in scores[qid].items():
                fh.write(f"{qid}\t{did}\t{float(val)!r}\n")


def eval_scores_file(path: str | Path, qrels: Mapping[str, set[str]] | str | Path) -> EvalReport:
    if not isinstance(qrels, Mapping):
        qrels = read_qrels_tsv(qrels)
    return evaluate(read_scores_tsv(path), qrels)


def report_json(report: EvalReport) -> str:
    return json.dumps(report.to_json(), indent=2, sort_keys=True)
