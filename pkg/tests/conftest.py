import sys
from pathlib import Path

import hypothesis
import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from grag.amr import AmrGraph  # noqa: E402

hypothesis.settings.register_profile("default", max_examples=60, deadline=None)
hypothesis.settings.load_profile("default")

ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


def random_amr(rng: np.random.Generator, n_nodes: int, vocab: list[str], qid="q", did="d",
               connected=False, with_question=True, edge_prob=0.15) -> AmrGraph:
    ids = [f"v{k}" for k in range(n_nodes)]
    concepts = [vocab[i] for i in rng.integers(len(vocab), size=n_nodes)]
    if with_question:
        concepts[0] = "question"
    rels = ["ARG0", "ARG1", "mod", "op1"]
    edges = set()
    if connected:
        for k in range(1, n_nodes):
            parent = int(rng.integers(k))
            s, d = (ids[parent], ids[k]) if rng.random() < 0.5 else (ids[k], ids[parent])
            edges.add((s, rels[int(rng.integers(4))], d))
    for a in range(n_nodes):
        for b in range(n_nodes):
            if a != b and rng.random() < edge_prob / max(1, n_nodes / 8):
                edges.add((ids[a], rels[int(rng.integers(4))], ids[b]))
    return AmrGraph(qid, did, tuple(zip(ids, concepts)), tuple(sorted(edges)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
