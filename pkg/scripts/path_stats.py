"""Shortest-path counts from the question node, positives vs negatives.

    python scripts/path_stats.py --amr corpus/amr.jsonl --qrels corpus/qrels_train.tsv
    python scripts/path_stats.py --synthetic-seed 7
"""

import argparse
import json
import tempfile
from pathlib import Path

from grag.amr import load_amr_jsonl
from grag.cli import sssp_histogram
from grag.data import generate_synthetic, write_synthetic
from grag.metrics import read_qrels_tsv


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--amr")
    ap.add_argument("--qrels")
    ap.add_argument("--synthetic-seed", type=int, default=7)
    args = ap.parse_args()
    with tempfile.TemporaryDirectory() as tmp:
        if args.amr:
            amr_path, qrels_path = Path(args.amr), args.qrels
        else:
            write_synthetic(generate_synthetic(args.synthetic_seed, 200, n_dev=50), tmp)
            amr_path, qrels_path = Path(tmp) / "amr.jsonl", Path(tmp) / "qrels_train.tsv"
        with open(amr_path, encoding="utf-8") as fh:
            graphs = load_amr_jsonl(fh)
        positives = set()
        if qrels_path:
            positives = {(q, d) for q, docs in read_qrels_tsv(qrels_path).items() for d in docs}
        stats = sssp_histogram(graphs, positives)
    for label, s in stats.items():
        mean = "n/a" if s["mean_sssp"] is None else f"{s['mean_sssp']:.2f}"
        print(f"{label:<9} docs {s['n_docs']:>5}  mean paths {mean}")
        print("          " + json.dumps(s["histogram"]))


if __name__ == "__main__":
    main()
