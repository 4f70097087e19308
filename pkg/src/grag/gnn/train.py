"""Mini-batch training with AdamW, linear warm-up, and best-dev checkpoint selection."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from grag import metrics
from grag.gnn.losses import ce_loss, mean_pairwise_loss, ranking_pairs
from grag.gnn.model import GcnModel, GraphInputs, backward, forward, predict
from grag.seeding import derive_seed

log = logging.getLogger(__name__)

LOSSES = ("cross_entropy", "pairwise_ranking")


class EmptyDataset(ValueError):
    pass


class NoPositivesInDataset(ValueError):
    pass


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    batch_size: int = 5
    warmup_steps: int = 1000
    total_steps: int = 50_000
    eval_every: int = 10_000
    loss: str = "pairwise_ranking"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01
    pair_cap: int = 500
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.loss not in LOSSES:
            raise ValueError(f"loss must be one of {LOSSES}, got {self.loss!r}")
        for name in ("learning_rate", "batch_size", "total_steps", "eval_every", "pair_cap", "eps"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.warmup_steps < 0 or self.weight_decay < 0:
            raise ValueError("warmup_steps and weight_decay must be non-negative")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("betas must lie in [0, 1)")
        if self.total_steps % self.eval_every:
            raise ValueError("eval_every must divide total_steps")


@dataclass(frozen=True)
class Example:
    inputs: GraphInputs
    labels: np.ndarray

    @property
    def has_positive(self) -> bool:
        return bool(np.any(self.labels > 0))


def learning_rate(step: int, cfg: TrainConfig) -> float:
    """Rate used by update number ``step`` (1-based): linear ramp, then constant."""
    if cfg.warmup_steps == 0:
        return cfg.learning_rate
    return cfg.learning_rate * min(1.0, step / cfg.warmup_steps)


class AdamW:
    def __init__(self, model: GcnModel, cfg: TrainConfig):
        self.cfg = cfg
        self.m = model.zeros_like()
        self.v = model.zeros_like()
        self.t = 0

    def step(self, model: GcnModel, grads, lr: float) -> None:
        c = self.cfg
        self.t += 1
        bc1 = 1.0 - c.beta1 ** self.t
        bc2 = 1.0 - c.beta2 ** self.t
        for p, g, m, v in zip(model.layers, grads, self.m, self.v):
            for name, w in p.items():
                m[name] = c.beta1 * m[name] + (1 - c.beta1) * g[name]
                v[name] = c.beta2 * v[name] + (1 - c.beta2) * g[name] ** 2
                update = (m[name] / bc1) / (np.sqrt(v[name] / bc2) + c.eps)
                w -= lr * (update + c.weight_decay * w)
        model.bump()


def question_loss(model: GcnModel, ex: Example, cfg: TrainConfig, step: int = 0, slot: int = 0,
                  train_mode: bool = True):
    """Loss and parameter gradients for a single question."""
    state, cache = forward(model, ex.inputs, train_mode=train_mode, step=step, slot=slot)
    scores = state.node_reps @ ex.inputs.y
    if cfg.loss == "cross_entropy":
        loss, dscores = ce_loss(scores, ex.labels)
    else:
        rng = np.random.default_rng([derive_seed(cfg.seed, "pairs") & 0xFFFFFFFF, step, slot])
        loss, dscores = mean_pairwise_loss(scores, ranking_pairs(ex.labels, cfg.pair_cap, rng))
    grads, _ = backward(model, cache, dscores)
    return loss, grads


def dataset_loss(model: GcnModel, examples: Sequence[Example], cfg: TrainConfig) -> float:
    """Mean loss over ``examples`` in eval mode (no dropout)."""
    vals = [question_loss(model, ex, cfg, train_mode=False)[0] for ex in examples]
    return float(np.mean(vals)) if vals else 0.0


def rankings_for(model: GcnModel, examples: Sequence[Example]):
    out = []
    for ex in examples:
        ranking = metrics.ranks_from_scores(predict(model, ex.inputs))
        out.append((ranking, np.nonzero(ex.labels > 0)[0].tolist()))
    return out


def evaluate_model(model: GcnModel, examples: Sequence[Example]) -> dict[str, float]:
    r = rankings_for(model, examples)
    return {"mrr": metrics.mrr(r), "mhits10": metrics.mhits10(r)}


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("GRAG_THREADS", "1")))
    except ValueError:
        return 1


class BatchSampler:
    """Question indices in seeded per-epoch permutations."""

    def __init__(self, n: int, batch_size: int, seed: int):
        self.n = n
        self.batch_size = batch_size
        self.rng = np.random.default_rng(derive_seed(seed, "batches"))
        self.queue: list[int] = []

    def next(self) -> list[int]:
        batch = []
        while len(batch) < self.batch_size:
            if not self.queue:
                self.queue = self.rng.permutation(self.n).tolist()
            batch.append(self.queue.pop(0))
        return batch


@dataclass
class TrainResult:
    model: GcnModel
    log: list[dict] = field(default_factory=list)
    step_losses: list[float] = field(default_factory=list)
    best_step: int = 0


def train(
    train_set: Sequence[Example],
    dev_set: Sequence[Example],
    model: GcnModel,
    cfg: TrainConfig,
) -> TrainResult:
    """Train ``model`` in place; returns the parameters with the best dev MRR.

    Dev metrics are computed at step 0 and every ``eval_every`` steps. Each
    log entry's ``loss`` is the mean batch loss since the previous entry.
    """
    if not train_set:
        raise EmptyDataset("no training questions")
    if not any(ex.has_positive for ex in train_set):
        raise NoPositivesInDataset("no training question has a positive document")
    cfg.validate()

    opt = AdamW(model, cfg)
    sampler = BatchSampler(len(train_set), cfg.batch_size, cfg.seed)
    result = TrainResult(model.copy())
    best = -1.0
    pending: list[float] = []
    threads = worker_count()

    def record(step: int, lr: float):
        nonlocal best
        dev = evaluate_model(model, dev_set) if dev_set else {"mrr": 0.0, "mhits10": 0.0}
        entry = {
            "step": step,
            "loss": float(np.mean(pending)) if pending else None,
            "lr": lr,
            "dev_mrr": dev["mrr"],
            "dev_mhits10": dev["mhits10"],
        }
        result.log.append(entry)
        log.info("step %d loss %s dev_mrr %.4f", step, entry["loss"], dev["mrr"])
        if dev["mrr"] > best:
            best = dev["mrr"]
            result.model = model.copy()
            result.best_step = step
        pending.clear()

    record(0, 0.0)
    pool = ThreadPoolExecutor(threads) if threads > 1 else None
    try:
        for step in range(1, cfg.total_steps + 1):
            batch = sampler.next()

            def run(slot_idx):
                slot, idx = slot_idx
                return question_loss(model, train_set[idx], cfg, step=step, slot=slot)

            jobs = list(enumerate(batch))
            outs = list(pool.map(run, jobs)) if pool else [run(j) for j in jobs]
            total = model.zeros_like()
            batch_loss = 0.0
            for loss, grads in outs:
                batch_loss += loss
                for t, g in zip(total, grads):
                    for name in t:
                        t[name] += g[name]
            for t in total:
                for name in t:
                    t[name] /= len(batch)
            lr = learning_rate(step, cfg)
            opt.step(model, total, lr)
            result.step_losses.append(batch_loss / len(batch))
            pending.append(batch_loss / len(batch))
            if step % cfg.eval_every == 0:
                record(step, lr)
    finally:
        if pool:
            pool.shutdown()
    return result


def config_dict(cfg: TrainConfig) -> dict:
    return asdict(cfg)
