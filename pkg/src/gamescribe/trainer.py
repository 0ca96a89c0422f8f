"""Supervised training of the factored objective with teacher forcing.

The loss of one labeled summary decomposes over heads: the transition term
covers every position; entity and attribute terms cover record positions;
the numeral term covers record positions with numeric attributes; the word
term covers the remaining positions (copied tokens contribute no word
term).  State updates always consume the gold decisions.

Optimization follows AMSGrad (max-tracked second moment, no bias
correction) from Xavier-initialized parameters, batch size 1, gradients
clipped at a global norm.  Model selection keeps the checkpoint with the
best dev BLEU.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import ParamStore, Tensor, backward
from .model import (
    ModelConfig,
    ModelParams,
    advance_lm,
    attribute_scores,
    build_game_embeddings,
    config_hash,
    context_vector,
    entity_scores,
    init_states,
    numeral_logit,
    refresh_tracker,
    transition_logit,
    update_tracker_attribute,
    update_tracker_entity,
    word_logits,
)
from .records import Dataset, GameData, LabeledSummary, is_numeric_attribute
from .vocab import EOD, Vocabularies, build_vocabularies

HEADS = ("z", "e", "a", "n", "y")


class LabelMismatch(ValueError):
    """A gold label cannot be scored against the game/vocabulary."""


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, step: int, game_id: str, value: float) -> None:
        super().__init__(
            f"non-finite loss {value!r} at epoch {epoch}, step {step}, game {game_id}"
        )
        self.epoch, self.step, self.game_id = epoch, step, game_id


@dataclass
class TrainConfig:
    embed_dim: int = 128
    hidden_dim: int = 512
    side_dim: int = 8
    learning_rate: float = 2e-3
    epochs: int = 30
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip_norm: float = 5.0
    seed: int = 0
    word_min_freq: int = 2
    use_writer: bool = False
    max_len: int = 700
    eval_every: int = 1
    early_stop_accuracy: Optional[float] = None
    dtype: str = "float64"

    def __post_init__(self) -> None:
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, obj: dict) -> "TrainConfig":
        unknown = set(obj) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown train config keys: {sorted(unknown)}")
        return cls(**obj)

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            embed_dim=self.embed_dim,
            hidden_dim=self.hidden_dim,
            side_dim=self.side_dim,
            use_writer=self.use_writer,
            dtype=self.dtype,
        )


@dataclass
class LossBreakdown:
    """Per-head negative log-likelihood sums, differentiable."""

    z_loss: Tensor
    e_loss: Tensor
    a_loss: Tensor
    n_loss: Tensor
    y_loss: Tensor
    counts: dict[str, int] = field(default_factory=dict)
    correct: dict[str, int] = field(default_factory=dict)

    @property
    def total(self) -> Tensor:
        return self.z_loss + self.e_loss + self.a_loss + self.n_loss + self.y_loss

    def as_floats(self) -> dict[str, float]:
        out = {f"{h}_loss": float(getattr(self, f"{h}_loss").data) for h in HEADS}
        out["total"] = float(self.total.data)
        return out

    def accuracies(self) -> dict[str, float]:
        return {
            h: (self.correct[h] / self.counts[h]) if self.counts.get(h) else 1.0
            for h in HEADS
        }


def _zero() -> Tensor:
    return Tensor(np.asarray(0.0))


def with_end_marker(labels: LabeledSummary) -> LabeledSummary:
    """Training view of a summary: an <EoD> step (z=0) closes the document."""
    return LabeledSummary(
        game_id=labels.game_id,
        tokens=labels.tokens + (EOD,),
        z=labels.z + (0,),
        e=labels.e + (None,),
        a=labels.a + (None,),
        n=labels.n + (None,),
    )


def sequence_loss(
    params: ModelParams,
    game: GameData,
    labels: LabeledSummary,
    writer_index: Optional[int] = None,
    track_accuracy: bool = False,
) -> LossBreakdown:
    """Teacher-forced loss over one labeled summary.

    When track_accuracy is set, argmax/threshold decisions are compared to
    the gold labels position by position (states still follow gold).
    """
    vocabs = params.vocabs
    embeddings = build_game_embeddings(params, game)
    lm, tracker = init_states(params, embeddings)
    out = LossBreakdown(_zero(), _zero(), _zero(), _zero(), _zero())
    counts = dict.fromkeys(HEADS, 0)
    correct = dict.fromkeys(HEADS, 0)

    for t in range(len(labels.tokens)):
        token, z = labels.tokens[t], labels.z[t]
        z_logit = transition_logit(params, lm, tracker)
        out.z_loss = out.z_loss + ad.bce_with_logits(z_logit, z)
        counts["z"] += 1
        if track_accuracy:
            correct["z"] += int((float(z_logit.data) >= 0.0) == bool(z))
        if z == 1:
            eid, aid = labels.e[t], labels.a[t]
            if eid not in game.entities:
                raise LabelMismatch(f"position {t}: entity {eid!r} not in game {game.game_id}")
            scores = entity_scores(params, lm, tracker, embeddings)
            out.e_loss = out.e_loss + scores.nll(eid)
            counts["e"] += 1
            if track_accuracy:
                correct["e"] += int(scores.argmax() == eid)
            tracker = update_tracker_entity(params, tracker, eid, embeddings)
            attr = attribute_scores(params, eid, lm, tracker, embeddings, game)
            if aid not in attr.ids:
                raise LabelMismatch(
                    f"position {t}: no record ({eid}, {aid}) in game {game.game_id}"
                )
            out.a_loss = out.a_loss + attr.nll(aid)
            counts["a"] += 1
            if track_accuracy:
                correct["a"] += int(attr.argmax() == aid)
            tracker = update_tracker_attribute(params, tracker, eid, aid, embeddings, t)
            if is_numeric_attribute(aid):
                n = labels.n[t]
                n_logit = numeral_logit(params, lm, tracker)
                out.n_loss = out.n_loss + ad.bce_with_logits(n_logit, n)
                counts["n"] += 1
                if track_accuracy:
                    correct["n"] += int((float(n_logit.data) >= 0.0) == bool(n))
        context = context_vector(params, lm, tracker, writer_index)
        if z == 0:
            word_idx = vocabs.words.index(token)
            logits = word_logits(params, context)
            out.y_loss = out.y_loss + ad.nll_from_logits(logits, word_idx)
            counts["y"] += 1
            if track_accuracy:
                correct["y"] += int(int(np.argmax(logits.data)) == word_idx)
        lm = advance_lm(params, lm, vocabs.words.index(token), context)
        if token == ".":
            tracker = refresh_tracker(params, tracker)

    out.counts = counts
    out.correct = correct
    return out


def corpus_loss(
    params: ModelParams,
    pairs: Sequence[tuple[GameData, LabeledSummary]],
    use_writer: bool = False,
) -> float:
    total = 0.0
    for game, labels in pairs:
        widx = params.vocabs.writers.index(game.writer) if use_writer else None
        total += float(sequence_loss(params, game, labels, widx).total.data)
    return total


# --------------------------------------------------------------------------
# Optimization


def xavier_init(shape: Sequence[int], seed: int) -> Tensor:
    """Uniform Xavier sample, reproducible from the seed."""
    return Tensor(ad.xavier_uniform(shape, np.random.default_rng(seed)))


@dataclass
class AmsGradState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    v_hat: dict[str, np.ndarray]

    @classmethod
    def for_values(cls, values: dict[str, np.ndarray]) -> "AmsGradState":
        return cls(
            m={k: np.zeros_like(a) for k, a in values.items()},
            v={k: np.zeros_like(a) for k, a in values.items()},
            v_hat={k: np.zeros_like(a) for k, a in values.items()},
        )


def amsgrad_step(
    values: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AmsGradState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> AmsGradState:
    """One AMSGrad update, in place on values.

    First and second moments decay as in Adam; the second moment used in the
    denominator is the coordinatewise running maximum, and no bias
    correction is applied.
    """
    for name, g in grads.items():
        state.m[name] = beta1 * state.m[name] + (1.0 - beta1) * g
        state.v[name] = beta2 * state.v[name] + (1.0 - beta2) * g * g
        np.maximum(state.v_hat[name], state.v[name], out=state.v_hat[name])
        values[name] -= lr * state.m[name] / (np.sqrt(state.v_hat[name]) + eps)
    return state


class AmsGrad:
    """AMSGrad over a ParamStore."""

    def __init__(self, store: ParamStore, lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8) -> None:
        self.store = store
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.state = AmsGradState.for_values({p.name: p.data for p in store})

    def step(self) -> None:
        values = {p.name: p.data for p in self.store}
        grads = {p.name: p.grad for p in self.store}
        amsgrad_step(values, grads, self.state, self.lr, self.beta1, self.beta2, self.eps)


def clip_global_norm(store: ParamStore, max_norm: float) -> float:
    """Scale all gradients so their joint L2 norm is at most max_norm."""
    norm = store.global_grad_norm()
    if max_norm > 0 and norm > max_norm:
        factor = max_norm / norm
        for p in store:
            p.grad *= factor
    return norm


# --------------------------------------------------------------------------
# Training loop


@dataclass
class TrainResult:
    params: ModelParams
    history: list[dict]
    best_epoch: int
    best_dev_bleu: float


def evaluate_accuracy(
    params: ModelParams,
    pairs: Sequence[tuple[GameData, LabeledSummary]],
    use_writer: bool = False,
) -> dict[str, float]:
    """Teacher-forced decision accuracy per head over a labeled corpus."""
    counts = dict.fromkeys(HEADS, 0)
    correct = dict.fromkeys(HEADS, 0)
    for game, labels in pairs:
        widx = params.vocabs.writers.index(game.writer) if use_writer else None
        loss = sequence_loss(params, game, with_end_marker(labels), widx, track_accuracy=True)
        for h in HEADS:
            counts[h] += loss.counts[h]
            correct[h] += loss.correct[h]
    return {h: (correct[h] / counts[h]) if counts[h] else 1.0 for h in HEADS}


def train(
    dataset: Dataset,
    config: TrainConfig,
    out_dir: Optional[Path] = None,
    log_fn: Optional[Callable[[dict], None]] = None,
) -> TrainResult:
    """Train on the labeled train split; keep the best-dev-BLEU parameters.

    Deterministic for a fixed config on a single thread.  Falls back to the
    train split for model selection when the dev split is empty.  Raises
    TrainingDiverged on a non-finite loss.
    """
    from .decoder import generate  # local import; decoder depends on model only
    from .metrics import corpus_bleu

    train_pairs = [(g, lab) for g, lab in dataset.train if lab is not None]
    if not train_pairs:
        raise ValueError("training split has no labeled summaries")
    dev_pairs = [(g, lab) for g, lab in dataset.dev if lab is not None or g.summary]
    selection_pairs = dev_pairs if dev_pairs else train_pairs
    selection_split = "dev" if dev_pairs else "train"

    vocabs = build_vocabularies(dataset, config.word_min_freq)
    params = ModelParams(config.model_config(), vocabs, seed=config.seed)
    optimizer = AmsGrad(params.store, config.learning_rate, config.beta1, config.beta2, config.eps)
    rng = np.random.default_rng(config.seed)
    forced = [(g, with_end_marker(lab)) for g, lab in train_pairs]

    def decode_bleu() -> float:
        refs, hyps = [], []
        cap = max((len(lab.tokens) if lab else len(g.summary) for g, lab in selection_pairs), default=0)
        cap = min(config.max_len, 2 * cap + 20)
        for game, lab in selection_pairs:
            ref = list(lab.tokens if lab is not None else game.summary)
            writer = game.writer if config.use_writer else None
            trace = generate(params, game, writer=writer, max_len=cap)
            refs.append(ref)
            hyps.append(list(trace.tokens))
        return corpus_bleu(hyps, refs).score

    history: list[dict] = []
    best_bleu, best_epoch, best_values = -1.0, 0, params.store.clone_values()
    step = 0
    for epoch in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        order = rng.permutation(len(forced))
        epoch_loss = dict.fromkeys([f"{h}_loss" for h in HEADS], 0.0)
        epoch_loss["total"] = 0.0
        counts = dict.fromkeys(HEADS, 0)
        correct = dict.fromkeys(HEADS, 0)
        for i in order:
            game, labels = forced[i]
            step += 1
            widx = vocabs.writers.index(game.writer) if config.use_writer else None
            params.store.zero_grads()
            loss = sequence_loss(params, game, labels, widx, track_accuracy=True)
            total = loss.total
            value = float(total.data)
            if not np.isfinite(value):
                raise TrainingDiverged(epoch, step, game.game_id, value)
            backward(total)
            clip_global_norm(params.store, config.clip_norm)
            optimizer.step()
            for key, val in loss.as_floats().items():
                epoch_loss[key] += val
            for h in HEADS:
                counts[h] += loss.counts[h]
                correct[h] += loss.correct[h]

        accuracy = {h: (correct[h] / counts[h]) if counts[h] else 1.0 for h in HEADS}
        run_eval = epoch % config.eval_every == 0 or epoch == config.epochs
        stop_early = config.early_stop_accuracy is not None and all(
            accuracy[h] >= config.early_stop_accuracy for h in HEADS
        )
        dev_bleu = decode_bleu() if (run_eval or stop_early) else None
        if dev_bleu is not None and dev_bleu > best_bleu:
            best_bleu, best_epoch = dev_bleu, epoch
            best_values = params.store.clone_values()
        entry = {
            "epoch": epoch,
            "loss": {k: round(v, 6) for k, v in epoch_loss.items()},
            "accuracy": {h: round(accuracy[h], 6) for h in HEADS},
            "selection_split": selection_split,
            "dev_bleu": None if dev_bleu is None else round(dev_bleu, 4),
            "seconds": round(time.perf_counter() - t0, 3),
        }
        history.append(entry)
        if log_fn is not None:
            log_fn(entry)
        if stop_early:
            break

    params.store.load_values(best_values)
    if out_dir is not None:
        meta = {
            "train_config": config.as_dict(),
            "config_sha256": config_hash(config.as_dict()),
            "best_epoch": best_epoch,
            "best_dev_bleu": best_bleu,
            "selection_split": selection_split,
        }
        params.save(Path(out_dir), extra_meta=meta)
        log_path = Path(out_dir) / "epochs.jsonl"
        with log_path.open("w", encoding="utf-8") as fh:
            for entry in history:
                fh.write(json.dumps(entry) + "\n")
    return TrainResult(params=params, history=history, best_epoch=best_epoch, best_dev_bleu=best_bleu)
