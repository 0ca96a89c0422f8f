"""Forward computations of the select-track-generate model.

Per generation step the model decides, in order:

  1. transition: does this token realize a data record? (binary head over
     the language-model state and the tracking state)
  2. entity selection: softmax over the game's entities, scoring entities
     already mentioned through their stored tracker snapshot and fresh
     entities through their game-dependent embedding;
  3. tracker entity update: unchanged when the salient entity repeats,
     GRU over the dynamic embedding for a fresh entity, GRU over the
     projected snapshot for a re-mention;
  4. attribute selection: softmax over the entity's records via a bilinear
     score against the concatenated states, then a GRU update of the
     tracker with the chosen record embedding;
  5. numeral style: binary head choosing digits vs. an English number word;
  6. word emission: context vector -> word softmax (only when no record is
     realized), then an LSTM update of the language-model state.

After a sentence-final period the tracker is additionally refreshed with a
trainable input vector.  All functions build autodiff graphs; nothing here
mutates model parameters.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import GRUCell, LSTMCell, Parameter, ParamStore, Tensor
from .records import GameData, Record, is_numeric_attribute
from .vocab import Vocabularies


@dataclass
class ModelConfig:
    embed_dim: int = 128
    hidden_dim: int = 512
    side_dim: int = 8
    use_writer: bool = False
    dtype: str = "float64"

    def as_dict(self) -> dict:
        return {
            "embed_dim": self.embed_dim,
            "hidden_dim": self.hidden_dim,
            "side_dim": self.side_dim,
            "use_writer": self.use_writer,
            "dtype": self.dtype,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ModelConfig":
        unknown = set(obj) - {f.name for f in cls.__dataclass_fields__.values()}
        if unknown:
            raise ValueError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**obj)

    @property
    def np_dtype(self):
        return {"float64": np.float64, "float32": np.float32}[self.dtype]


class ModelParams:
    """Every table, matrix, and recurrent cell of the model.

    Construction order is fixed so that identical (config, vocabs, seed)
    always yields an identical checkpoint.
    """

    def __init__(self, config: ModelConfig, vocabs: Vocabularies, seed: int = 0) -> None:
        self.config = config
        self.vocabs = vocabs
        rng = np.random.default_rng(seed)
        d_e, d_h, d_s = config.embed_dim, config.hidden_dim, config.side_dim
        dt = config.np_dtype
        store = ParamStore()

        def table(name: str, rows: int, cols: int) -> Parameter:
            return store.add(Parameter(name, ad.xavier_uniform((rows, cols), rng, dt)))

        def weight(name: str, rows: int, cols: int) -> Parameter:
            return store.add(Parameter(name, ad.xavier_uniform((rows, cols), rng, dt)))

        def bias(name: str, size: Optional[int]) -> Parameter:
            shape = () if size is None else (size,)
            return store.add(Parameter(name, np.zeros(shape, dtype=dt)))

        self.entity_table = table("emb.entity", len(vocabs.entities), d_e)
        self.attribute_table = table("emb.attribute", len(vocabs.attributes), d_e)
        self.value_table = table("emb.value", len(vocabs.values), d_e)
        self.word_table = table("emb.word", len(vocabs.words), d_e)
        self.writer_table = table("emb.writer", len(vocabs.writers), d_e)
        self.side_table = table("emb.side", len(vocabs.sides), d_s)

        self.record_proj_w = weight("record_proj.w", d_e, 3 * d_e + d_s)
        self.record_proj_b = bias("record_proj.b", d_e)
        self.entity_mix = {
            aid: weight(f"entity_mix.{aid}", d_h, d_e) for aid in vocabs.attributes.tokens
        }
        self.entity_mix_b = bias("entity_mix.b", d_h)

        self.transition_w = store.add(Parameter("transition.w", ad.xavier_uniform((2 * d_h,), rng, dt)))
        self.transition_b = bias("transition.b", None)
        self.select_old_w = weight("select_old.w", d_h, d_h)
        self.select_new_w = weight("select_new.w", d_h, d_h)
        self.snapshot_proj_w = weight("snapshot_proj.w", d_h, d_h)
        self.snapshot_proj_b = bias("snapshot_proj.b", d_h)
        self.attr_select_w = weight("attr_select.w", d_e, 2 * d_h)
        self.numeral_w = store.add(Parameter("numeral.w", ad.xavier_uniform((2 * d_h,), rng, dt)))
        self.numeral_b = bias("numeral.b", None)
        self.context_w = weight("context.w", d_h, 2 * d_h)
        self.context_b = bias("context.b", d_h)
        self.context_writer_w = weight("context_writer.w", d_h, 2 * d_h + d_e)
        self.context_writer_b = bias("context_writer.b", d_h)
        self.word_out_w = weight("word_out.w", len(vocabs.words), d_h)
        self.word_out_b = bias("word_out.b", len(vocabs.words))

        self.tracker_entity_gru = GRUCell("tracker_entity_gru", d_h, d_h, rng, dt)
        self.tracker_record_gru = GRUCell("tracker_record_gru", d_e, d_h, rng, dt)
        self.lm_lstm = LSTMCell("lm_lstm", d_e + d_h, d_h, rng, dt)
        store.extend(self.tracker_entity_gru.parameters())
        store.extend(self.tracker_record_gru.parameters())
        store.extend(self.lm_lstm.parameters())

        self.lm_init = store.add(Parameter("lm_init", ad.xavier_uniform((d_h,), rng, dt)))
        self.refresh_input = store.add(Parameter("refresh_input", ad.xavier_uniform((d_e,), rng, dt)))
        self.store = store

    # -- persistence --------------------------------------------------

    def save(self, directory: Path, extra_meta: Optional[dict] = None) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        self.store.save(directory / "params.bin")
        meta = {
            "model_config": self.config.as_dict(),
            "vocabularies": self.vocabs.as_dict(),
        }
        if extra_meta:
            meta.update(extra_meta)
        (directory / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True))

    @classmethod
    def load(cls, directory: Path) -> "ModelParams":
        directory = Path(directory)
        meta = json.loads((directory / "meta.json").read_text())
        config = ModelConfig.from_dict(meta["model_config"])
        vocabs = Vocabularies.from_dict(meta["vocabularies"])
        params = cls(config, vocabs, seed=0)
        params.store.load(directory / "params.bin")
        return params


def config_hash(obj: dict) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode("utf-8")).hexdigest()


# --------------------------------------------------------------------------
# Per-game embeddings


@dataclass
class GameEmbeddings:
    """Record embeddings and game-dependent entity embeddings for one game."""

    entity_order: tuple[str, ...]
    records: dict[tuple[str, str], Tensor]
    dynamic: dict[str, Tensor]


def embed_record(params: ModelParams, game: GameData, record: Record) -> Tensor:
    """tanh-projected concatenation of entity, attribute, value, and side."""
    v = params.vocabs
    ent = game.entities[record.entity_id]
    parts = ad.concat(
        [
            ad.lookup(params.entity_table, v.entities.index(record.entity_id)),
            ad.lookup(params.attribute_table, v.attributes.index(record.attribute_id)),
            ad.lookup(params.value_table, v.values.index(record.value)),
            ad.lookup(params.side_table, v.sides.index(ent.side)),
        ]
    )
    return ad.tanh(ad.matmul(params.record_proj_w, parts) + params.record_proj_b)


def dynamic_entity_embedding(
    params: ModelParams, record_embs: Mapping[tuple[str, str], Tensor], game: GameData, entity_id: str
) -> Tensor:
    """Game-dependent entity embedding: tanh of the per-attribute mixed sum
    of the entity's record embeddings."""
    recs = game.records_of(entity_id)
    if not recs:
        raise ValueError(f"entity {entity_id!r} has no records in game {game.game_id}")
    acc: Optional[Tensor] = None
    for rec in recs:
        term = ad.matmul(params.entity_mix[rec.attribute_id], record_embs[(rec.entity_id, rec.attribute_id)])
        acc = term if acc is None else acc + term
    return ad.tanh(acc + params.entity_mix_b)


def build_game_embeddings(params: ModelParams, game: GameData) -> GameEmbeddings:
    v = params.vocabs
    order = tuple(sorted(game.entities, key=lambda eid: (v.entities.index(eid), eid)))
    record_embs = {
        (rec.entity_id, rec.attribute_id): embed_record(params, game, rec) for rec in game.records
    }
    dynamic = {
        eid: dynamic_entity_embedding(params, record_embs, game, eid) for eid in order
    }
    return GameEmbeddings(entity_order=order, records=record_embs, dynamic=dynamic)


# --------------------------------------------------------------------------
# States


@dataclass(frozen=True)
class LmState:
    h: Tensor
    c: Tensor


@dataclass(frozen=True)
class TrackerState:
    """Tracking memory plus per-entity last-mention snapshots.

    mentioned maps entity id -> (step, tracker state stored right after
    that entity's most recent record update).  Treated as immutable; updates
    return a new state with a copied map.
    """

    h: Tensor
    mentioned: Mapping[str, tuple[int, Tensor]] = field(default_factory=dict)
    prev_entity: Optional[str] = None
    prev_attribute: Optional[str] = None


def init_states(params: ModelParams, embeddings: GameEmbeddings) -> tuple[LmState, TrackerState]:
    """LM state seeded from the start-of-document vector; tracker state from
    the mean dynamic entity embedding (in canonical entity order); LSTM cell
    memory starts at zero."""
    acc: Optional[Tensor] = None
    for eid in embeddings.entity_order:
        e = embeddings.dynamic[eid]
        acc = e if acc is None else acc + e
    h_ent = ad.scale(acc, 1.0 / len(embeddings.entity_order))
    zeros = Tensor(np.zeros(params.config.hidden_dim, dtype=params.config.np_dtype))
    return LmState(h=params.lm_init, c=zeros), TrackerState(h=h_ent)


# --------------------------------------------------------------------------
# Heads


def transition_logit(params: ModelParams, lm: LmState, tracker: TrackerState) -> Tensor:
    return ad.matmul(params.transition_w, ad.concat([lm.h, tracker.h])) + params.transition_b


def p_transition(params: ModelParams, lm: LmState, tracker: TrackerState) -> Tensor:
    """Probability that the next token realizes a (new) data record."""
    return ad.sigmoid(transition_logit(params, lm, tracker))


@dataclass
class CandidateScores:
    ids: tuple[str, ...]
    logits: Tensor
    via_snapshot: tuple[bool, ...] = ()

    def probabilities(self) -> Tensor:
        return ad.softmax(self.logits)

    def argmax(self) -> str:
        # np.argmax takes the first maximum: ties break to the lowest index.
        return self.ids[int(np.argmax(self.logits.data))]

    def nll(self, target_id: str) -> Tensor:
        return ad.nll_from_logits(self.logits, self.ids.index(target_id))

    def prob_of(self, target_id: str) -> float:
        return float(self.probabilities().data[self.ids.index(target_id)])


def entity_scores(
    params: ModelParams, lm: LmState, tracker: TrackerState, embeddings: GameEmbeddings
) -> CandidateScores:
    """Distribution over the game's entities.  Entities already mentioned
    are scored through their stored snapshot, fresh ones through their
    dynamic embedding; one softmax normalizes both kinds jointly."""
    scores = []
    via = []
    for eid in embeddings.entity_order:
        hit = tracker.mentioned.get(eid)
        if hit is not None:
            scores.append(ad.bilinear(hit[1], params.select_old_w, lm.h))
            via.append(True)
        else:
            scores.append(ad.bilinear(embeddings.dynamic[eid], params.select_new_w, lm.h))
            via.append(False)
    return CandidateScores(embeddings.entity_order, ad.stack(scores), tuple(via))


def update_tracker_entity(
    params: ModelParams,
    tracker: TrackerState,
    entity_id: str,
    embeddings: GameEmbeddings,
) -> TrackerState:
    """Three-case tracker update on entity selection: identity when the
    salient entity repeats, GRU over the dynamic embedding when fresh, GRU
    over the projected last-mention snapshot on a re-mention."""
    if entity_id == tracker.prev_entity:
        h = tracker.h
    elif entity_id not in tracker.mentioned:
        h = params.tracker_entity_gru(embeddings.dynamic[entity_id], tracker.h)
    else:
        snap = tracker.mentioned[entity_id][1]
        projected = ad.matmul(params.snapshot_proj_w, snap) + params.snapshot_proj_b
        h = params.tracker_entity_gru(projected, tracker.h)
    return replace(tracker, h=h, prev_entity=entity_id)


def attribute_scores(
    params: ModelParams,
    entity_id: str,
    lm: LmState,
    tracker: TrackerState,
    embeddings: GameEmbeddings,
    game: GameData,
) -> CandidateScores:
    """Distribution over the attributes recorded for the salient entity."""
    v = params.vocabs
    recs = game.records_of(entity_id)
    if not recs:
        raise ValueError(f"entity {entity_id!r} has no records")
    aids = tuple(sorted((r.attribute_id for r in recs), key=lambda a: v.attributes.index(a)))
    states = ad.concat([lm.h, tracker.h])
    scores = [
        ad.bilinear(embeddings.records[(entity_id, aid)], params.attr_select_w, states)
        for aid in aids
    ]
    return CandidateScores(aids, ad.stack(scores))


def update_tracker_attribute(
    params: ModelParams,
    tracker: TrackerState,
    entity_id: str,
    attribute_id: str,
    embeddings: GameEmbeddings,
    step: int,
) -> TrackerState:
    """GRU update with the selected record's embedding; stores the updated
    state as the entity's last-mention snapshot."""
    h = params.tracker_record_gru(embeddings.records[(entity_id, attribute_id)], tracker.h)
    mentioned = dict(tracker.mentioned)
    mentioned[entity_id] = (step, h)
    return replace(tracker, h=h, mentioned=mentioned, prev_attribute=attribute_id)


def refresh_tracker(params: ModelParams, tracker: TrackerState) -> TrackerState:
    """Sentence-boundary refresh: record-GRU step with a trainable input.
    Snapshots and the mentioned set are untouched."""
    h = params.tracker_record_gru(params.refresh_input, tracker.h)
    return replace(tracker, h=h)


def numeral_logit(params: ModelParams, lm: LmState, tracker: TrackerState) -> Tensor:
    if tracker.prev_attribute is None or not is_numeric_attribute(tracker.prev_attribute):
        raise ValueError(
            f"numeral head queried for non-numeric attribute {tracker.prev_attribute!r}"
        )
    return ad.matmul(params.numeral_w, ad.concat([lm.h, tracker.h])) + params.numeral_b


def p_numeral(params: ModelParams, lm: LmState, tracker: TrackerState) -> Tensor:
    """Probability that the pending numeric value is written as an English
    word rather than digits."""
    return ad.sigmoid(numeral_logit(params, lm, tracker))


def context_vector(
    params: ModelParams, lm: LmState, tracker: TrackerState, writer_index: Optional[int] = None
) -> Tensor:
    """tanh projection of the concatenated states; with a writer index the
    writer embedding joins the concatenation under a separate matrix."""
    if writer_index is None:
        joined = ad.concat([lm.h, tracker.h])
        return ad.tanh(ad.matmul(params.context_w, joined) + params.context_b)
    joined = ad.concat([lm.h, tracker.h, ad.lookup(params.writer_table, writer_index)])
    return ad.tanh(ad.matmul(params.context_writer_w, joined) + params.context_writer_b)


def word_logits(params: ModelParams, context: Tensor) -> Tensor:
    return ad.matmul(params.word_out_w, context) + params.word_out_b


def word_distribution(params: ModelParams, context: Tensor) -> Tensor:
    return ad.softmax(word_logits(params, context))


def advance_lm(params: ModelParams, lm: LmState, word_index: int, context: Tensor) -> LmState:
    """LSTM step on the concatenation of the emitted word's embedding and
    the context vector."""
    x = ad.concat([ad.lookup(params.word_table, word_index), context])
    h, c = params.lm_lstm(x, lm.h, lm.c)
    return LmState(h=h, c=c)
