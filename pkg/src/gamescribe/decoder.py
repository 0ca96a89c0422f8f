"""Greedy decoding with copy realization.

Each step first thresholds the transition head at 0.5.  On a transition the
decoder picks the argmax entity and attribute, updates the tracker, and
copies the selected record's value, rendering numeric values as digits or
as an English number word per the numeral head.  Otherwise the word head
emits the argmax word.  Decoding ends at the end-of-document word or at
max_len; the tracker is refreshed after every sentence-final period.

Argmax ties break toward the lowest vocabulary index, so traces are
reproducible across implementations.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .lexicon import (  # re-exported: the numeral lexicon is part of decoding
    VALUE_FOR_WORD,
    WORD_FOR_VALUE,
    number_to_word,
    parse_number_word,
    render_number,
)
from .model import (
    ModelParams,
    advance_lm,
    attribute_scores,
    build_game_embeddings,
    context_vector,
    entity_scores,
    init_states,
    p_numeral,
    p_transition,
    refresh_tracker,
    update_tracker_attribute,
    update_tracker_entity,
    word_distribution,
)
from .records import GameData, LabeledSummary, Record, is_numeric_attribute
from .vocab import EOD

__all__ = [
    "GenerationTrace",
    "StepDecision",
    "generate",
    "forced_trace",
    "render_value",
    "parse_number_word",
    "number_to_word",
    "render_number",
    "WORD_FOR_VALUE",
    "VALUE_FOR_WORD",
    "trace_to_json",
    "save_trace",
]

DEFAULT_MAX_LEN = 700


def render_value(record: Record, n_flag: Optional[int]) -> str:
    """Copy a record's value as a token.

    Numeric values: digits for n_flag=0, English word for n_flag=1 (values
    without a word form fall back to digits).  Non-numeric values are
    emitted verbatim and must not carry an n flag.
    """
    numeric = is_numeric_attribute(record.attribute_id)
    if numeric:
        if n_flag not in (0, 1):
            raise ValueError(f"numeric value {record.value!r} needs an n flag in {{0,1}}")
        return render_number(int(record.value), as_word=bool(n_flag))
    if n_flag is not None:
        raise ValueError(f"non-numeric value {record.value!r} cannot carry an n flag")
    return record.value


@dataclass
class StepDecision:
    t: int
    z: int
    p_z: float
    entity: Optional[str] = None
    p_e: Optional[float] = None
    attribute: Optional[str] = None
    p_a: Optional[float] = None
    n: Optional[int] = None
    p_n: Optional[float] = None
    token: str = ""
    p_y: Optional[float] = None

    def as_dict(self) -> dict:
        return {
            "t": self.t,
            "z": self.z,
            "p_z": self.p_z,
            "entity": self.entity,
            "p_e": self.p_e,
            "attribute": self.attribute,
            "p_a": self.p_a,
            "n": self.n,
            "p_n": self.p_n,
            "token": self.token,
            "p_y": self.p_y,
        }


@dataclass
class GenerationTrace:
    game_id: str
    writer: Optional[str]
    tokens: tuple[str, ...]
    steps: list[StepDecision] = field(default_factory=list)
    truncated: bool = False

    def labels(self) -> LabeledSummary:
        """View of the trace as a labeled summary (end marker excluded)."""
        steps = [s for s in self.steps if s.token != EOD]
        return LabeledSummary(
            game_id=self.game_id,
            tokens=tuple(s.token for s in steps),
            z=tuple(s.z for s in steps),
            e=tuple(s.entity for s in steps),
            a=tuple(s.attribute for s in steps),
            n=tuple(s.n for s in steps),
        )


def generate(
    params: ModelParams,
    game: GameData,
    writer: Optional[str] = None,
    max_len: int = DEFAULT_MAX_LEN,
) -> GenerationTrace:
    """Greedy decode of one game, optionally conditioned on a writer id."""
    vocabs = params.vocabs
    writer_index = vocabs.writers.index(writer) if writer is not None else None
    embeddings = build_game_embeddings(params, game)
    lm, tracker = init_states(params, embeddings)
    tokens: list[str] = []
    steps: list[StepDecision] = []
    truncated = True

    for t in range(1, max_len + 1):
        p_z = float(p_transition(params, lm, tracker).data)
        if p_z >= 0.5:
            scores = entity_scores(params, lm, tracker, embeddings)
            eid = scores.argmax()
            p_e = scores.prob_of(eid)
            tracker = update_tracker_entity(params, tracker, eid, embeddings)
            attr = attribute_scores(params, eid, lm, tracker, embeddings, game)
            aid = attr.argmax()
            p_a = attr.prob_of(aid)
            tracker = update_tracker_attribute(params, tracker, eid, aid, embeddings, t)
            record = game.record(eid, aid)
            n = p_n = None
            if is_numeric_attribute(aid):
                p_n = float(p_numeral(params, lm, tracker).data)
                n = 1 if p_n >= 0.5 else 0
            token = render_value(record, n)
            step = StepDecision(t, 1, p_z, eid, p_e, aid, p_a, n, p_n, token)
        else:
            context = context_vector(params, lm, tracker, writer_index)
            dist = word_distribution(params, context).data
            word_idx = int(np.argmax(dist))
            token = vocabs.words.token(word_idx)
            step = StepDecision(t, 0, p_z, token=token, p_y=float(dist[word_idx]))
        steps.append(step)
        if token == EOD:
            truncated = False
            break
        tokens.append(token)
        if step.z == 1:
            context = context_vector(params, lm, tracker, writer_index)
        lm = advance_lm(params, lm, vocabs.words.index(token), context)
        if token == ".":
            tracker = refresh_tracker(params, tracker)

    return GenerationTrace(
        game_id=game.game_id,
        writer=writer,
        tokens=tuple(tokens),
        steps=steps,
        truncated=truncated,
    )


def forced_trace(
    params: ModelParams,
    game: GameData,
    labels: LabeledSummary,
    writer: Optional[str] = None,
) -> GenerationTrace:
    """Run the decoder with its decisions forced to the given labels.

    Copy steps still realize tokens from the selected record and n flag, so
    the output checks that the label sequence reproduces the surface text.
    """
    vocabs = params.vocabs
    writer_index = vocabs.writers.index(writer) if writer is not None else None
    embeddings = build_game_embeddings(params, game)
    lm, tracker = init_states(params, embeddings)
    tokens: list[str] = []
    steps: list[StepDecision] = []

    for t in range(len(labels.tokens)):
        z = labels.z[t]
        p_z = float(p_transition(params, lm, tracker).data)
        if z == 1:
            eid, aid, n = labels.e[t], labels.a[t], labels.n[t]
            scores = entity_scores(params, lm, tracker, embeddings)
            p_e = scores.prob_of(eid)
            tracker = update_tracker_entity(params, tracker, eid, embeddings)
            attr = attribute_scores(params, eid, lm, tracker, embeddings, game)
            p_a = attr.prob_of(aid)
            tracker = update_tracker_attribute(params, tracker, eid, aid, embeddings, t + 1)
            p_n = None
            if is_numeric_attribute(aid):
                p_n = float(p_numeral(params, lm, tracker).data)
            token = render_value(game.record(eid, aid), n)
            steps.append(StepDecision(t + 1, 1, p_z, eid, p_e, aid, p_a, n, p_n, token))
        else:
            token = labels.tokens[t]
            context = context_vector(params, lm, tracker, writer_index)
            dist = word_distribution(params, context).data
            p_y = float(dist[vocabs.words.index(token)])
            steps.append(StepDecision(t + 1, 0, p_z, token=token, p_y=p_y))
        tokens.append(token)
        if z == 1:
            context = context_vector(params, lm, tracker, writer_index)
        lm = advance_lm(params, lm, vocabs.words.index(token), context)
        if token == ".":
            tracker = refresh_tracker(params, tracker)

    return GenerationTrace(
        game_id=game.game_id, writer=writer, tokens=tuple(tokens), steps=steps, truncated=False
    )


def trace_to_json(trace: GenerationTrace, extra: Optional[dict] = None) -> dict:
    obj = {
        "game_id": trace.game_id,
        "writer": trace.writer,
        "tokens": list(trace.tokens),
        "truncated": trace.truncated,
        "steps": [s.as_dict() for s in trace.steps],
    }
    if extra:
        obj.update(extra)
    return obj


def save_trace(path: Path, trace: GenerationTrace, extra: Optional[dict] = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(trace_to_json(trace, extra), indent=2))
