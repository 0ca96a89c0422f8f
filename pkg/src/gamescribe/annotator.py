"""Deterministic supervision labels from (game, raw summary) pairs.

Two passes over the token sequence:

  1. Entity mentions.  Full player names (first + last token), bare last
     names, team city tokens, and team name tokens become mention spans.
     A surface form shared by several entities (e.g. two players with the
     same last name) is kept only as an ambiguous anchor: it still counts
     as context for value resolution but is never labeled itself.

  2. Values.  A digit token or number word resolves to the nearest
     preceding anchor (same sentence first, previous sentence otherwise)
     whose entity owns a record with that value.  If the nearest matching
     anchor is ambiguous between entities that both own a matching record,
     the token stays unlabeled.  When one entity matches under several
     attributes, a cue word in the following two tokens (points, rebounds,
     boards, assists, steals, blocks, minutes) must disambiguate.

Everything unresolved is labeled z=0, so every emitted label is backed by a
record.  The numeral flag follows the surface form: digits 0, word 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .lexicon import parse_number_word
from .records import GameData, LabeledSummary, is_numeric_attribute

CUE_WORDS = {
    "points": "PLAYER_PTS",
    "rebounds": "PLAYER_REB",
    "boards": "PLAYER_REB",
    "assists": "PLAYER_AST",
    "steals": "PLAYER_STL",
    "blocks": "PLAYER_BLK",
    "minutes": "PLAYER_MIN",
}


@dataclass(frozen=True)
class MentionSpan:
    """Resolved entity mention: token range [start, end) and match kind."""

    start: int
    end: int
    entity_id: str
    kind: str  # "full-name" | "last-name" | "team" | "city"


@dataclass(frozen=True)
class _Anchor:
    """Context anchor for value resolution; may be ambiguous."""

    start: int
    end: int
    entity_ids: tuple[str, ...]
    sentence: int
    kind: str
    attributes: tuple[str, ...]  # attribute id realized by each span token


def _sentence_index(tokens: tuple[str, ...]) -> list[int]:
    out = []
    sent = 0
    for tok in tokens:
        out.append(sent)
        if tok == ".":
            sent += 1
    return out


def _surface_tables(game: GameData):
    players = game.players()
    full: dict[tuple[str, str], list[str]] = {}
    last: dict[str, list[str]] = {}
    for p in players:
        first_tok, last_tok = p.name_tokens[0], p.name_tokens[1]
        full.setdefault((first_tok, last_tok), []).append(p.id)
        last.setdefault(last_tok, []).append(p.id)
    city: dict[tuple[str, ...], list[str]] = {}
    name: dict[tuple[str, ...], list[str]] = {}
    for team in game.teams():
        n_city = 2 if game.value(team.id, "TEAM_CITY_2") is not None else 1
        city.setdefault(tuple(team.name_tokens[:n_city]), []).append(team.id)
        name.setdefault(tuple(team.name_tokens[n_city:]), []).append(team.id)
    return full, last, city, name


def find_anchors(game: GameData, tokens: tuple[str, ...]) -> list[_Anchor]:
    """Greedy longest-match scan for entity mentions, left to right."""
    full, last, city, name = _surface_tables(game)
    sentences = _sentence_index(tokens)
    anchors: list[_Anchor] = []
    t = 0
    while t < len(tokens):
        matched: Optional[_Anchor] = None
        if t + 1 < len(tokens) and (tokens[t], tokens[t + 1]) in full:
            ids = tuple(sorted(full[(tokens[t], tokens[t + 1])]))
            matched = _Anchor(t, t + 2, ids, sentences[t], "full-name",
                              ("FIRST_NAME", "SECOND_NAME"))
        if matched is None:
            for length, table, kind, attr_ids in (
                (2, city, "city", ("TEAM_CITY", "TEAM_CITY_2")),
                (2, name, "team", ("TEAM_NAME", "TEAM_NAME_2")),
                (1, city, "city", ("TEAM_CITY",)),
                (1, name, "team", ("TEAM_NAME",)),
            ):
                span = tuple(tokens[t : t + length])
                if len(span) == length and span in table:
                    ids = tuple(sorted(table[span]))
                    matched = _Anchor(t, t + length, ids, sentences[t], kind, attr_ids)
                    break
        if matched is None and tokens[t] in last:
            ids = tuple(sorted(last[tokens[t]]))
            matched = _Anchor(t, t + 1, ids, sentences[t], "last-name", ("SECOND_NAME",))
        if matched is None:
            t += 1
        else:
            anchors.append(matched)
            t = matched.end
    return anchors


def mention_spans(game: GameData, tokens: tuple[str, ...]) -> list[MentionSpan]:
    """Unambiguous entity mentions (each span maps to exactly one entity)."""
    return [
        MentionSpan(a.start, a.end, a.entity_ids[0], a.kind)
        for a in find_anchors(game, tokens)
        if len(a.entity_ids) == 1
    ]


def _matching_attributes(game: GameData, entity_id: str, value: str) -> list[str]:
    return [
        rec.attribute_id
        for rec in game.records_of(entity_id)
        if rec.value == value and is_numeric_attribute(rec.attribute_id)
    ]


def resolve_entity(
    game: GameData,
    anchors: list[_Anchor],
    position: int,
    sentence: int,
    value: str,
) -> Optional[str]:
    """Entity owning a record with this value, by nearest preceding anchor.

    Same-sentence anchors are searched nearest-first; if none of them match,
    the previous sentence is searched.  An ambiguous nearest anchor whose
    candidate entities both match yields None.
    """
    for wanted_sentence in (sentence, sentence - 1):
        if wanted_sentence < 0:
            break
        candidates = [
            a
            for a in anchors
            if a.sentence == wanted_sentence and a.end <= position
        ]
        candidates.sort(key=lambda a: position - a.end)
        for anchor in candidates:
            hits = [eid for eid in anchor.entity_ids if _matching_attributes(game, eid, value)]
            if len(hits) == 1:
                return hits[0]
            if len(hits) > 1:
                return None  # equally distant namesakes both score this value
    return None


def annotate(game: GameData, tokens: tuple[str, ...]) -> LabeledSummary:
    """Produce (z, e, a, n) supervision for a raw token sequence."""
    tokens = tuple(tokens)
    sentences = _sentence_index(tokens)
    anchors = find_anchors(game, tokens)
    n_tok = len(tokens)
    z = [0] * n_tok
    e: list[Optional[str]] = [None] * n_tok
    a: list[Optional[str]] = [None] * n_tok
    n: list[Optional[int]] = [None] * n_tok

    for anchor in anchors:
        if len(anchor.entity_ids) != 1:
            continue
        eid = anchor.entity_ids[0]
        for offset, attr_id in enumerate(anchor.attributes):
            pos = anchor.start + offset
            if game.value(eid, attr_id) == tokens[pos]:
                z[pos], e[pos], a[pos] = 1, eid, attr_id

    for t, token in enumerate(tokens):
        if z[t] == 1:
            continue
        if token.isdigit():
            value, n_flag = str(int(token)), 0
        else:
            parsed = parse_number_word(token)
            if parsed is None:
                continue
            value, n_flag = str(parsed), 1
        eid = resolve_entity(game, anchors, t, sentences[t], value)
        if eid is None:
            continue
        attrs = _matching_attributes(game, eid, value)
        if len(attrs) > 1:
            cues = [CUE_WORDS.get(tok) for tok in tokens[t + 1 : t + 3]]
            attrs = [aid for aid in attrs if aid in cues]
        if len(attrs) != 1:
            continue  # stay conservative on ambiguity
        z[t], e[t], a[t], n[t] = 1, eid, attrs[0], n_flag

    return LabeledSummary(
        game_id=game.game_id, tokens=tokens, z=tuple(z), e=tuple(e), a=tuple(a), n=tuple(n)
    )
