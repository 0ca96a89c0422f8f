"""Desk-scale synthetic corpus generator and the template baseline writer.

Games are sampled from single-token name pools with integer stat lines; each
game is paired with a template-written reference summary whose (z, e, a, n)
labels are emitted by construction, so aligner and training code can be
scored against exact ground truth.  The same template writer doubles as the
deterministic baseline generator: every value slot copies a record, so its
relation precision is 100% on any game.

Surface convention for numbers: values below ten are written as words
("seven points", n=1), larger values as digits ("15 points", n=0).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .lexicon import render_number
from .records import (
    Dataset,
    Entity,
    GameData,
    LabeledSummary,
    Record,
    is_numeric_attribute,
    player_id,
    team_id,
)

FIRST_NAMES = (
    "Alvin Brett Cole Devin Evan Felix Gary Hugo Ivan Jalen Kevin Lamar "
    "Mason Noah Omar Pablo Quinn Rex Sam Troy Umar Vince Wade Yusuf"
).split()
SECOND_NAMES = (
    "Adler Baker Carter Dunn Ellis Foster Grant Hayes Irving Jones Knight "
    "Lopez Morris Nash Owens Price Reyes Stone Turner Vaughn Walker Young"
).split()
CITIES = (
    "Auburn Boston Chicago Dallas Everett Fresno Houston Irvine Juneau "
    "Kenosha Laredo Memphis Norfolk Oakland Provo Quincy Reno Salem"
).split()
TEAM_NAMES = (
    "Aces Bears Comets Drakes Eagles Falcons Giants Hawks Jets Kings Lions "
    "Miners Nets Owls Pumas Quakes Rams Sharks"
).split()


@dataclass(frozen=True)
class WriterStyle:
    name: str
    win_verb: str
    stat_verb: str


STYLES = {
    s.name: s
    for s in [
        WriterStyle("alex", "defeated", "scored"),
        WriterStyle("blake", "beat", "posted"),
        WriterStyle("casey", "downed", "recorded"),
        WriterStyle("drew", "edged", "added"),
    ]
}
TEMPLATE_STYLE = WriterStyle("template", "defeated", "scored")


class _Labels:
    """Accumulates tokens with aligned supervision."""

    def __init__(self) -> None:
        self.tokens: list[str] = []
        self.z: list[int] = []
        self.e: list[Optional[str]] = []
        self.a: list[Optional[str]] = []
        self.n: list[Optional[int]] = []

    def plain(self, *tokens: str) -> None:
        for tok in tokens:
            self.tokens.append(tok)
            self.z.append(0)
            self.e.append(None)
            self.a.append(None)
            self.n.append(None)

    def copy(self, game: GameData, entity_id: str, attribute_id: str) -> None:
        value = game.value(entity_id, attribute_id)
        if value is None:
            raise ValueError(f"no record ({entity_id}, {attribute_id}) to copy")
        if is_numeric_attribute(attribute_id):
            iv = int(value)
            n_flag = 1 if iv < 10 else 0
            token = render_number(iv, as_word=bool(n_flag))
        else:
            n_flag = None
            token = value
        self.tokens.append(token)
        self.z.append(1)
        self.e.append(entity_id)
        self.a.append(attribute_id)
        self.n.append(n_flag)

    def done(self, game_id: str) -> LabeledSummary:
        return LabeledSummary(
            game_id=game_id,
            tokens=tuple(self.tokens),
            z=tuple(self.z),
            e=tuple(self.e),
            a=tuple(self.a),
            n=tuple(self.n),
        )


def _copy_name(out: _Labels, game: GameData, team: Entity, which: str) -> None:
    out.copy(game, team.id, which)
    if game.value(team.id, f"{which}_2") is not None:
        out.copy(game, team.id, f"{which}_2")


def template_summary(
    game: GameData, style: WriterStyle = TEMPLATE_STYLE, top_k: Optional[int] = None
) -> LabeledSummary:
    """Deterministic baseline summary: every value slot copies a record."""
    out = _Labels()
    teams = game.teams()
    scored = [t for t in teams if game.value(t.id, "TEAM_PTS") is not None]
    if len(scored) == 2:
        w, l = sorted(scored, key=lambda t: int(game.value(t.id, "TEAM_PTS")), reverse=True)
        out.plain("The")
        _copy_name(out, game, w, "TEAM_CITY")
        _copy_name(out, game, w, "TEAM_NAME")
        out.plain(style.win_verb, "the")
        _copy_name(out, game, l, "TEAM_CITY")
        _copy_name(out, game, l, "TEAM_NAME")
        out.plain(",")
        out.copy(game, w.id, "TEAM_PTS")
        out.plain("-")
        out.copy(game, l.id, "TEAM_PTS")
        out.plain(".")
        if all(
            game.value(t.id, a) is not None
            for t in (w, l)
            for a in ("TEAM_WINS", "TEAM_LOSSES")
        ):
            out.plain("The")
            _copy_name(out, game, w, "TEAM_NAME")
            out.plain("improved", "to")
            out.copy(game, w.id, "TEAM_WINS")
            out.plain("-")
            out.copy(game, w.id, "TEAM_LOSSES")
            out.plain(",", "while", "the")
            _copy_name(out, game, l, "TEAM_NAME")
            out.plain("fell", "to")
            out.copy(game, l.id, "TEAM_WINS")
            out.plain("-")
            out.copy(game, l.id, "TEAM_LOSSES")
            out.plain(".")

    stat_attrs = ("PLAYER_PTS", "PLAYER_REB", "PLAYER_AST")
    players = [
        p for p in game.players() if all(game.value(p.id, a) is not None for a in stat_attrs)
    ]
    players.sort(key=lambda p: (-int(game.value(p.id, "PLAYER_PTS")), p.id))
    for player in players[: top_k if top_k is not None else len(players)]:
        out.copy(game, player.id, "FIRST_NAME")
        out.copy(game, player.id, "SECOND_NAME")
        out.plain(style.stat_verb)
        out.copy(game, player.id, "PLAYER_PTS")
        out.plain("points", ",")
        out.copy(game, player.id, "PLAYER_REB")
        out.plain("rebounds", "and")
        out.copy(game, player.id, "PLAYER_AST")
        out.plain("assists", ".")
    return out.done(game.game_id)


def _sample_team_stats(rng: np.random.Generator) -> tuple[int, int, int, int]:
    wpts = int(rng.integers(95, 131))
    lpts = int(rng.integers(90, wpts))
    while True:
        wins = int(rng.integers(10, 41))
        losses = int(rng.integers(10, 41))
        if wins != losses:
            return wpts, lpts, wins, losses


def _make_game(rng: np.random.Generator, gid: str, n_players: int, writer: str) -> GameData:
    city_pick = rng.choice(len(CITIES), size=2, replace=False)
    name_pick = rng.choice(len(TEAM_NAMES), size=2, replace=False)
    entities: dict[str, Entity] = {}
    records: list[Record] = []
    team_ids = []
    for i, side in enumerate(("home", "visitor")):
        city, name = CITIES[city_pick[i]], TEAM_NAMES[name_pick[i]]
        tid = team_id([city], [name])
        entities[tid] = Entity(tid, "team", (city, name), side)
        records.append(Record(tid, "TEAM_CITY", city))
        records.append(Record(tid, "TEAM_NAME", name))
        team_ids.append(tid)
    home_wins = bool(rng.integers(0, 2))
    winner, loser = (team_ids[0], team_ids[1]) if home_wins else (team_ids[1], team_ids[0])
    wpts, lpts, wwins, wlosses = _sample_team_stats(rng)
    _, _, lwins, llosses = _sample_team_stats(rng)
    records.append(Record(winner, "TEAM_PTS", str(wpts)))
    records.append(Record(loser, "TEAM_PTS", str(lpts)))
    records.append(Record(winner, "TEAM_WINS", str(wwins)))
    records.append(Record(winner, "TEAM_LOSSES", str(wlosses)))
    records.append(Record(loser, "TEAM_WINS", str(lwins)))
    records.append(Record(loser, "TEAM_LOSSES", str(llosses)))

    firsts = rng.choice(len(FIRST_NAMES), size=n_players, replace=False)
    seconds = rng.choice(len(SECOND_NAMES), size=n_players, replace=False)
    for j in range(n_players):
        first, second = FIRST_NAMES[firsts[j]], SECOND_NAMES[seconds[j]]
        pid = player_id(first, second)
        side = "home" if j % 2 == 0 else "visitor"
        entities[pid] = Entity(pid, "player", (first, second), side)
        records.append(Record(pid, "FIRST_NAME", first))
        records.append(Record(pid, "SECOND_NAME", second))
        records.append(Record(pid, "PLAYER_PTS", str(int(rng.integers(2, 36)))))
        records.append(Record(pid, "PLAYER_REB", str(int(rng.integers(0, 16)))))
        records.append(Record(pid, "PLAYER_AST", str(int(rng.integers(0, 13)))))
        records.append(Record(pid, "PLAYER_STL", str(int(rng.integers(0, 6)))))
        records.append(Record(pid, "PLAYER_BLK", str(int(rng.integers(0, 6)))))
        records.append(Record(pid, "PLAYER_MIN", str(int(rng.integers(10, 41)))))
    return GameData(game_id=gid, entities=entities, records=tuple(records), writer=writer)


def synth_corpus(
    seed: int,
    n_games: int,
    n_players: int,
    writers: Sequence[str] = ("alex",),
    paired_writers: bool = False,
    dev_frac: float = 0.0,
    test_frac: float = 0.0,
) -> Dataset:
    """Generate a labeled corpus, deterministic in the seed.

    Each game is written by one writer's style (round-robin); with
    paired_writers every game is emitted once per writer so that the writer
    id is the only signal distinguishing the summaries of a pair.
    """
    if n_games < 1:
        raise ValueError("n_games must be >= 1")
    if not 2 <= n_players <= min(len(FIRST_NAMES), len(SECOND_NAMES)):
        raise ValueError(f"n_players must be in [2, {min(len(FIRST_NAMES), len(SECOND_NAMES))}]")
    unknown = [w for w in writers if w not in STYLES]
    if unknown:
        raise ValueError(f"no style registered for writer {unknown[0]!r}")
    rng = np.random.default_rng(seed)
    pairs: list[tuple[GameData, LabeledSummary]] = []
    for g in range(n_games):
        base = _make_game(rng, f"g{g:04d}", n_players, writer="")
        game_writers = list(writers) if paired_writers else [writers[g % len(writers)]]
        for wname in game_writers:
            gid = f"{base.game_id}-{wname}" if paired_writers else base.game_id
            labels = template_summary(
                GameData(gid, base.entities, base.records, writer=wname),
                STYLES[wname],
            )
            game = GameData(
                game_id=gid,
                entities=base.entities,
                records=base.records,
                writer=wname,
                summary=labels.tokens,
            )
            pairs.append((game, labels))

    n_test = int(round(len(pairs) * test_frac))
    n_dev = int(round(len(pairs) * dev_frac))
    n_train = len(pairs) - n_dev - n_test
    if n_train < 1:
        raise ValueError("split fractions leave no training games")
    return Dataset(
        splits={
            "train": pairs[:n_train],
            "dev": pairs[n_train : n_train + n_dev],
            "test": pairs[n_train + n_dev :],
        }
    )
