"""Domain data model for box-score games and labeled summaries.

A game is a set of (entity, attribute, value) records over player and team
entities, each entity sitting on the home or visitor side.  A labeled summary
pairs a token sequence with per-token supervision: whether the token realizes
a record (z), which entity (e) and attribute (a), and for numeric values
whether the surface form is digits (n=0) or an English number word (n=1).

Corpora are stored as JSON Lines, one game per line; see schema.md at the
repository root for every key.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Optional, Sequence

HOME = "home"
VISITOR = "visitor"
SIDES = (HOME, VISITOR)

UNKNOWN_WRITER = "<unk>"


class DataError(ValueError):
    """Raised for malformed corpus files or violated game invariants."""


@dataclass(frozen=True)
class Attribute:
    id: str
    is_numeric: bool


# Closed attribute registry.  Name attributes realize entity surface forms
# token by token (so a copy step always emits a single token); the rest carry
# integer statistics.
ATTRIBUTES = {
    a.id: a
    for a in [
        Attribute("FIRST_NAME", False),
        Attribute("SECOND_NAME", False),
        Attribute("TEAM_CITY", False),
        Attribute("TEAM_CITY_2", False),
        Attribute("TEAM_NAME", False),
        Attribute("TEAM_NAME_2", False),
        Attribute("PLAYER_PTS", True),
        Attribute("PLAYER_REB", True),
        Attribute("PLAYER_AST", True),
        Attribute("PLAYER_STL", True),
        Attribute("PLAYER_BLK", True),
        Attribute("PLAYER_MIN", True),
        Attribute("TEAM_PTS", True),
        Attribute("TEAM_WINS", True),
        Attribute("TEAM_LOSSES", True),
    ]
}

NAME_ATTRIBUTES = frozenset(
    ["FIRST_NAME", "SECOND_NAME", "TEAM_CITY", "TEAM_CITY_2", "TEAM_NAME", "TEAM_NAME_2"]
)


def attribute(attr_id: str) -> Attribute:
    try:
        return ATTRIBUTES[attr_id]
    except KeyError:
        raise DataError(f"unknown attribute id {attr_id!r}") from None


def is_numeric_attribute(attr_id: str) -> bool:
    return attribute(attr_id).is_numeric


@dataclass(frozen=True)
class Entity:
    id: str
    kind: str  # "player" | "team"
    name_tokens: tuple[str, ...]
    side: str  # "home" | "visitor"


@dataclass(frozen=True)
class Record:
    entity_id: str
    attribute_id: str
    value: str


def player_id(first: str, second: str) -> str:
    return f"{first.lower()}_{second.lower()}"


def team_id(city_tokens: Sequence[str], name_tokens: Sequence[str]) -> str:
    return "_".join(t.lower() for t in (*city_tokens, *name_tokens))


@dataclass
class GameData:
    """One game: entities plus the record set the model may copy from."""

    game_id: str
    entities: dict[str, Entity]
    records: tuple[Record, ...]
    writer: str = UNKNOWN_WRITER
    day: Optional[str] = None
    summary: Optional[tuple[str, ...]] = None

    def __post_init__(self) -> None:
        self.records = tuple(
            sorted(self.records, key=lambda r: (r.entity_id, r.attribute_id))
        )
        self._index = {(r.entity_id, r.attribute_id): r for r in self.records}
        self._by_entity: dict[str, list[Record]] = {}
        for r in self.records:
            self._by_entity.setdefault(r.entity_id, []).append(r)

    def value(self, entity_id: str, attribute_id: str) -> Optional[str]:
        rec = self._index.get((entity_id, attribute_id))
        return None if rec is None else rec.value

    def record(self, entity_id: str, attribute_id: str) -> Optional[Record]:
        return self._index.get((entity_id, attribute_id))

    def records_of(self, entity_id: str) -> list[Record]:
        return self._by_entity.get(entity_id, [])

    def has_record(self, entity_id: str, attribute_id: str, value: str) -> bool:
        return self.value(entity_id, attribute_id) == value

    def teams(self) -> list[Entity]:
        return [e for e in self.entities.values() if e.kind == "team"]

    def players(self) -> list[Entity]:
        return [e for e in self.entities.values() if e.kind == "player"]


@dataclass
class LabeledSummary:
    """Token sequence with aligned per-token supervision."""

    game_id: str
    tokens: tuple[str, ...]
    z: tuple[int, ...]
    e: tuple[Optional[str], ...]  # entity ids
    a: tuple[Optional[str], ...]  # attribute ids
    n: tuple[Optional[int], ...]

    def __len__(self) -> int:
        return len(self.tokens)


def validate_game(game: GameData) -> list[str]:
    """Check game invariants; returns one message per violation."""
    problems: list[str] = []
    gid = game.game_id
    for eid, ent in game.entities.items():
        if eid != ent.id:
            problems.append(f"{gid}: entity key {eid!r} != entity id {ent.id!r}")
        if not ent.name_tokens:
            problems.append(f"{gid}: entity {eid!r} has empty name_tokens")
        if ent.side not in SIDES:
            problems.append(f"{gid}: entity {eid!r} has invalid side {ent.side!r}")
        if ent.kind not in ("player", "team"):
            problems.append(f"{gid}: entity {eid!r} has invalid kind {ent.kind!r}")
    seen: set[tuple[str, str]] = set()
    for rec in game.records:
        if rec.entity_id not in game.entities:
            problems.append(f"{gid}: record cites undeclared entity {rec.entity_id!r}")
        if rec.attribute_id not in ATTRIBUTES:
            problems.append(f"{gid}: record cites unknown attribute {rec.attribute_id!r}")
            continue
        key = (rec.entity_id, rec.attribute_id)
        if key in seen:
            problems.append(f"{gid}: duplicate record for {key}")
        seen.add(key)
        if ATTRIBUTES[rec.attribute_id].is_numeric:
            if not rec.value.isdigit():
                problems.append(
                    f"{gid}: numeric attribute {rec.attribute_id} of {rec.entity_id} "
                    f"has non-integer value {rec.value!r}"
                )
        elif (not rec.value) or any(c.isspace() for c in rec.value):
            problems.append(
                f"{gid}: value {rec.value!r} of {rec.entity_id}/{rec.attribute_id} "
                "is not a single token"
            )
    return problems


def validate_labels(game: GameData, labels: LabeledSummary) -> list[str]:
    """Check the per-token label invariants against a game."""
    problems: list[str] = []
    gid = labels.game_id
    n_tok = len(labels.tokens)
    for name, seq in (("z", labels.z), ("e", labels.e), ("a", labels.a), ("n", labels.n)):
        if len(seq) != n_tok:
            problems.append(f"{gid}: label sequence {name} has length {len(seq)} != {n_tok}")
            return problems
    for t in range(n_tok):
        z, e, a, n = labels.z[t], labels.e[t], labels.a[t], labels.n[t]
        if z not in (0, 1):
            problems.append(f"{gid}: z[{t}] = {z!r} not in {{0,1}}")
        if z == 0:
            if e is not None or a is not None or n is not None:
                problems.append(f"{gid}: position {t} has z=0 but non-null e/a/n")
            continue
        if e is None or a is None:
            problems.append(f"{gid}: position {t} has z=1 but missing e or a")
            continue
        if e not in game.entities:
            problems.append(f"{gid}: position {t} cites undeclared entity {e!r}")
            continue
        if game.record(e, a) is None:
            problems.append(f"{gid}: position {t} cites missing record ({e}, {a})")
            continue
        numeric = is_numeric_attribute(a)
        if numeric and n not in (0, 1):
            problems.append(f"{gid}: position {t} numeric attribute without n flag")
        if not numeric and n is not None:
            problems.append(f"{gid}: position {t} non-numeric attribute with n flag")
    return problems


# --------------------------------------------------------------------------
# JSON Lines serialization (see schema.md)

_PLAYER_BOX_KEYS = {
    "PTS": "PLAYER_PTS",
    "REB": "PLAYER_REB",
    "AST": "PLAYER_AST",
    "STL": "PLAYER_STL",
    "BLK": "PLAYER_BLK",
    "MIN": "PLAYER_MIN",
}
_LINE_KEYS = {
    "TEAM-PTS": "TEAM_PTS",
    "TEAM-WINS": "TEAM_WINS",
    "TEAM-LOSSES": "TEAM_LOSSES",
}


def _canon_number(raw: object, gid: str, key: str) -> str:
    try:
        iv = int(str(raw))
    except ValueError:
        raise DataError(f"{gid}: value {raw!r} under key {key!r} is not an integer") from None
    if iv < 0:
        raise DataError(f"{gid}: value {raw!r} under key {key!r} is negative")
    return str(iv)


def _team_from_line(line: dict, side: str, gid: str, which: str) -> tuple[Entity, list[Record]]:
    try:
        city = str(line["TEAM-CITY"])
        name = str(line["TEAM-NAME"])
    except KeyError as exc:
        raise DataError(f"{gid}: {which} is missing key {exc.args[0]!r}") from None
    city_toks = tuple(city.split())
    name_toks = tuple(name.split())
    if not (1 <= len(city_toks) <= 2) or not (1 <= len(name_toks) <= 2):
        raise DataError(f"{gid}: {which} city/name must be one or two tokens")
    eid = team_id(city_toks, name_toks)
    ent = Entity(eid, "team", city_toks + name_toks, side)
    recs = [Record(eid, "TEAM_CITY", city_toks[0])]
    if len(city_toks) == 2:
        recs.append(Record(eid, "TEAM_CITY_2", city_toks[1]))
    recs.append(Record(eid, "TEAM_NAME", name_toks[0]))
    if len(name_toks) == 2:
        recs.append(Record(eid, "TEAM_NAME_2", name_toks[1]))
    for key, attr_id in _LINE_KEYS.items():
        if key in line and str(line[key]) != "N/A":
            recs.append(Record(eid, attr_id, _canon_number(line[key], gid, key)))
    unknown = set(line) - set(_LINE_KEYS) - {"TEAM-CITY", "TEAM-NAME"}
    if unknown:
        raise DataError(f"{gid}: unknown {which} key {sorted(unknown)[0]!r}")
    return ent, recs


def game_from_json(obj: dict) -> GameData:
    gid = str(obj.get("game_id", "")).strip()
    if not gid:
        raise DataError("game object without game_id")
    for req in ("home_line", "vis_line", "box_score"):
        if req not in obj:
            raise DataError(f"{gid}: missing key {req!r}")
    home, home_recs = _team_from_line(obj["home_line"], HOME, gid, "home_line")
    vis, vis_recs = _team_from_line(obj["vis_line"], VISITOR, gid, "vis_line")
    entities = {home.id: home, vis.id: vis}
    records = home_recs + vis_recs

    box = obj["box_score"]
    unknown = set(box) - set(_PLAYER_BOX_KEYS) - {"FIRST_NAME", "SECOND_NAME", "TEAM_CITY"}
    if unknown:
        raise DataError(f"{gid}: unknown box_score key {sorted(unknown)[0]!r}")
    for req in ("FIRST_NAME", "SECOND_NAME", "TEAM_CITY"):
        if req not in box:
            raise DataError(f"{gid}: box_score is missing key {req!r}")
    # City strings as written in the line objects, used to side each player.
    home_city = str(obj["home_line"]["TEAM-CITY"])
    vis_city = str(obj["vis_line"]["TEAM-CITY"])
    for idx in sorted(box["FIRST_NAME"], key=lambda s: int(s)):
        first = str(box["FIRST_NAME"][idx])
        try:
            second = str(box["SECOND_NAME"][idx])
            city = str(box["TEAM_CITY"][idx])
        except KeyError as exc:
            raise DataError(f"{gid}: box_score {exc.args[0]} is missing player index {idx}") from None
        if city == home_city:
            side = HOME
        elif city == vis_city:
            side = VISITOR
        else:
            raise DataError(f"{gid}: player {idx} TEAM_CITY {city!r} matches neither line")
        eid = player_id(first, second)
        if eid in entities:
            raise DataError(f"{gid}: duplicate player identity {eid!r}")
        entities[eid] = Entity(eid, "player", (first, second), side)
        records.append(Record(eid, "FIRST_NAME", first))
        records.append(Record(eid, "SECOND_NAME", second))
        for key, attr_id in _PLAYER_BOX_KEYS.items():
            cell = box.get(key, {}).get(idx)
            if cell is None or str(cell) == "N/A":
                continue  # did not play, or stat not kept
            records.append(Record(eid, attr_id, _canon_number(cell, gid, key)))

    summary = obj.get("summary")
    game = GameData(
        game_id=gid,
        entities=entities,
        records=tuple(records),
        writer=str(obj["writer"]) if obj.get("writer") else UNKNOWN_WRITER,
        day=str(obj["day"]) if obj.get("day") is not None else None,
        summary=tuple(str(t) for t in summary) if summary is not None else None,
    )
    problems = validate_game(game)
    if problems:
        raise DataError(problems[0])
    return game


def game_to_json(game: GameData) -> dict:
    """Inverse of game_from_json up to record-multiset equality."""

    def line_for(ent: Entity) -> dict:
        n_city = 2 if game.value(ent.id, "TEAM_CITY_2") else 1
        city = " ".join(ent.name_tokens[:n_city])
        name = " ".join(ent.name_tokens[n_city:])
        line = {"TEAM-CITY": city, "TEAM-NAME": name}
        for key, attr_id in _LINE_KEYS.items():
            val = game.value(ent.id, attr_id)
            if val is not None:
                line[key] = val
        return line

    teams = {e.side: e for e in game.teams()}
    box: dict[str, dict[str, str]] = {k: {} for k in ("FIRST_NAME", "SECOND_NAME", "TEAM_CITY")}
    players = sorted(game.players(), key=lambda e: e.id)
    for i, ent in enumerate(players):
        idx = str(i)
        box["FIRST_NAME"][idx] = ent.name_tokens[0]
        box["SECOND_NAME"][idx] = ent.name_tokens[1]
        side_team = teams[ent.side]
        n_city = 2 if game.value(side_team.id, "TEAM_CITY_2") else 1
        box["TEAM_CITY"][idx] = " ".join(side_team.name_tokens[:n_city])
        for key, attr_id in _PLAYER_BOX_KEYS.items():
            val = game.value(ent.id, attr_id)
            if val is not None:
                box.setdefault(key, {})[idx] = val
    obj = {
        "game_id": game.game_id,
        "home_line": line_for(teams[HOME]),
        "vis_line": line_for(teams[VISITOR]),
        "box_score": box,
    }
    if game.day is not None:
        obj["day"] = game.day
    if game.writer != UNKNOWN_WRITER:
        obj["writer"] = game.writer
    if game.summary is not None:
        obj["summary"] = list(game.summary)
    return obj


def labels_to_json(labels: LabeledSummary) -> dict:
    return {
        "game_id": labels.game_id,
        "tokens": list(labels.tokens),
        "z": list(labels.z),
        "e": list(labels.e),
        "a": list(labels.a),
        "n": list(labels.n),
    }


def labels_from_json(obj: dict) -> LabeledSummary:
    try:
        return LabeledSummary(
            game_id=str(obj["game_id"]),
            tokens=tuple(str(t) for t in obj["tokens"]),
            z=tuple(int(v) for v in obj["z"]),
            e=tuple(None if v is None else str(v) for v in obj["e"]),
            a=tuple(None if v is None else str(v) for v in obj["a"]),
            n=tuple(None if v is None else int(v) for v in obj["n"]),
        )
    except KeyError as exc:
        raise DataError(f"label object is missing key {exc.args[0]!r}") from None


def _iter_jsonl(path: Path) -> Iterator[dict]:
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None


def load_games(path: Path) -> list[GameData]:
    return [game_from_json(obj) for obj in _iter_jsonl(Path(path))]


def save_games(path: Path, games: Iterable[GameData]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for game in games:
            fh.write(json.dumps(game_to_json(game)) + "\n")


def load_labels(path: Path) -> dict[str, LabeledSummary]:
    out: dict[str, LabeledSummary] = {}
    for obj in _iter_jsonl(Path(path)):
        lab = labels_from_json(obj)
        out[lab.game_id] = lab
    return out


def save_labels(path: Path, labels: Iterable[LabeledSummary]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for lab in labels:
            fh.write(json.dumps(labels_to_json(lab)) + "\n")


GamePair = tuple[GameData, Optional[LabeledSummary]]


@dataclass
class Dataset:
    """Train/dev/test splits of (game, optional labels) pairs."""

    splits: dict[str, list[GamePair]] = field(default_factory=dict)

    @property
    def train(self) -> list[GamePair]:
        return self.splits.get("train", [])

    @property
    def dev(self) -> list[GamePair]:
        return self.splits.get("dev", [])

    @property
    def test(self) -> list[GamePair]:
        return self.splits.get("test", [])

    @property
    def writers(self) -> list[str]:
        seen = {g.writer for pairs in self.splits.values() for g, _ in pairs}
        return sorted(seen)

    def counts(self) -> dict[str, int]:
        return {name: len(pairs) for name, pairs in self.splits.items()}


def load_dataset(data_dir: Path, split_spec: Sequence[str] = ("train", "dev", "test")) -> Dataset:
    """Load `<split>.jsonl` (+ optional `<split>.labels.jsonl`) for each split.

    Splits whose game file is absent load as empty.  Label files must cover
    only games present in the split; labels are validated on load.
    """
    data_dir = Path(data_dir)
    if not data_dir.is_dir():
        raise DataError(f"data directory {data_dir} does not exist")
    ds = Dataset()
    for split in split_spec:
        games_path = data_dir / f"{split}.jsonl"
        pairs: list[GamePair] = []
        if games_path.exists():
            games = load_games(games_path)
            labels_path = data_dir / f"{split}.labels.jsonl"
            labels = load_labels(labels_path) if labels_path.exists() else {}
            by_id = {g.game_id: g for g in games}
            for gid in labels:
                if gid not in by_id:
                    raise DataError(f"{labels_path}: labels for unknown game {gid!r}")
            for game in games:
                lab = labels.get(game.game_id)
                if lab is not None:
                    problems = validate_labels(game, lab)
                    if problems:
                        raise DataError(problems[0])
                pairs.append((game, lab))
        ds.splits[split] = pairs
    return ds


def save_dataset(data_dir: Path, dataset: Dataset) -> None:
    data_dir = Path(data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    for split, pairs in dataset.splits.items():
        save_games(data_dir / f"{split}.jsonl", [g for g, _ in pairs])
        labeled = [lab for _, lab in pairs if lab is not None]
        if labeled:
            save_labels(data_dir / f"{split}.labels.jsonl", labeled)
