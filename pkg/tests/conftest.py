import numpy as np
import pytest

from gamescribe.records import Dataset, Entity, GameData, Record, player_id, team_id
from gamescribe.synth import synth_corpus
from gamescribe.trainer import TrainConfig, TrainResult, train


def _player(first, second, side, pts, reb, ast, stl, blk, mins):
    pid = player_id(first, second)
    ent = Entity(pid, "player", (first, second), side)
    recs = [
        Record(pid, "FIRST_NAME", first),
        Record(pid, "SECOND_NAME", second),
        Record(pid, "PLAYER_PTS", str(pts)),
        Record(pid, "PLAYER_REB", str(reb)),
        Record(pid, "PLAYER_AST", str(ast)),
        Record(pid, "PLAYER_STL", str(stl)),
        Record(pid, "PLAYER_BLK", str(blk)),
        Record(pid, "PLAYER_MIN", str(mins)),
    ]
    return ent, recs


def _team(city_tokens, name, side, pts, wins, losses):
    tid = team_id(city_tokens, [name])
    ent = Entity(tid, "team", (*city_tokens, name), side)
    recs = [Record(tid, "TEAM_CITY", city_tokens[0])]
    if len(city_tokens) == 2:
        recs.append(Record(tid, "TEAM_CITY_2", city_tokens[1]))
    recs += [
        Record(tid, "TEAM_NAME", name),
        Record(tid, "TEAM_PTS", str(pts)),
        Record(tid, "TEAM_WINS", str(wins)),
        Record(tid, "TEAM_LOSSES", str(losses)),
    ]
    return ent, recs


def build_fixture_game() -> GameData:
    """The Bucks at Knicks box: a 105-104 visitor win with nine players."""
    entities = {}
    records = []
    for ent, recs in [
        _team(["New", "York"], "Knicks", "home", 104, 16, 19),
        _team(["Milwaukee"], "Bucks", "visitor", 105, 18, 16),
        _player("Carmelo", "Anthony", "home", 30, 11, 7, 2, 0, 37),
        _player("Derrick", "Rose", "home", 15, 3, 4, 1, 0, 33),
        _player("Courtney", "Lee", "home", 11, 2, 3, 1, 1, 38),
        _player("Giannis", "Antetokounmpo", "visitor", 27, 13, 4, 1, 3, 39),
        _player("Greg", "Monroe", "visitor", 18, 9, 4, 3, 1, 31),
        _player("Jabari", "Parker", "visitor", 15, 4, 3, 1, 0, 37),
        _player("Malcolm", "Brogdon", "visitor", 12, 6, 8, 0, 0, 38),
        _player("Mirza", "Teletovic", "visitor", 13, 1, 0, 0, 0, 21),
        _player("John", "Henson", "visitor", 2, 2, 0, 0, 0, 14),
    ]:
        entities[ent.id] = ent
        records.extend(recs)
    return GameData("fixture-105-104", entities, tuple(records))


# The sentence the supervision table is drawn from, with its gold labels.
WINDOW_TOKENS = (
    "Jabari", "Parker", "contributed", "15", "points", ",",
    "four", "rebounds", ",", "three", "assists",
)
WINDOW_Z = (1, 1, 0, 1, 0, 0, 1, 0, 0, 1, 0)
WINDOW_E = tuple(
    "jabari_parker" if z else None for z in WINDOW_Z
)
WINDOW_A = (
    "FIRST_NAME", "SECOND_NAME", None, "PLAYER_PTS", None, None,
    "PLAYER_REB", None, None, "PLAYER_AST", None,
)
WINDOW_N = (None, None, None, 0, None, None, 1, None, None, 1, None)


@pytest.fixture(scope="session")
def paper_game() -> GameData:
    return build_fixture_game()


@pytest.fixture(scope="session")
def overfit_run() -> tuple[Dataset, TrainResult, float]:
    """Ten-game synthetic corpus trained to reproduction (shared: training
    is the slow part of the suite)."""
    import time

    dataset = synth_corpus(seed=11, n_games=10, n_players=4)
    config = TrainConfig(
        embed_dim=32,
        hidden_dim=64,
        side_dim=8,
        epochs=500,
        seed=5,
        eval_every=50,
        early_stop_accuracy=0.995,
    )
    t0 = time.perf_counter()
    result = train(dataset, config)
    return dataset, result, time.perf_counter() - t0


@pytest.fixture(scope="session")
def writer_run() -> tuple[Dataset, TrainResult]:
    """Paired-writer corpus (same games, two styles) trained with the
    writer-conditioned context path."""
    dataset = synth_corpus(
        seed=21, n_games=6, n_players=4, writers=("blake", "casey"), paired_writers=True
    )
    config = TrainConfig(
        embed_dim=32,
        hidden_dim=64,
        side_dim=8,
        epochs=500,
        seed=9,
        eval_every=50,
        early_stop_accuracy=0.999,
        use_writer=True,
    )
    return dataset, train(dataset, config)


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(0)
