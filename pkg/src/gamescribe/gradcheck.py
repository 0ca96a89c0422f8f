"""Finite-difference verification of every autodiff primitive and of the
full sequence loss on a tiny two-token example.

Each check wraps a deterministic scalar function of a few Parameters and
compares backward() against central differences.  The same suite backs the
`gamescribe gradcheck` CLI and the acceptance tests.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from . import autodiff as ad
from .autodiff import GRUCell, LSTMCell, Parameter, Tensor, grad_check
from .model import ModelConfig, ModelParams
from .records import Dataset, Entity, GameData, LabeledSummary, Record
from .trainer import sequence_loss
from .vocab import build_vocabularies


def _param(rng: np.random.Generator, name: str, shape, low=-1.0, high=1.0) -> Parameter:
    return Parameter(name, rng.uniform(low, high, size=shape))


def _const(rng: np.random.Generator, shape) -> Tensor:
    return Tensor(rng.uniform(-1.0, 1.0, size=shape))


def primitive_checks(seed: int = 0) -> dict[str, Callable]:
    """Named builders; each returns (f, params) for one primitive check.

    The reductions mix the op output with fixed random weights drawn before
    the closure is built, so f is deterministic and every output coordinate
    carries a distinct gradient.
    """
    checks: dict[str, Callable] = {}

    def register(name):
        def deco(fn):
            checks[name] = fn
            return fn

        return deco

    @register("add")
    def _add(rng):
        a, b = _param(rng, "a", (5,)), _param(rng, "b", (5,))
        w = _const(rng, (5,))
        return lambda: ad.tsum(ad.mul(w, a + b)), [a, b]

    @register("mul")
    def _mul(rng):
        a, b = _param(rng, "a", (5,)), _param(rng, "b", (5,))
        w = _const(rng, (5,))
        return lambda: ad.tsum(ad.mul(w, a * b)), [a, b]

    @register("scale_add_scalar")
    def _scale(rng):
        a = _param(rng, "a", (4,))
        w = _const(rng, (4,))
        return lambda: ad.tsum(ad.mul(w, ad.add_scalar(ad.scale(a, -1.7), 0.3))), [a]

    @register("concat")
    def _concat(rng):
        a, b = _param(rng, "a", (3,)), _param(rng, "b", (4,))
        w = _const(rng, (7,))
        return lambda: ad.tsum(ad.mul(w, ad.concat([a, b]))), [a, b]

    @register("stack")
    def _stack(rng):
        a, b = _param(rng, "a", ()), _param(rng, "b", ())
        w = _const(rng, (3,))
        return lambda: ad.tsum(ad.mul(w, ad.stack([a, b, a * b]))), [a, b]

    @register("matmul_mat_vec")
    def _mv(rng):
        m, x = _param(rng, "m", (4, 3)), _param(rng, "x", (3,))
        w = _const(rng, (4,))
        return lambda: ad.tsum(ad.mul(w, ad.matmul(m, x))), [m, x]

    @register("matmul_mat_mat")
    def _mm(rng):
        a, b = _param(rng, "a", (3, 4)), _param(rng, "b", (4, 2))
        w = _const(rng, (3, 2))
        return lambda: ad.tsum(ad.mul(w, ad.matmul(a, b))), [a, b]

    @register("matmul_vec_vec")
    def _vv(rng):
        a, b = _param(rng, "a", (6,)), _param(rng, "b", (6,))
        return lambda: ad.matmul(a, b), [a, b]

    @register("bilinear")
    def _bilinear(rng):
        u, m, v = _param(rng, "u", (3,)), _param(rng, "m", (3, 4)), _param(rng, "v", (4,))
        return lambda: ad.bilinear(u, m, v), [u, m, v]

    @register("tanh")
    def _tanh(rng):
        a = _param(rng, "a", (6,))
        w = _const(rng, (6,))
        return lambda: ad.tsum(ad.mul(w, ad.tanh(a))), [a]

    @register("sigmoid")
    def _sigmoid(rng):
        a = _param(rng, "a", (6,))
        w = _const(rng, (6,))
        return lambda: ad.tsum(ad.mul(w, ad.sigmoid(a))), [a]

    @register("log")
    def _log(rng):
        a = _param(rng, "a", (5,), low=0.5, high=1.5)
        w = _const(rng, (5,))
        return lambda: ad.tsum(ad.mul(w, ad.log(a))), [a]

    @register("sum")
    def _sum(rng):
        a = _param(rng, "a", (3, 4))
        return lambda: ad.tsum(a), [a]

    @register("mean")
    def _mean(rng):
        a = _param(rng, "a", (7,))
        return lambda: ad.mean(ad.tanh(a)), [a]

    @register("softmax")
    def _softmax(rng):
        a = _param(rng, "a", (6,), low=-2.0, high=2.0)
        w = _const(rng, (6,))
        return lambda: ad.tsum(ad.mul(w, ad.softmax(a))), [a]

    @register("take")
    def _take(rng):
        a = _param(rng, "a", (5,))
        return lambda: ad.take(ad.tanh(a), 2), [a]

    @register("lookup")
    def _lookup(rng):
        tab = _param(rng, "tab", (4, 3))
        w = _const(rng, (3,))
        return lambda: ad.tsum(ad.mul(w, ad.lookup(tab, 1) + ad.lookup(tab, 3))), [tab]

    @register("bce_with_logits")
    def _bce(rng):
        a = _param(rng, "a", ())
        return lambda: ad.bce_with_logits(a, 1) + ad.bce_with_logits(ad.scale(a, 0.7), 0), [a]

    @register("nll_from_logits")
    def _nll(rng):
        a = _param(rng, "a", (7,), low=-2.0, high=2.0)
        return lambda: ad.nll_from_logits(a, 3), [a]

    @register("gru_cell")
    def _gru(rng):
        cell = GRUCell("gru", 3, 4, rng)
        x, h = _param(rng, "x", (3,)), _param(rng, "h", (4,))
        w = _const(rng, (4,))
        return lambda: ad.tsum(ad.mul(w, cell(x, h))), [x, h, *cell.parameters()]

    @register("lstm_cell")
    def _lstm(rng):
        cell = LSTMCell("lstm", 3, 4, rng)
        x, h, c = _param(rng, "x", (3,)), _param(rng, "h", (4,)), _param(rng, "c", (4,))
        wh, wc = _const(rng, (4,)), _const(rng, (4,))

        def f():
            hn, cn = cell(x, h, c)
            return ad.tsum(ad.mul(wh, hn)) + ad.tsum(ad.mul(wc, ad.tanh(cn)))

        return f, [x, h, c, *cell.parameters()]

    return checks


def check_primitives(epsilon: float = 1e-5, seed: int = 0) -> dict[str, float]:
    """Max relative finite-difference error per primitive."""
    results: dict[str, float] = {}
    for i, (name, builder) in enumerate(sorted(primitive_checks(seed).items())):
        rng = np.random.default_rng(seed * 1000 + i)
        f, params = builder(rng)
        report = grad_check(f, params, epsilon=epsilon)
        results[name] = report.max_relative_error
    return results


def toy_game() -> tuple[GameData, LabeledSummary]:
    """Minimal game plus a two-token labeled window exercising all heads:
    one numeric copy (z, e, a, n terms) and one plain word (y term)."""
    entities = {
        "memphis_kings": Entity("memphis_kings", "team", ("Memphis", "Kings"), "home"),
        "salem_jets": Entity("salem_jets", "team", ("Salem", "Jets"), "visitor"),
        "sam_stone": Entity("sam_stone", "player", ("Sam", "Stone"), "home"),
        "troy_walker": Entity("troy_walker", "player", ("Troy", "Walker"), "visitor"),
    }
    records = []
    for tid, pts in (("memphis_kings", 104), ("salem_jets", 98)):
        city, name = entities[tid].name_tokens
        records += [
            Record(tid, "TEAM_CITY", city),
            Record(tid, "TEAM_NAME", name),
            Record(tid, "TEAM_PTS", str(pts)),
        ]
    for pid, pts, reb in (("sam_stone", 15, 4), ("troy_walker", 9, 11)):
        first, second = entities[pid].name_tokens
        records += [
            Record(pid, "FIRST_NAME", first),
            Record(pid, "SECOND_NAME", second),
            Record(pid, "PLAYER_PTS", str(pts)),
            Record(pid, "PLAYER_REB", str(reb)),
        ]
    game = GameData(
        "toy",
        entities,
        tuple(records),
        writer="alex",
        summary=("Stone", "scored", "15", "points", "."),
    )
    labels = LabeledSummary(
        game_id="toy",
        tokens=("15", "points"),
        z=(1, 0),
        e=("sam_stone", None),
        a=("PLAYER_PTS", None),
        n=(0, None),
    )
    return game, labels


def check_sequence_loss(epsilon: float = 1e-5, use_writer: bool = False, seed: int = 7) -> float:
    """Max relative FD error of the full factored loss on the toy example."""
    game, labels = toy_game()
    dataset = Dataset(splits={"train": [(game, labels)]})
    vocabs = build_vocabularies(dataset, word_min_freq=1)
    config = ModelConfig(embed_dim=4, hidden_dim=6, side_dim=2, use_writer=use_writer)
    params = ModelParams(config, vocabs, seed=seed)
    widx = vocabs.writers.index(game.writer) if use_writer else None

    def f():
        return sequence_loss(params, game, labels, writer_index=widx).total

    report = grad_check(f, list(params.store), epsilon=epsilon)
    return report.max_relative_error


def run_all(epsilon: float = 1e-5, tolerance: float = 1e-4, seed: int = 0) -> dict:
    """Full gradient-integrity report for the CLI and acceptance suite."""
    per_primitive = check_primitives(epsilon=epsilon, seed=seed)
    full = {
        "sequence_loss": check_sequence_loss(epsilon=epsilon, use_writer=False),
        "sequence_loss_with_writer": check_sequence_loss(epsilon=epsilon, use_writer=True),
    }
    worst = max(max(per_primitive.values()), max(full.values()))
    return {
        "primitives": {k: per_primitive[k] for k in sorted(per_primitive)},
        "full_model": full,
        "max_relative_error": worst,
        "tolerance": tolerance,
        "passed": worst <= tolerance,
    }
