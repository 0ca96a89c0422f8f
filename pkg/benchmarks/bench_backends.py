"""Benchmark the numba-jit recurrent-cell kernels against the pure-numpy
fallback.

Times forward+backward of the GRU and LSTM cells at desk-scale and
full-scale hidden sizes, plus one teacher-forced training step.  Run:

    python benchmarks/bench_backends.py [--repeats 2000]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from gamescribe.kernels import reference

try:
    from gamescribe.kernels import jit
except ImportError:
    jit = None


def time_fn(fn, repeats: int) -> float:
    fn()  # warm-up (and jit compilation)
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - t0) / repeats


def bench_cells(impl, hidden: int, input_dim: int, repeats: int) -> dict[str, float]:
    rng = np.random.default_rng(0)
    x = rng.normal(size=input_dim)
    h = rng.normal(size=hidden)
    c = rng.normal(size=hidden)
    g = rng.normal(size=hidden)
    gwx = rng.normal(size=(3 * hidden, input_dim)) * 0.1
    gwh = rng.normal(size=(3 * hidden, hidden)) * 0.1
    gb = np.zeros(3 * hidden)
    lwx = rng.normal(size=(4 * hidden, input_dim)) * 0.1
    lwh = rng.normal(size=(4 * hidden, hidden)) * 0.1
    lb = np.zeros(4 * hidden)

    def gru_step():
        h_new, reset, update, cand, gated = impl.gru_forward(x, h, gwx, gwh, gb)
        impl.gru_backward(g, x, h, gwx, gwh, reset, update, cand, gated)

    def lstm_step():
        h_new, c_new, i_g, f_g, cand, o_g, tc = impl.lstm_forward(x, h, c, lwx, lwh, lb)
        impl.lstm_backward(g, g, x, h, c, lwx, lwh, i_g, f_g, cand, o_g, tc)

    return {
        f"gru_fwd_bwd_h{hidden}": time_fn(gru_step, repeats),
        f"lstm_fwd_bwd_h{hidden}": time_fn(lstm_step, repeats),
    }


def bench_training_step() -> dict[str, float]:
    """One teacher-forced loss+backward under whichever backend is active."""
    from gamescribe.autodiff import backward
    from gamescribe.kernels import backend_name
    from gamescribe.model import ModelConfig, ModelParams
    from gamescribe.synth import synth_corpus
    from gamescribe.trainer import sequence_loss, with_end_marker
    from gamescribe.vocab import build_vocabularies

    ds = synth_corpus(3, 2, 4)
    vocabs = build_vocabularies(ds, word_min_freq=1)
    params = ModelParams(ModelConfig(embed_dim=32, hidden_dim=64), vocabs, seed=0)
    game, labels = ds.train[0]
    labels = with_end_marker(labels)

    def step():
        params.store.zero_grads()
        backward(sequence_loss(params, game, labels).total)

    return {f"train_step_{backend_name()}": time_fn(step, 30)}


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=2000)
    args = parser.parse_args()

    impls = [("numpy", reference)]
    if jit is not None:
        impls.append(("numba", jit))
    else:
        print("numba not installed; timing the numpy fallback only")

    rows: dict[str, dict[str, float]] = {}
    for name, impl in impls:
        rows[name] = {}
        for hidden, input_dim in ((64, 32), (512, 128)):
            rows[name].update(bench_cells(impl, hidden, input_dim, args.repeats))

    keys = list(next(iter(rows.values())))
    width = max(len(k) for k in keys) + 2
    header = f"{'kernel':<{width}}" + "".join(f"{n:>14}" for n in rows) + (
        f"{'speedup':>10}" if len(rows) > 1 else ""
    )
    print(header)
    print("-" * len(header))
    for key in keys:
        line = f"{key:<{width}}"
        for name in rows:
            line += f"{rows[name][key] * 1e6:>12.1f}us"
        if len(rows) > 1:
            line += f"{rows['numpy'][key] / rows['numba'][key]:>9.2f}x"
        print(line)

    print()
    for key, val in bench_training_step().items():
        print(f"{key:<{width}}{val * 1e3:>12.2f}ms")


if __name__ == "__main__":
    main()
