"""Acceptance suite: one test and one PASS/FAIL line per criterion.

The lines are printed in the pytest terminal summary, or directly when the
module is run as a script: ``python3 tests/test_acceptance.py``.
"""

import json
import math
import os
import statistics
import sys
import time

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from oracles import (  # noqa: E402
    BRIDGE_ARCS,
    BRIDGE_TEXT,
    BRIDGE_P0,
    bridge_exact_t0,
    random_connected_network,
    truth_table_reliability,
)
from relibat.bat import bat_vectors  # noqa: E402
from relibat.batmcs import (  # noqa: E402
    DISCONNECTED,
    BatMcsConfig,
    bat_mcs_estimate,
    exact_reliability,
)
from relibat.cli import main  # noqa: E402
from relibat.dataset import (  # noqa: E402
    DecaySpec,
    build_distribution,
    label_dataset,
    window_split,
)
from relibat.lstm import LstmParams, gradients, loss, param_count  # noqa: E402
from relibat.montecarlo import McsConfig, mcs_estimate  # noqa: E402
from relibat.network import Network, parse_network  # noqa: E402
from relibat.plsa import plsa_trace  # noqa: E402

RESULTS: list[str] = []

# all 32 width-5 vectors in the order they are listed, two columns side by side
WIDTH5_ORDER = """
1 (0,0,0,0,0) 17 (0,0,0,0,1)
2 (1,0,0,0,0) 18 (1,0,0,0,1)
3 (0,1,0,0,0) 19 (0,1,0,0,1)
4 (1,1,0,0,0) 20 (1,1,0,0,1)
5 (0,0,1,0,0) 21 (0,0,1,0,1)
6 (1,0,1,0,0) 22 (1,0,1,0,1)
7 (0,1,1,0,0) 23 (0,1,1,0,1)
8 (1,1,1,0,0) 24 (1,1,1,0,1)
9 (0,0,0,1,0) 25 (0,0,0,1,1)
10 (1,0,0,1,0) 26 (1,0,0,1,1)
11 (0,1,0,1,0) 27 (0,1,0,1,1)
12 (1,1,0,1,0) 28 (1,1,0,1,1)
13 (0,0,1,1,0) 29 (0,0,1,1,1)
14 (1,0,1,1,0) 30 (1,0,1,1,1)
15 (0,1,1,1,0) 31 (0,1,1,1,1)
16 (1,1,1,1,0) 32 (1,1,1,1,1)
"""

FD_STEP = 1e-5
# gradients below this size are compared on an absolute 1e-9 scale, the
# roundoff limit of a 1e-5 central difference on O(1) losses
FD_FLOOR = 1e-4


def width5_order():
    listed = {}
    for line in WIDTH5_ORDER.strip().splitlines():
        a, xa, b, xb = line.split()
        listed[int(a)] = tuple(int(v) for v in xa.strip("()").split(","))
        listed[int(b)] = tuple(int(v) for v in xb.strip("()").split(","))
    return [listed[k] for k in range(1, 33)]


def verdict(number: int, title: str, ok: bool, detail: str, seconds: float) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title} | {detail} | {seconds:.2f}s"
    RESULTS.append(line)
    print(line, flush=True)
    assert ok, line


@pytest.fixture
def bridge():
    return parse_network(BRIDGE_TEXT)


def test_c01_bat_order():
    t0 = time.perf_counter()
    got = list(bat_vectors(5))
    ok = got == width5_order()
    verdict(1, "BAT width-5 order", ok, f"{len(got)} vectors, exact order {'matches' if ok else 'differs'}",
            time.perf_counter() - t0)


def test_c02_plsa_layers(bridge):
    t0 = time.perf_counter()
    trace = plsa_trace(bridge, (1, 1, 1, 1, 1))
    ok = trace.as_lists() == [[1], [2, 3], [4]] and trace.connected
    verdict(2, "PLSA layers on the bridge", ok, f"layers {trace.as_lists()} connected={trace.connected}",
            time.perf_counter() - t0)


def test_c03_stratum_report(bridge):
    t0 = time.perf_counter()
    res = bat_mcs_estimate(bridge, BRIDGE_P0, BatMcsConfig(2, 512, seed=0), report=True)
    by = {s.supervector: s for s in res.strata}
    live = [by[(1, 0)], by[(0, 1)], by[(1, 1)]]
    prs = [s.probability for s in live]
    allocs = [s.allocation for s in live]
    mass = math.fsum(prs)
    ok = (
        [round(p, 12) for p in prs] == [0.18, 0.08, 0.72]
        and allocs == [94, 41, 376]
        and by[(0, 0)].status == DISCONNECTED
        and round(mass, 12) == 0.98
    )
    verdict(3, "stratum report delta=2 N=512", ok,
            f"Pr={[round(p, 12) for p in prs]} alloc={allocs} (0,0)={by[(0, 0)].status} mass={mass!r}",
            time.perf_counter() - t0)


def test_c04_injected_passes(bridge):
    t0 = time.perf_counter()
    passes = {1: 55, 2: 39, 3: 237}
    res = bat_mcs_estimate(bridge, BRIDGE_P0, BatMcsConfig(2, 512),
                           simulator=lambda ordinal, s, alloc: passes[ordinal])
    ok = abs(res.estimate - 0.635246) <= 1e-6
    verdict(4, "combination with injected pass counts", ok, f"R*={res.estimate:.10f} target 0.635246",
            time.perf_counter() - t0)


def test_c05_exact_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        n, arcs = random_connected_network(rng, n_max=8, m_max=14)
        probs = rng.uniform(0.05, 0.95, size=len(arcs))
        net = Network(n, tuple(arcs))
        truth = truth_table_reliability(n, arcs, probs)
        exact = exact_reliability(net, probs)
        strat = bat_mcs_estimate(net, probs, BatMcsConfig(len(arcs), 1, seed=1)).estimate
        worst = max(worst, abs(exact - truth), abs(strat - exact))
    ok = worst <= 1e-12
    verdict(5, "delta=m equals exact equals truth table", ok, f"100 networks, max |diff|={worst:.2e}",
            time.perf_counter() - t0)


def test_c06_unbiased(bridge):
    t0 = time.perf_counter()
    exact = bridge_exact_t0()
    cfg = McsConfig(10_000, seed=6)
    runs = [mcs_estimate(bridge, BRIDGE_P0, cfg, key=(r,)).estimate for r in range(200)]
    mean = statistics.fmean(runs)
    se = statistics.stdev(runs) / math.sqrt(len(runs))
    z = abs(mean - exact) / se
    ok = z <= 4
    verdict(6, "MCS unbiased", ok, f"mean={mean:.6f} exact={exact:.6f} |z|={z:.2f} (limit 4)",
            time.perf_counter() - t0)


def test_c07_variance(bridge):
    t0 = time.perf_counter()
    budget = 1 << 14
    mcs = [mcs_estimate(bridge, BRIDGE_P0, McsConfig(budget, seed=s)).estimate for s in range(200)]
    strat = [bat_mcs_estimate(bridge, BRIDGE_P0, BatMcsConfig(2, budget, seed=s)).estimate for s in range(200)]
    v_mcs, v_bat = statistics.variance(mcs), statistics.variance(strat)
    ok = v_bat <= v_mcs
    verdict(7, "BAT-MCS variance <= MCS variance", ok, f"var BAT-MCS={v_bat:.3e} var MCS={v_mcs:.3e}",
            time.perf_counter() - t0)


def test_c08_decay_laws(bridge):
    t0 = time.perf_counter()
    t = np.arange(257, dtype=float)
    p0 = [0.95, 0.9, 0.99, 0.91, 1.0]
    exp_table = build_distribution(bridge, DecaySpec("exponential", 256), p0=p0).table
    slopes = [np.polyfit(t, np.log(exp_table[:, a]), 1)[0] for a in range(5)]
    slope_err = max(abs(s + 1 / 100) for s in slopes)
    sec_table = build_distribution(bridge, DecaySpec("second-order", 256), p0=p0).table
    inv_err = float(np.max(np.abs(1 / sec_table - 1 / sec_table[0] - t[:, None])))
    ok = slope_err <= 1e-9 and inv_err <= 1e-12
    verdict(8, "decay laws", ok, f"exp slope err={slope_err:.1e} second-order reciprocal err={inv_err:.1e}",
            time.perf_counter() - t0)


def _thirty_arc_network() -> Network:
    # ring on 15 nodes plus every skip-one chord
    ring = [(i, i % 15 + 1) for i in range(1, 16)]
    chords = [(i, (i + 1) % 15 + 1) for i in range(1, 16)]
    return Network(15, tuple(ring + chords))


def test_c09_window_blocks():
    t0 = time.perf_counter()
    net = _thirty_arc_network()
    dist = build_distribution(net, DecaySpec("linear", 256), seed=9)
    ds = label_dataset(net, dist, BatMcsConfig(4, 64, 1, seed=9))
    split = window_split(ds.normalized, 5, 0.9)
    shapes = (split.n_blocks, split.train_x.shape[0], split.test_x.shape[0], split.train_x.shape[2])
    ok = net.m == 30 and shapes == (250, 225, 25, 31)
    verdict(9, "rolling-window blocks", ok,
            f"blocks/train/test={shapes[:3]} features={shapes[3]}", time.perf_counter() - t0)


def test_c10_param_count():
    t0 = time.perf_counter()
    got = [param_count(eta, 10)[2] for eta in (31, 171, 1226)]
    ok = got == [1691, 7291, 49491]
    verdict(10, "LSTM parameter counts", ok, f"{got}", time.perf_counter() - t0)


def test_c11_gradient_check():
    t0 = time.perf_counter()
    rng = np.random.default_rng(11)
    worst = 0.0
    for trial in range(20):
        h, eta, blocks = int(rng.integers(1, 4)), int(rng.integers(1, 5)), int(rng.integers(1, 8))
        params = LstmParams.initialize(eta, h, trial)
        x = rng.normal(size=(blocks, 5, eta))
        y = rng.normal(size=(blocks, 1))
        grads, _ = gradients(params, x, y)
        for name, arr in params.arrays.items():
            for idx in np.ndindex(arr.shape):
                old = arr[idx]
                arr[idx] = old + FD_STEP
                up = loss(params, x, y)
                arr[idx] = old - FD_STEP
                down = loss(params, x, y)
                arr[idx] = old
                fd = (up - down) / (2 * FD_STEP)
                an = grads[name][idx]
                worst = max(worst, abs(fd - an) / max(abs(fd), abs(an), FD_FLOOR))
    ok = worst <= 1e-5
    verdict(11, "BPTT gradient check", ok, f"20 models, max relative error={worst:.2e}",
            time.perf_counter() - t0)


def test_c12_end_to_end(tmp_path, monkeypatch):
    """Default settings throughout; the seed is the CLI default, not tuned."""
    monkeypatch.delenv("RELIBAT_SEED", raising=False)
    t0 = time.perf_counter()
    net = tmp_path / "bridge.net"
    net.write_text(BRIDGE_TEXT)
    gen, tr = tmp_path / "gen", tmp_path / "train"
    assert main(["generate", str(net), "--out", str(gen)]) == 0
    assert main(["train", str(gen / "dataset.csv"), "--out", str(tr)]) == 0
    gen_m = json.loads((gen / "generate.manifest.json").read_text())
    tr_m = json.loads((tr / "train.manifest.json").read_text())
    test_mse = float(tr_m["result"]["test_mse"])
    ok = test_mse <= 1e-4
    detail = (f"nterm={gen_m['params']['nterm']} nsim={gen_m['params']['nsim']} nrun={gen_m['params']['nrun']} "
              f"epochs_run={tr_m['result']['epochs_run']} test MSE={test_mse:.3e} (limit 1e-4)")
    verdict(12, "desk-scale bridge run", ok, detail, time.perf_counter() - t0)


def test_c13_determinism(tmp_path):
    t0 = time.perf_counter()
    net = tmp_path / "bridge.net"
    net.write_text("# bridge\n4 5\n" + "".join(f"{u} {v} {p}\n" for (u, v), p in zip(BRIDGE_ARCS, BRIDGE_P0)))
    gen = tmp_path / "generate1"
    runs = {
        "estimate-mcs": ["estimate", str(net), "--method", "mcs", "--nsim", "40000", "--nrun", "3"],
        "estimate-batmcs": ["estimate", str(net), "--delta", "2", "--nsim", "40000", "--nrun", "3"],
        "generate": ["generate", str(net), "--nterm", "32", "--nsim", "2048", "--nrun", "2"],
        "train": ["train", str(gen / "dataset.csv"), "--epochs", "30", "--hidden", "5"],
        "predict": ["predict", str(tmp_path / "train1" / "model.json"), str(gen / "dataset.csv")],
    }
    checked, bad = 0, []
    for label, argv in runs.items():
        command = argv[0]
        outs = []
        for workers in (1, 8):
            out = tmp_path / f"{label}{workers}"
            seed = [] if command == "predict" else ["--seed", "13"]
            assert main(argv + seed + ["--workers", str(workers), "--out", str(out)]) == 0
            outs.append(out)
        m1, m8 = (json.loads((o / f"{command}.manifest.json").read_text()) for o in outs)
        same_workers = m1["outputs"] == m8["outputs"] and m1["result"] == m8["result"]
        replayed = main(["replay", str(outs[0] / f"{command}.manifest.json"),
                         "--out", str(tmp_path / f"replay-{label}"), "--workers", "8"]) == 0
        checked += 1
        if not (same_workers and replayed):
            bad.append(label)
    ok = not bad
    verdict(13, "bit-identical replays, workers 1 vs 8", ok,
            f"{checked} commands checked, differing: {bad or 'none'}", time.perf_counter() - t0)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
