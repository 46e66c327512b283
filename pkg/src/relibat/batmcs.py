"""Stratified BAT-MCS reliability estimation and exact enumeration.

The first ``delta`` arcs are enumerated exhaustively as supervectors S. A
stratum is settled without sampling when its lower extension L(S) (remaining
arcs failed) is already connected, or when its upper extension U(S) (remaining
arcs working) is still disconnected. The simulation budget is shared among the
remaining strata in proportion to Pr(S), and each of those strata samples only
arcs delta+1..m.
"""

from __future__ import annotations

import csv
import io
import math
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .bat import MAX_WIDTH, bat_block, bat_blocks
from .montecarlo import TRIAL_BLOCK
from .network import Network, state_probabilities
from .plsa import BatchConnectivity
from .streams import stream

EXACT_MAX_ARCS = 30

CONNECTED = "decided-connected"
DISCONNECTED = "decided-disconnected"
SIMULATED = "simulated"


@dataclass(frozen=True)
class BatMcsConfig:
    delta: int
    n_sim: int
    n_run: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.delta < 1:
            raise ValueError("delta must be at least 1")
        if self.delta > MAX_WIDTH:
            raise ValueError(f"delta must not exceed {MAX_WIDTH}")
        if self.n_sim < 1:
            raise ValueError("n_sim must be at least 1")
        if self.n_run < 1:
            raise ValueError("n_run must be at least 1")


@dataclass(frozen=True)
class StratumReport:
    ordinal: int
    supervector: tuple[int, ...]
    probability: float
    status: str
    allocation: int = 0
    passes: int = 0

    @property
    def contribution(self) -> float:
        if self.status == CONNECTED:
            return self.probability
        if self.status == DISCONNECTED or self.allocation == 0:
            return 0.0
        return self.probability * self.passes / self.allocation


@dataclass
class BatMcsResult:
    estimate: float
    strata: list[StratumReport] = field(default_factory=list)
    draws: int = 0


@dataclass
class MultiRunResult:
    mean: float
    std: float
    runs: list[float]


def lower_extension(s: Sequence[int], m: int) -> tuple[int, ...]:
    if len(s) > m:
        raise ValueError(f"supervector width {len(s)} exceeds m={m}")
    return tuple(s) + (0,) * (m - len(s))


def upper_extension(s: Sequence[int], m: int) -> tuple[int, ...]:
    if len(s) > m:
        raise ValueError(f"supervector width {len(s)} exceeds m={m}")
    return tuple(s) + (1,) * (m - len(s))


def allocate_simulations(probabilities: Sequence[float], n_sim: int) -> list[int]:
    """floor(n_sim * Pr(S) / sum Pr), raised to 1 where the floor is 0."""
    probs = [float(p) for p in probabilities]
    if not probs:
        return []
    if any(p <= 0 for p in probs):
        raise ValueError("every stratum to simulate needs Pr(S) > 0")
    if n_sim < len(probs):
        raise ValueError(f"budget {n_sim} is smaller than the {len(probs)} strata to simulate")
    total = math.fsum(probs)
    return [max(1, math.floor(n_sim * p / total)) for p in probs]


def _classify(net: Network, probs: np.ndarray, delta: int, conn: BatchConnectivity):
    """Split all 2**delta strata into decided mass and strata left to sample.

    Returns (connected ordinals, connected probabilities, survivor ordinals,
    survivor supervectors, survivor probabilities, pruned ordinals).
    """
    m = net.m
    connected_mass: list[np.ndarray] = []
    connected_ords: list[np.ndarray] = []
    keep_ords, keep_rows, keep_pr, pruned = [], [], [], []
    for start, block in bat_blocks(delta):
        pr = state_probabilities(block, probs)
        ords = np.arange(start, start + block.shape[0], dtype=np.int64)
        lower = np.zeros((block.shape[0], m), dtype=np.uint8)
        lower[:, :delta] = block
        low_ok = conn(lower)
        if delta == m:
            up_ok = low_ok
        else:
            upper = np.ones_like(lower)
            upper[:, :delta] = block
            up_ok = np.ones_like(low_ok)
            pending = ~low_ok
            if pending.any():
                up_ok[pending] = conn(upper[pending])
        connected_mass.append(pr[low_ok])
        connected_ords.append(ords[low_ok])
        pruned.append(ords[~up_ok])
        live = ~low_ok & up_ok
        keep_ords.append(ords[live])
        keep_rows.append(block[live])
        keep_pr.append(pr[live])
    return (
        np.concatenate(connected_ords),
        np.concatenate(connected_mass),
        np.concatenate(keep_ords),
        np.concatenate(keep_rows),
        np.concatenate(keep_pr),
        np.concatenate(pruned),
    )


def _simulate_stratum(conn, probs, prefix, alloc, seed, key) -> int:
    m, delta = probs.shape[0], prefix.shape[0]
    rng = stream(seed, *key)
    tail_p = probs[delta:]
    passes = 0
    for start in range(0, alloc, TRIAL_BLOCK):
        count = min(TRIAL_BLOCK, alloc - start)
        states = np.empty((count, m), dtype=np.uint8)
        states[:, :delta] = prefix
        states[:, delta:] = rng.random((count, m - delta)) < tail_p
        passes += int(conn(states).sum())
    return passes


Simulator = Callable[[int, tuple, int], int]


def bat_mcs_estimate(
    net: Network,
    probs,
    cfg: BatMcsConfig,
    *,
    key: tuple = (),
    workers: int = 1,
    report: bool = False,
    simulator: Simulator | None = None,
) -> BatMcsResult:
    """One BAT-MCS run.

    Stratum with BAT ordinal k samples from the stream keyed ``key + (k,)``.
    ``simulator(ordinal, supervector, allocation) -> passes`` replaces the
    sampling step when given (used to replay fixed pass counts).
    """
    p = np.asarray(probs, dtype=float)
    if p.shape != (net.m,):
        raise ValueError(f"expected {net.m} probabilities, got {p.shape}")
    if cfg.delta > net.m:
        raise ValueError(f"delta={cfg.delta} exceeds the arc count m={net.m}")
    delta = cfg.delta
    conn = BatchConnectivity(net)
    c_ords, c_pr, s_ords, s_rows, s_pr, x_ords = _classify(net, p, delta, conn)

    positive = s_pr > 0
    alloc_pos = allocate_simulations(s_pr[positive].tolist(), cfg.n_sim)
    allocs = np.zeros(s_ords.shape[0], dtype=np.int64)
    allocs[positive] = alloc_pos

    jobs = [i for i in range(s_ords.shape[0]) if allocs[i] > 0]

    def run(i: int) -> int:
        ordinal = int(s_ords[i])
        if simulator is not None:
            return int(simulator(ordinal, tuple(int(b) for b in s_rows[i]), int(allocs[i])))
        return _simulate_stratum(conn, p, s_rows[i], int(allocs[i]), cfg.seed, key + (ordinal,))

    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(workers) as pool:
            passes_list = list(pool.map(run, jobs))
    else:
        passes_list = [run(i) for i in jobs]
    passes = np.zeros(s_ords.shape[0], dtype=np.int64)
    passes[jobs] = passes_list
    if np.any(passes > allocs) or np.any(passes < 0):
        raise ValueError("simulated pass count outside 0..allocation")

    simulated = [
        float(s_pr[i]) * int(passes[i]) / int(allocs[i]) for i in jobs
    ]
    estimate = math.fsum(c_pr.tolist() + simulated)
    result = BatMcsResult(estimate, draws=int(allocs.sum()) * (net.m - delta))
    if report:
        result.strata = _reports(
            delta, p, c_ords, c_pr, s_ords, s_rows, s_pr, allocs, passes, x_ords
        )
    return result


def _reports(delta, p, c_ords, c_pr, s_ords, s_rows, s_pr, allocs, passes, x_ords):
    out: list[StratumReport] = []
    for o, pr in zip(c_ords.tolist(), c_pr.tolist()):
        out.append(StratumReport(o, _bits(o, delta), pr, CONNECTED))
    for i, o in enumerate(s_ords.tolist()):
        out.append(
            StratumReport(
                o, tuple(int(b) for b in s_rows[i]), float(s_pr[i]), SIMULATED,
                int(allocs[i]), int(passes[i]),
            )
        )
    for o in x_ords.tolist():
        pr = float(state_probabilities(bat_block(delta, o, 1), p)[0])
        out.append(StratumReport(o, _bits(o, delta), pr, DISCONNECTED))
    out.sort(key=lambda r: r.ordinal)
    return out


def _bits(ordinal: int, width: int) -> tuple[int, ...]:
    return tuple((ordinal >> j) & 1 for j in range(width))


def multi_run_average(
    net: Network, probs, cfg: BatMcsConfig, *, key: tuple = (), workers: int = 1
) -> MultiRunResult:
    """Mean and sample standard deviation of ``cfg.n_run`` independent runs.

    Run r uses the streams keyed ``key + (r, ordinal)``.
    """

    def one(r: int) -> float:
        return bat_mcs_estimate(net, probs, cfg, key=key + (r,)).estimate

    if workers > 1 and cfg.n_run > 1:
        with ThreadPoolExecutor(workers) as pool:
            runs = list(pool.map(one, range(cfg.n_run)))
    else:
        runs = [one(r) for r in range(cfg.n_run)]
    mean = math.fsum(runs) / len(runs)
    std = statistics.stdev(runs) if len(runs) > 1 else 0.0
    return MultiRunResult(mean, std, runs)


def exact_reliability(net: Network, probs, max_arcs: int = EXACT_MAX_ARCS) -> float:
    """Sum of Pr(X) over every connected state vector X, enumerated in BAT order."""
    if net.m > max_arcs:
        raise ValueError(
            f"exact enumeration is limited to m <= {max_arcs} arcs (network has {net.m}); "
            "use the BAT-MCS estimator instead"
        )
    p = np.asarray(probs, dtype=float)
    if p.shape != (net.m,):
        raise ValueError(f"expected {net.m} probabilities, got {p.shape}")
    conn = BatchConnectivity(net)
    parts: list[float] = []
    for _, block in bat_blocks(net.m):
        ok = conn(block)
        parts.extend(state_probabilities(block[ok], p).tolist())
    return math.fsum(parts)


STRATA_COLUMNS = ["ordinal", "supervector", "probability", "status", "allocation", "passes", "contribution"]


def strata_csv(reports: Sequence[StratumReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(STRATA_COLUMNS)
    for r in reports:
        w.writerow([
            r.ordinal,
            "".join(str(b) for b in r.supervector),
            repr(r.probability),
            r.status,
            r.allocation,
            r.passes,
            repr(r.contribution),
        ])
    return buf.getvalue()
