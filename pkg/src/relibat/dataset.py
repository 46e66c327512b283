"""Time-dependent arc reliabilities, labelled reliability series and windows.

Row t of a dataset is P_t = (Pr(t, a_1), ..., Pr(t, a_m), R*(t)) for
t = 1..N_term; R*(t) is the BAT-MCS multi-run mean at that time step.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .batmcs import BatMcsConfig, multi_run_average
from .network import Network
from .streams import stream

DECAY_KINDS = ("linear", "exponential", "second-order")
DECAY_ALIASES = {"linear": "linear", "exp": "exponential", "exponential": "exponential",
                 "second": "second-order", "second-order": "second-order"}

DEFAULT_STEP = 1.0 / (2 * 256)
DEFAULT_RATE = 1.0 / 100
DEFAULT_WINDOW = 5
MIN_HORIZON = DEFAULT_WINDOW + 2

# top-level stream keys, kept apart so initial draws never reuse labelling streams
P0_STREAM = 0
LABEL_STREAM = 1


def decay_linear(p0, t, c: float = DEFAULT_STEP):
    """Zero-order law p0 - c t, floored at 0."""
    return np.maximum(np.asarray(p0, dtype=float) - np.asarray(t, dtype=float) * c, 0.0)


def decay_exponential(p0, t, rate: float = DEFAULT_RATE):
    return np.asarray(p0, dtype=float) * np.exp(-rate * np.asarray(t, dtype=float))


def decay_second_order(p0, t):
    p0 = np.asarray(p0, dtype=float)
    return p0 / (1.0 + np.asarray(t, dtype=float) * p0)


@dataclass(frozen=True)
class DecaySpec:
    kind: str = "linear"
    horizon: int = 256
    step: float = DEFAULT_STEP
    rate: float = DEFAULT_RATE

    def __post_init__(self):
        kind = DECAY_ALIASES.get(self.kind)
        if kind is None:
            raise ValueError(f"unknown decay kind {self.kind!r}; use linear, exp or second")
        object.__setattr__(self, "kind", kind)
        if self.horizon < 1:
            raise ValueError("horizon must be positive")

    def apply(self, p0, t):
        if self.kind == "linear":
            out = decay_linear(p0, t, self.step)
        elif self.kind == "exponential":
            out = decay_exponential(p0, t, self.rate)
        else:
            out = decay_second_order(p0, t)
        return np.clip(out, 0.0, 1.0)


@dataclass(frozen=True)
class TimeDistribution:
    """Arc reliabilities over time; ``table[t, i]`` is Pr(t, a_{i+1}), row 0 is Pr(a, 0)."""

    table: np.ndarray

    @property
    def steps(self) -> int:
        return self.table.shape[0] - 1

    @property
    def m(self) -> int:
        return self.table.shape[1]

    def row(self, t: int) -> np.ndarray:
        return self.table[t]


def sample_initial_probs(m: int, seed: int, low: float = 0.9, high: float = 1.0) -> np.ndarray:
    return stream(seed, P0_STREAM).uniform(low, high, size=m)


def build_distribution(
    net: Network,
    spec: DecaySpec,
    p0: Sequence[float] | None = None,
    seed: int | None = None,
    min_horizon: int = MIN_HORIZON,
) -> TimeDistribution:
    """Tabulate ``spec`` for t = 0..horizon.

    ``p0`` comes from the argument, else from the network file, else uniform
    draws on [0.9, 1.0] from ``seed``.
    """
    if spec.horizon < min_horizon:
        raise ValueError(f"horizon {spec.horizon} is below the minimum of {min_horizon} steps")
    if p0 is None:
        p0 = net.initial_probs
    if p0 is None:
        if seed is None:
            raise ValueError("no initial probabilities given and no seed to sample them")
        p0 = sample_initial_probs(net.m, seed)
    p0 = np.asarray(p0, dtype=float)
    if p0.shape != (net.m,):
        raise ValueError(f"expected {net.m} initial probabilities, got {p0.shape}")
    if np.any((p0 < 0) | (p0 > 1)) or np.any(np.isnan(p0)):
        raise ValueError("initial probabilities must lie in [0, 1]")
    t = np.arange(spec.horizon + 1, dtype=float)[:, None]
    table = spec.apply(p0[None, :], t)
    table[0] = p0
    return TimeDistribution(table)


@dataclass
class NormStats:
    mean: np.ndarray
    min: np.ndarray
    max: np.ndarray

    @classmethod
    def of(cls, features: np.ndarray) -> "NormStats":
        features = np.asarray(features, dtype=float)
        mean = np.array([math.fsum(col) / len(col) for col in features.T.tolist()])
        return cls(mean, features.min(axis=0), features.max(axis=0))

    @property
    def span(self) -> np.ndarray:
        return self.max - self.min

    def normalize(self, features) -> np.ndarray:
        x = np.asarray(features, dtype=float)
        span = self.span
        safe = np.where(span > 0, span, 1.0)
        return np.where(span > 0, (x - self.mean) / safe, 0.0)

    def denormalize(self, values, column: int = -1) -> np.ndarray:
        return np.asarray(values, dtype=float) * self.span[column] + self.mean[column]

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "min": self.min.tolist(), "max": self.max.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "NormStats":
        return cls(*(np.asarray(d[k], dtype=float) for k in ("mean", "min", "max")))


def mean_normalize(column) -> np.ndarray:
    """(x - mean) / (max - min); a constant column maps to zeros."""
    col = np.asarray(column, dtype=float).reshape(-1, 1)
    return NormStats.of(col).normalize(col)[:, 0]


@dataclass
class ReliabilityDataset:
    times: np.ndarray
    features: np.ndarray
    r_star_std: np.ndarray | None = None
    stats: NormStats = field(init=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.int64)
        self.features = np.asarray(self.features, dtype=float)
        if self.features.ndim != 2 or self.features.shape[0] != self.times.shape[0]:
            raise ValueError("features must be a (N_term, m+1) matrix aligned with times")
        self.stats = NormStats.of(self.features)

    @property
    def m(self) -> int:
        return self.features.shape[1] - 1

    @property
    def n_term(self) -> int:
        return self.features.shape[0]

    @property
    def r_star(self) -> np.ndarray:
        return self.features[:, -1]

    @property
    def normalized(self) -> np.ndarray:
        return self.stats.normalize(self.features)


def label_dataset(
    net: Network, dist: TimeDistribution, cfg: BatMcsConfig, *, workers: int = 1
) -> ReliabilityDataset:
    """Attach R*(t) to every time step t = 1..N_term.

    Step t uses the streams keyed (LABEL_STREAM, t, run, stratum), so results
    are the same for any worker count.
    """
    if dist.m != net.m:
        raise ValueError(f"distribution has {dist.m} arcs, network has {net.m}")
    times = list(range(1, dist.steps + 1))

    def one(t: int):
        return multi_run_average(net, dist.row(t), cfg, key=(LABEL_STREAM, t))

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(one, times))
    else:
        results = [one(t) for t in times]
    r = np.array([res.mean for res in results])
    features = np.column_stack([dist.table[1:], r])
    return ReliabilityDataset(np.array(times), features, np.array([res.std for res in results]))


@dataclass
class WindowSplit:
    train_x: np.ndarray
    train_y: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray
    target_index: np.ndarray

    @property
    def n_blocks(self) -> int:
        return self.train_x.shape[0] + self.test_x.shape[0]


def make_windows(features: np.ndarray, window: int = DEFAULT_WINDOW):
    """Rolling blocks: rows k..k+window-1 as input, last column of row k+window as target.

    There are N - window - 1 blocks (k = 0..N-window-2); the final row is never
    a target. Returns (inputs (B, window, F), targets (B, 1), target row indices).
    """
    x = np.asarray(features, dtype=float)
    if window < 1:
        raise ValueError("window must be positive")
    n = x.shape[0]
    if n < window + 2:
        raise ValueError(f"dataset has {n} rows; at least {window + 2} are needed for window {window}")
    count = n - window - 1
    idx = np.arange(count)[:, None] + np.arange(window)[None, :]
    inputs = x[idx]
    target_rows = np.arange(count) + window
    return inputs, x[target_rows, -1:].copy(), target_rows


def train_count(n_blocks: int, train_fraction: float) -> int:
    if not 0 < train_fraction <= 1:
        raise ValueError("train fraction must be in (0, 1]")
    return min(n_blocks, max(1, math.floor(train_fraction * n_blocks + 1e-9)))


def window_split(
    features: np.ndarray, window: int = DEFAULT_WINDOW, train_fraction: float = 0.9
) -> WindowSplit:
    """Time-ordered split of the rolling blocks; the first fraction trains."""
    inputs, targets, rows = make_windows(features, window)
    k = train_count(inputs.shape[0], train_fraction)
    return WindowSplit(inputs[:k], targets[:k], inputs[k:], targets[k:], rows)


# -- CSV ------------------------------------------------------------------


def _header(m: int) -> list[str]:
    return ["t"] + [f"pr_a{i}" for i in range(1, m + 1)] + ["r_star"]


def dataset_csv(ds: ReliabilityDataset) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(_header(ds.m))
    for t, row in zip(ds.times.tolist(), ds.features.tolist()):
        w.writerow([t] + [repr(v) for v in row])
    return buf.getvalue()


def normalized_csv(ds: ReliabilityDataset) -> str:
    """Normalized rows preceded by '# mean|min|max' lines holding the column stats."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for name, values in (("mean", ds.stats.mean), ("min", ds.stats.min), ("max", ds.stats.max)):
        buf.write(f"# {name}," + ",".join(repr(v) for v in values.tolist()) + "\n")
    w.writerow(_header(ds.m))
    for t, row in zip(ds.times.tolist(), ds.normalized.tolist()):
        w.writerow([t] + [repr(v) for v in row])
    return buf.getvalue()


def _parse_rows(text: str) -> tuple[list[str], list[list[str]], list[str]]:
    comments, rows = [], []
    for line in text.splitlines():
        if not line.strip():
            continue
        if line.startswith("#"):
            comments.append(line[1:].strip())
        else:
            rows.append(line)
    if not rows:
        raise ValueError("CSV has no header")
    parsed = list(csv.reader(rows))
    return parsed[0], parsed[1:], comments


def _check_header(header: list[str]) -> int:
    header = [h.strip() for h in header]
    if len(header) < 3 or header[0] != "t" or header[-1] != "r_star":
        raise ValueError("dataset header must be 't, pr_a1, ..., pr_am, r_star'")
    m = len(header) - 2
    if header != _header(m):
        raise ValueError("dataset header columns must be pr_a1..pr_am in order")
    return m


def _numbers(body: list[list[str]], width: int) -> tuple[np.ndarray, np.ndarray]:
    times, values = [], []
    for lineno, row in enumerate(body, start=2):
        if len(row) != width:
            raise ValueError(f"row {lineno}: expected {width} fields, got {len(row)}")
        try:
            times.append(int(row[0]))
            values.append([float(v) for v in row[1:]])
        except ValueError:
            raise ValueError(f"row {lineno}: non-numeric field") from None
    arr = np.array(values, dtype=float).reshape(len(values), width - 1)
    if not np.all(np.isfinite(arr)):
        raise ValueError("dataset contains non-finite values")
    return np.array(times, dtype=np.int64), arr


def read_dataset_csv(text: str) -> ReliabilityDataset:
    header, body, _ = _parse_rows(text)
    m = _check_header(header)
    times, features = _numbers(body, m + 2)
    if times.size and np.any(np.diff(times) <= 0):
        raise ValueError("time column must be strictly increasing")
    return ReliabilityDataset(times, features)


def read_normalized_csv(text: str) -> tuple[np.ndarray, np.ndarray, NormStats]:
    header, body, comments = _parse_rows(text)
    m = _check_header(header)
    stats = {}
    for c in comments:
        name, _, rest = c.partition(",")
        if name in ("mean", "min", "max"):
            stats[name] = np.array([float(v) for v in rest.split(",")])
    if set(stats) != {"mean", "min", "max"}:
        raise ValueError("normalized CSV lacks its mean/min/max stats block")
    times, values = _numbers(body, m + 2)
    return times, values, NormStats(stats["mean"], stats["min"], stats["max"])
