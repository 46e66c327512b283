"""Binary-state networks, state vectors and elementary probabilities.

Nodes are numbered 1..n in files and messages; node 1 is the source and
node n the sink. Arc ``a_i`` always occupies coordinate ``i`` of every state
vector, in the order arcs appear in the network file.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class NetworkFormatError(ValueError):
    """Raised for malformed network files; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Network:
    """Undirected simple graph with source node 1 and sink node n.

    ``initial_probs`` holds the optional per-arc reliabilities Pr(a, 0) read
    from the file; it is ``None`` unless every arc line carries one.
    """

    node_count: int
    arcs: tuple[tuple[int, int], ...]
    initial_probs: tuple[float, ...] | None = None
    _adjacency: tuple[tuple[tuple[int, int], ...], ...] = field(
        init=False, repr=False, compare=False
    )

    def __post_init__(self):
        n = self.node_count
        if n < 2:
            raise ValueError("a network needs at least two nodes")
        seen = set()
        touched = set()
        for idx, (u, v) in enumerate(self.arcs, start=1):
            if not (1 <= u <= n and 1 <= v <= n):
                raise ValueError(f"arc a{idx}=({u},{v}) has a node outside 1..{n}")
            if u == v:
                raise ValueError(f"arc a{idx}=({u},{v}) is a self-loop")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise ValueError(f"arc a{idx}=({u},{v}) duplicates an earlier arc")
            seen.add(key)
            touched.update(key)
        missing = sorted(set(range(1, n + 1)) - touched)
        if missing:
            raise ValueError(f"nodes {missing} are not incident to any arc")
        if self.initial_probs is not None:
            if len(self.initial_probs) != len(self.arcs):
                raise ValueError("initial_probs length differs from arc count")
            _check_probs(self.initial_probs)

        adj: list[list[tuple[int, int]]] = [[] for _ in range(n + 1)]
        for idx, (u, v) in enumerate(self.arcs):
            adj[u].append((idx, v))
            adj[v].append((idx, u))
        object.__setattr__(self, "_adjacency", tuple(tuple(a) for a in adj))

    @property
    def m(self) -> int:
        return len(self.arcs)

    @property
    def n(self) -> int:
        return self.node_count

    @property
    def source(self) -> int:
        return 1

    @property
    def sink(self) -> int:
        return self.node_count

    def incident(self, node: int) -> tuple[tuple[int, int], ...]:
        """(arc index, other endpoint) pairs for ``node``; arc index is 0-based."""
        return self._adjacency[node]

    def endpoint_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """0-based endpoint arrays ``(u, v)`` of length m."""
        uv = np.asarray(self.arcs, dtype=np.intp).reshape(-1, 2) - 1
        return uv[:, 0], uv[:, 1]


def _check_probs(probs) -> None:
    for i, p in enumerate(probs, start=1):
        if not (0.0 <= p <= 1.0) or math.isnan(p):
            raise ValueError(f"probability for a{i} is {p}, outside [0, 1]")


def parse_network(text: str) -> Network:
    """Parse the line-oriented network format.

    First non-comment line is ``n m``; then m lines ``u v [p0]``. Lines starting
    with ``#`` and blank lines are ignored.
    """
    rows: list[tuple[int, list[str]]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        rows.append((lineno, line.split()))
    if not rows:
        raise NetworkFormatError("empty network file")

    lineno, head = rows[0]
    if len(head) != 2:
        raise NetworkFormatError("header must be 'n m'", lineno)
    try:
        n, m = int(head[0]), int(head[1])
    except ValueError:
        raise NetworkFormatError("header must hold two integers", lineno) from None
    if n < 2 or m < 1:
        raise NetworkFormatError("need n >= 2 and m >= 1", lineno)
    if len(rows) - 1 != m:
        raise NetworkFormatError(f"header declares {m} arcs, found {len(rows) - 1}", lineno)

    arcs: list[tuple[int, int]] = []
    probs: list[float | None] = []
    seen: dict[tuple[int, int], int] = {}
    for lineno, parts in rows[1:]:
        if len(parts) not in (2, 3):
            raise NetworkFormatError("arc line must be 'u v [p0]'", lineno)
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise NetworkFormatError("arc endpoints must be integers", lineno) from None
        if not (1 <= u <= n and 1 <= v <= n):
            raise NetworkFormatError(f"node id out of range 1..{n}", lineno)
        if u == v:
            raise NetworkFormatError(f"self-loop at node {u}", lineno)
        key = (min(u, v), max(u, v))
        if key in seen:
            raise NetworkFormatError(f"duplicate arc ({u},{v}), first on line {seen[key]}", lineno)
        seen[key] = lineno
        p0 = None
        if len(parts) == 3:
            try:
                p0 = float(parts[2])
            except ValueError:
                raise NetworkFormatError("p0 must be a number", lineno) from None
            if not (0.0 <= p0 <= 1.0):
                raise NetworkFormatError(f"p0={p0} outside [0, 1]", lineno)
        arcs.append((u, v))
        probs.append(p0)

    initial = None
    if all(p is not None for p in probs):
        initial = tuple(probs)  # type: ignore[arg-type]
    try:
        return Network(n, tuple(arcs), initial)
    except ValueError as exc:
        raise NetworkFormatError(str(exc)) from None


def format_network(net: Network, probs: Sequence[float] | None = None) -> str:
    probs = net.initial_probs if probs is None else probs
    lines = [f"{net.n} {net.m}"]
    for i, (u, v) in enumerate(net.arcs):
        lines.append(f"{u} {v}" if probs is None else f"{u} {v} {probs[i]!r}")
    return "\n".join(lines) + "\n"


def state_probabilities(states: np.ndarray, probs) -> np.ndarray:
    """Row-wise product rule for a (K, w) 0/1 matrix over the first w probs."""
    states = np.asarray(states)
    w = states.shape[-1]
    p = np.asarray(probs, dtype=float)[:w]
    factors = np.where(states.astype(bool), p, 1.0 - p)
    out = np.ones(states.shape[:-1])
    # Left-to-right multiplication keeps scalar and batched paths bit-identical.
    for j in range(w):
        out = out * factors[..., j]
    return out


def vector_probability(x: Sequence[int], probs: Sequence[float]) -> float:
    """Probability of the full state vector ``x`` under independent arcs."""
    if len(x) != len(probs):
        raise ValueError(f"state vector has {len(x)} coordinates, probs has {len(probs)}")
    return float(state_probabilities(np.asarray(x).reshape(1, -1), probs)[0])


def supervector_probability(s: Sequence[int], probs: Sequence[float]) -> float:
    """Probability that the first ``len(s)`` arcs take the states in ``s``."""
    if len(s) > len(probs):
        raise ValueError(f"supervector width {len(s)} exceeds arc count {len(probs)}")
    if len(s) == 0:
        return 1.0
    return float(state_probabilities(np.asarray(s).reshape(1, -1), probs)[0])
