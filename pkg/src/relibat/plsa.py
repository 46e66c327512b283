"""Layered source-sink connectivity search on G(X)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .network import Network


@dataclass(frozen=True)
class LayerTrace:
    layers: tuple[frozenset[int], ...]
    connected: bool

    def as_lists(self) -> list[list[int]]:
        return [sorted(layer) for layer in self.layers]


def plsa_trace(net: Network, x: Sequence[int]) -> LayerTrace:
    """Run the layered search and return every layer built.

    Layer i holds the unvisited nodes joined by a working arc to layer i-1.
    The last layer is empty on a disconnected verdict.
    """
    if len(x) != net.m:
        raise ValueError(f"state vector has {len(x)} coordinates, network has {net.m} arcs")
    sink = net.sink
    layers = [frozenset([1])]
    if sink == 1:
        return LayerTrace(tuple(layers), True)
    visited = {1}
    frontier = [1]
    while True:
        nxt = set()
        for u in frontier:
            for idx, v in net.incident(u):
                if x[idx] and v not in visited:
                    nxt.add(v)
        layer = frozenset(nxt)
        layers.append(layer)
        if not layer:
            return LayerTrace(tuple(layers), False)
        if sink in layer:
            return LayerTrace(tuple(layers), True)
        visited |= nxt
        frontier = sorted(nxt)


def plsa_is_connected(net: Network, x: Sequence[int]) -> bool:
    return plsa_trace(net, x).connected


class BatchConnectivity:
    """Layered search applied to many state vectors at once.

    Each iteration advances one layer for every row: the new layer is the set of
    unvisited nodes reached over working arcs from the current frontier.
    """

    def __init__(self, net: Network):
        self.net = net
        u, v = net.endpoint_arrays()
        self._u = u
        self._v = v
        n = net.n
        self._to_v = np.zeros((net.m, n), dtype=np.float32)
        self._to_v[np.arange(net.m), v] = 1.0
        self._to_u = np.zeros((net.m, n), dtype=np.float32)
        self._to_u[np.arange(net.m), u] = 1.0

    def __call__(self, states: np.ndarray) -> np.ndarray:
        """Boolean verdict per row of a (K, m) 0/1 matrix."""
        states = np.asarray(states)
        if states.ndim != 2 or states.shape[1] != self.net.m:
            raise ValueError(f"expected a (K, {self.net.m}) state matrix, got {states.shape}")
        live = states.astype(bool)
        k, n = states.shape[0], self.net.n
        visited = np.zeros((k, n), dtype=bool)
        visited[:, 0] = True
        frontier = visited.copy()
        for _ in range(n - 1):
            via_u = (frontier[:, self._u] & live).astype(np.float32)
            via_v = (frontier[:, self._v] & live).astype(np.float32)
            reached = (via_u @ self._to_v + via_v @ self._to_u) > 0
            frontier = reached & ~visited
            if not frontier.any():
                break
            visited |= frontier
        return visited[:, n - 1]
