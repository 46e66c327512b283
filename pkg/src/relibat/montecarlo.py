"""Crude Monte Carlo estimation of two-terminal reliability."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .network import Network
from .plsa import BatchConnectivity
from .streams import stream

TRIAL_BLOCK = 1 << 15


@dataclass(frozen=True)
class McsConfig:
    n_sim: int
    seed: int = 0
    z: float = 1.96

    def __post_init__(self):
        if self.n_sim < 1:
            raise ValueError("n_sim must be at least 1")
        if self.z <= 0:
            raise ValueError("z must be positive")


@dataclass(frozen=True)
class McsResult:
    passes: int
    trials: int

    def __post_init__(self):
        if not 0 <= self.passes <= self.trials:
            raise ValueError("need 0 <= passes <= trials")

    @property
    def estimate(self) -> float:
        return self.passes / self.trials


def required_simulations(epsilon: float, z: float = 1.96) -> int:
    """Smallest N_sim with z**2 / (4 epsilon**2) <= N_sim.

    The inputs are read as the decimal numbers they print as, so that e.g.
    epsilon=0.01, z=1.96 gives 9604 and not 9605 from binary rounding.
    """
    if not (epsilon > 0 and z > 0):
        raise ValueError("epsilon and z must be positive")
    e, q = Fraction(repr(float(epsilon))), Fraction(repr(float(z)))
    return max(1, math.ceil(q * q / (4 * e * e)))


def sample_state(probs, rng) -> np.ndarray:
    """One state vector: arc i works iff its uniform draw on [0, 1) is < probs[i]."""
    p = np.asarray(probs, dtype=float)
    rho = rng.random(p.shape[0])
    return (rho < p).astype(np.uint8)


def sample_states(probs, count: int, rng) -> np.ndarray:
    """``count`` state vectors; draws are consumed trial by trial in arc order."""
    p = np.asarray(probs, dtype=float)
    rho = rng.random((count, p.shape[0]))
    return (rho < p).astype(np.uint8)


def _block_passes(conn: BatchConnectivity, probs, seed: int, key: tuple, count: int) -> int:
    rng = stream(seed, *key)
    return int(conn(sample_states(probs, count, rng)).sum())


def mcs_estimate(
    net: Network, probs, cfg: McsConfig, *, key: tuple = (), workers: int = 1
) -> McsResult:
    """Estimate R as the fraction of sampled states with 1 and n connected.

    Trials are cut into fixed blocks of ``TRIAL_BLOCK``; block b draws from
    the stream keyed ``key + (b,)``, so the result does not depend on ``workers``.
    """
    p = np.asarray(probs, dtype=float)
    if p.shape != (net.m,):
        raise ValueError(f"expected {net.m} probabilities, got {p.shape}")
    conn = BatchConnectivity(net)
    sizes = [min(TRIAL_BLOCK, cfg.n_sim - s) for s in range(0, cfg.n_sim, TRIAL_BLOCK)]
    jobs = [(key + (b,), size) for b, size in enumerate(sizes)]
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(workers) as pool:
            counts = list(pool.map(lambda j: _block_passes(conn, p, cfg.seed, *j), jobs))
    else:
        counts = [_block_passes(conn, p, cfg.seed, *j) for j in jobs]
    return McsResult(sum(counts), cfg.n_sim)
