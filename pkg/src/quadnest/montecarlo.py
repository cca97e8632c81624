"""Monte Carlo harness for the nested-family Borel-Cantelli argument.

A synthetic nested system places, inside every dyadic cell of level n, a bad
sub-block of relative measure q_n (so the conditional probability of the bad
set in every level-n cell is exactly q_n).  The harness estimates the
measure of points hitting the bad sets in the tail window [tail_start,
horizon] - the finite surrogate for "belongs to infinitely many" - and
returns a binomial confidence radius.

Randomness is counter-based and splittable: per-cell offsets come from a
stateless splitmix64 hash of (seed, level, cell), trial points from a Philox
stream keyed by the seed.  Results are reproducible for a fixed seed
regardless of how trials are chunked across workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import QuadnestError


@dataclass(frozen=True)
class SyntheticNestedSystem:
    """Dyadic nested cells with per-level bad-block measures q_n.

    q[n-1] is the relative measure of the bad set inside each level-n cell,
    for n = 1..horizon.  ``placement`` is "hashed" (pseudo-random offset per
    cell, the independent-placement model) or "left" (deterministic).
    """

    q: tuple
    horizon: int
    seed: int
    placement: str = "hashed"
    tail_start: int | None = None

    def __post_init__(self):
        if self.horizon < 1 or len(self.q) < self.horizon:
            raise QuadnestError("need q values for 1..horizon")
        if any(not 0 <= float(x) <= 1 for x in self.q):
            raise QuadnestError("q values must be in [0, 1]")
        if self.placement not in ("hashed", "left"):
            raise QuadnestError("placement must be 'hashed' or 'left'")

    @property
    def effective_tail_start(self) -> int:
        return self.tail_start if self.tail_start is not None \
            else max(1, self.horizon // 2)

    def q_sum_tail(self) -> float:
        t = self.effective_tail_start
        return float(sum(self.q[t - 1:self.horizon]))


@dataclass(frozen=True)
class MeasureEstimate:
    """Estimated measure with a binomial normal-approximation radius."""

    estimate: float
    radius: float
    trials: int
    hits: int
    tail_start: int
    horizon: int
    seed: int
    z: float = 1.96

    def to_dict(self) -> dict:
        return {"estimate": self.estimate, "radius": self.radius,
                "trials": self.trials, "hits": self.hits,
                "tail_start": self.tail_start, "horizon": self.horizon,
                "seed": self.seed, "z": self.z}


def _splitmix64(x: np.ndarray) -> np.ndarray:
    """Stateless 64-bit mixer (splitmix64 finalizer), vectorized."""
    z = (x + np.uint64(0x9E3779B97F4A7C15)).astype(np.uint64)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def _cell_offsets(seed: int, level: int, cells: np.ndarray) -> np.ndarray:
    """Uniform [0,1) offset per cell, stateless in (seed, level, cell)."""
    with np.errstate(over="ignore"):
        key = (np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
               ^ _splitmix64(np.full_like(cells, np.uint64(level), dtype=np.uint64)))
        h = _splitmix64(cells.astype(np.uint64) ^ _splitmix64(key))
    return (h >> np.uint64(11)).astype(np.float64) / float(1 << 53)


def hits_tail(system: SyntheticNestedSystem, xs: np.ndarray) -> np.ndarray:
    """Boolean mask: which points land in some bad set of the tail window."""
    hit = np.zeros(xs.shape, dtype=bool)
    t0 = system.effective_tail_start
    for n in range(t0, system.horizon + 1):
        qn = float(system.q[n - 1])
        if qn <= 0:
            continue
        scaled = xs * (1 << n)
        cells = np.floor(scaled)
        offs = scaled - cells
        if system.placement == "hashed":
            starts = _cell_offsets(system.seed, n, cells.astype(np.uint64))
        else:
            starts = np.zeros_like(offs)
        rel = offs - starts
        rel = np.where(rel < 0, rel + 1.0, rel)
        hit |= rel < qn
    return hit


def borel_cantelli_harness(system: SyntheticNestedSystem, trials: int,
                           chunk: int = 1 << 16) -> MeasureEstimate:
    """Estimate the measure of points hitting bad sets in the tail window.

    Trials are uniform on [0,1) from a Philox stream keyed by the system
    seed; chunking only groups work, so any chunk size gives bit-identical
    results.  The radius is the z=1.96 binomial normal approximation.
    """
    if trials < 1:
        raise QuadnestError("trials must be >= 1")
    rng = np.random.Generator(np.random.Philox(key=system.seed))
    hits = 0
    done = 0
    while done < trials:
        nb = min(chunk, trials - done)
        xs = rng.random(nb)
        hits += int(hits_tail(system, xs).sum())
        done += nb
    p = hits / trials
    radius = 1.96 * math.sqrt(max(p * (1 - p), 1e-300) / trials) + 1.0 / trials
    return MeasureEstimate(p, radius, trials, hits,
                           system.effective_tail_start, system.horizon,
                           system.seed)
