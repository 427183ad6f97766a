"""Seeded pulse-by-pulse simulation of the detector.

Pulses are split into fixed-size blocks; block ``b`` draws from its own
generator seeded by ``SeedSequence(seed, spawn_key=(b,))``. The histogram
therefore depends only on ``(config, seed)``, not on how blocks are
scheduled across workers.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .detector_model import PixelEfficiencies, as_efficiencies
from .photon_sources import ClickStatistics, PhotonStatistics

__all__ = [
    "SimulationConfig",
    "ClickCountsHistogram",
    "simulate_pulses",
    "block_generator",
]

DEFAULT_BLOCK_SIZE = 1 << 16


@dataclass(frozen=True)
class SimulationConfig:
    """Pulse train settings. Give either ``mu`` (Poisson draws) or ``source``."""

    etas: PixelEfficiencies
    n_pulses: int
    seed: int = 0
    mu: Optional[float] = None
    source: Optional[PhotonStatistics] = None
    block_size: int = DEFAULT_BLOCK_SIZE

    def __post_init__(self):
        object.__setattr__(self, "etas", as_efficiencies(self.etas))
        if int(self.n_pulses) < 1:
            raise ValueError("n_pulses must be >= 1")
        object.__setattr__(self, "n_pulses", int(self.n_pulses))
        if (self.mu is None) == (self.source is None):
            raise ValueError("give exactly one of mu or source")
        if self.mu is not None and (self.mu < 0 or not np.isfinite(self.mu)):
            raise ValueError("mu must be finite and >= 0")
        if self.source is not None and self.source.probs.sum() <= 0:
            raise ValueError("source has no probability mass")
        if self.block_size < 1:
            raise ValueError("block_size must be >= 1")


@dataclass(frozen=True)
class ClickCountsHistogram:
    """Number of pulses that produced each n-click, ``n = 0..N``."""

    counts: np.ndarray
    n_pulses: int
    seed: Optional[int] = None

    def __post_init__(self):
        counts = np.array(self.counts, dtype=np.int64, copy=True).reshape(-1)
        if np.any(counts < 0):
            raise ValueError("counts must be nonnegative")
        if int(counts.sum()) != int(self.n_pulses):
            raise ValueError(f"counts sum to {counts.sum()}, expected {self.n_pulses}")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "n_pulses", int(self.n_pulses))

    def frequencies(self) -> ClickStatistics:
        return ClickStatistics(self.counts / self.n_pulses)

    def to_dict(self) -> dict:
        return {"n_pulses": self.n_pulses, "counts": self.counts.tolist(), "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "ClickCountsHistogram":
        return cls(d["counts"], d["n_pulses"], d.get("seed"))


def block_generator(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(seed, spawn_key=(block,))))


def _simulate_block(cfg: SimulationConfig, block: int, size: int) -> np.ndarray:
    rng = block_generator(cfg.seed, block)
    eta = cfg.etas.etas
    n_pix = eta.size
    if cfg.mu is not None:
        photons = rng.poisson(cfg.mu, size)
    else:
        s = cfg.source.probs
        photons = rng.choice(s.size, size=size, p=s / s.sum())
    fired = np.zeros((size, n_pix), dtype=bool)
    for k in range(int(photons.max(initial=0))):
        idx = np.flatnonzero(photons > k)
        u = rng.random(idx.size)
        cum = np.cumsum(np.where(fired[idx], 0.0, eta), axis=1)
        hit = u < cum[:, -1]
        # first pixel whose cumulative active efficiency exceeds u
        pixel = (u[:, None] < cum).argmax(axis=1)
        fired[idx[hit], pixel[hit]] = True
    return np.bincount(fired.sum(axis=1), minlength=n_pix + 1)


def simulate_pulses(cfg: SimulationConfig, workers: int = 1) -> ClickCountsHistogram:
    """Simulate ``cfg.n_pulses`` pulses and histogram the number of fired pixels."""
    n_blocks, last = divmod(cfg.n_pulses, cfg.block_size)
    sizes = [cfg.block_size] * n_blocks + ([last] if last else [])
    jobs = list(enumerate(sizes))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda j: _simulate_block(cfg, *j), jobs))
    else:
        parts = [_simulate_block(cfg, b, n) for b, n in jobs]
    counts = np.sum(parts, axis=0, dtype=np.int64)
    return ClickCountsHistogram(counts, cfg.n_pulses, cfg.seed)
