"""Photon-number distributions and the map from source to click statistics."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import stats

from .detector_model import ProbabilityMatrix

__all__ = [
    "PhotonStatistics",
    "ClickStatistics",
    "poisson_statistics",
    "forward_map",
    "forward_map_raw",
]


@dataclass(frozen=True)
class PhotonStatistics:
    """Incident photon-number distribution ``S(m)`` for ``m = 0..M``.

    Truncated distributions may sum below 1; the missing mass is kept in
    ``tail_mass``.
    """

    probs: np.ndarray
    mu: Optional[float] = None
    tail_mass: Optional[float] = None

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float, copy=True).reshape(-1)
        if probs.size < 1:
            raise ValueError("photon statistics need at least one entry")
        if np.any(probs < 0) or not np.all(np.isfinite(probs)):
            raise ValueError("photon-number probabilities must be finite and >= 0")
        total = probs.sum()
        if total > 1.0 + 1e-12:
            raise ValueError(f"photon-number probabilities sum to {total:.15g} > 1")
        tail = self.tail_mass
        if tail is None:
            tail = max(0.0, 1.0 - total)
        if tail < 0:
            raise ValueError("tail_mass must be >= 0")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "tail_mass", float(tail))
        if self.mu is not None:
            if self.mu < 0:
                raise ValueError("mu must be >= 0")
            object.__setattr__(self, "mu", float(self.mu))

    @property
    def max_photons(self) -> int:
        return self.probs.size - 1

    def mean(self) -> float:
        return float(np.arange(self.probs.size) @ self.probs)

    def to_dict(self) -> dict:
        return {"mu": self.mu, "probs": self.probs.tolist(), "tail_mass": self.tail_mass}

    @classmethod
    def from_dict(cls, d: dict) -> "PhotonStatistics":
        return cls(d["probs"], d.get("mu"), d.get("tail_mass"))


@dataclass(frozen=True)
class ClickStatistics:
    """Probability ``Q(n)`` of an n-click, ``n = 0..N``."""

    probs: np.ndarray

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float, copy=True).reshape(-1)
        if probs.size < 2:
            raise ValueError("click statistics need entries for n = 0..N with N >= 1")
        if np.any(probs < 0) or not np.all(np.isfinite(probs)):
            raise ValueError("click probabilities must be finite and >= 0")
        if abs(probs.sum() - 1.0) > 1e-9:
            raise ValueError(f"click probabilities sum to {probs.sum():.15g}, not 1")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def n_pixels(self) -> int:
        return self.probs.size - 1

    def to_dict(self) -> dict:
        return {"probs": self.probs.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "ClickStatistics":
        return cls(d["probs"])


def poisson_statistics(mu: float, max_photons: int = 9) -> PhotonStatistics:
    """Poisson photon-number distribution with mean ``mu``, truncated at ``max_photons``."""
    if mu < 0 or not np.isfinite(mu):
        raise ValueError(f"mean photon number must be finite and >= 0, got {mu}")
    if max_photons < 0:
        raise ValueError(f"max_photons must be >= 0, got {max_photons}")
    m = np.arange(max_photons + 1)
    if mu == 0:
        probs = (m == 0).astype(float)
        tail = 0.0
    else:
        probs = stats.poisson.pmf(m, mu)
        tail = float(stats.poisson.sf(max_photons, mu))
    return PhotonStatistics(probs, mu=mu, tail_mass=tail)


def forward_map_raw(p: ProbabilityMatrix, s: PhotonStatistics) -> np.ndarray:
    """``P @ S`` without tail handling; sums to ``sum(S)``."""
    if s.probs.size != p.max_photons + 1:
        raise ValueError(
            f"source has {s.probs.size} photon numbers, matrix expects {p.max_photons + 1}")
    return p.entries @ s.probs


def forward_map(p: ProbabilityMatrix, s: PhotonStatistics) -> ClickStatistics:
    """Click statistics ``Q = P @ S``, renormalized over the truncated support."""
    raw = forward_map_raw(p, s)
    total = raw.sum()
    if total <= 0:
        raise ValueError("source carries no probability mass within the truncation")
    return ClickStatistics(raw / total)
