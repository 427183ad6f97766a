"""Click-probability matrix of a parallel multi-pixel detector.

Photons in a pulse are absorbed one at a time. Each photon fires an active
pixel ``i`` with probability ``etas[i]`` or is missed; a fired pixel stays
inactive for the rest of the pulse. ``P[n, m]`` is the probability that
exactly ``n`` distinct pixels have fired after ``m`` photons.

Two independent routes compute ``P``:

* :func:`build_p_matrix` evolves a distribution over fired-pixel subsets
  (bitmask states, ``O(M * 2**N * N)``).
* :func:`enumerate_pnm_closed_form` sums literally over the positions of the
  detected photons and the ordered sequence of pixels that fired.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "PixelEfficiencies",
    "ProbabilityMatrix",
    "ActiveSubsetDistribution",
    "as_efficiencies",
    "evolve_one_photon",
    "build_p_matrix",
    "p_matrix_entries",
    "transition_matrix",
    "enumerate_pnm_closed_form",
]

# dense transition matrices above this many pixels get too large
_DENSE_MAX_PIXELS = 10
_SUM_TOL = 1e-12


@dataclass(frozen=True)
class PixelEfficiencies:
    """Per-pixel detection probabilities."""

    etas: np.ndarray

    def __post_init__(self):
        etas = np.array(self.etas, dtype=float, copy=True).reshape(-1)
        if etas.size < 1:
            raise ValueError("at least one pixel efficiency is required")
        if not np.all(np.isfinite(etas)):
            raise ValueError(f"efficiencies must be finite, got {etas}")
        if np.any(etas < 0.0) or np.any(etas > 1.0):
            raise ValueError(f"each efficiency must lie in [0, 1], got {etas}")
        if etas.sum() > 1.0 + _SUM_TOL:
            raise ValueError(
                f"efficiencies must sum to at most 1, got sum {etas.sum():.12g}")
        etas.setflags(write=False)
        object.__setattr__(self, "etas", etas)

    @property
    def n_pixels(self) -> int:
        return int(self.etas.size)

    @property
    def total(self) -> float:
        """System detection efficiency, the single-photon click probability."""
        return float(self.etas.sum())

    def sorted(self) -> "PixelEfficiencies":
        return PixelEfficiencies(np.sort(self.etas))

    def to_dict(self) -> dict:
        return {"etas": self.etas.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "PixelEfficiencies":
        return cls(d["etas"])


def as_efficiencies(etas) -> PixelEfficiencies:
    if isinstance(etas, PixelEfficiencies):
        return etas
    return PixelEfficiencies(etas)


@dataclass(frozen=True)
class ProbabilityMatrix:
    """``(N+1) x (M+1)`` matrix of n-click probabilities given m photons."""

    entries: np.ndarray
    n_pixels: int
    max_photons: int

    def __post_init__(self):
        entries = np.array(self.entries, dtype=float, copy=True)
        shape = (self.n_pixels + 1, self.max_photons + 1)
        if entries.shape != shape:
            raise ValueError(f"entries shape {entries.shape} != {shape}")
        if np.any(entries < -_SUM_TOL) or np.any(entries > 1.0 + _SUM_TOL):
            raise ValueError("entries must be probabilities in [0, 1]")
        n_idx, m_idx = np.indices(shape)
        if np.any(entries[n_idx > m_idx] != 0.0):
            raise ValueError("entries with more clicks than photons must be 0")
        col_err = np.abs(entries.sum(axis=0) - 1.0).max()
        if col_err > 1e-9:
            raise ValueError(f"columns must sum to 1 (max error {col_err:.3g})")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    def __getitem__(self, nm):
        return self.entries[nm]

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    def truncated(self, max_photons: int) -> "ProbabilityMatrix":
        """Drop columns ``m > max_photons``."""
        if not 0 <= max_photons <= self.max_photons:
            raise ValueError(f"cannot truncate M={self.max_photons} to {max_photons}")
        return ProbabilityMatrix(self.entries[:, : max_photons + 1],
                                 self.n_pixels, max_photons)

    def to_dict(self) -> dict:
        return {
            "n_pixels": self.n_pixels,
            "max_photons": self.max_photons,
            "entries": self.entries.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ProbabilityMatrix":
        return cls(np.asarray(d["entries"], dtype=float),
                   int(d["n_pixels"]), int(d["max_photons"]))


@dataclass(frozen=True)
class ActiveSubsetDistribution:
    """Distribution over which pixels have fired so far in the current pulse.

    ``probs[mask]`` is the probability of fired set ``mask`` (bit ``i`` set
    means pixel ``i`` fired).
    """

    n_pixels: int
    probs: np.ndarray

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float, copy=True).reshape(-1)
        if probs.size != 1 << self.n_pixels:
            raise ValueError(
                f"expected {1 << self.n_pixels} subset probabilities, got {probs.size}")
        if np.any(probs < -_SUM_TOL):
            raise ValueError("subset probabilities must be nonnegative")
        if abs(probs.sum() - 1.0) > _SUM_TOL * max(1, probs.size):
            raise ValueError(f"subset probabilities sum to {probs.sum():.15g}")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def empty(cls, n_pixels: int) -> "ActiveSubsetDistribution":
        """No pixel fired yet, with certainty."""
        probs = np.zeros(1 << n_pixels)
        probs[0] = 1.0
        return cls(n_pixels, probs)

    @classmethod
    def from_dict(cls, n_pixels: int, d: dict) -> "ActiveSubsetDistribution":
        """Build from ``{frozenset_of_pixel_indices: prob}`` (0-based pixels)."""
        probs = np.zeros(1 << n_pixels)
        for subset, p in d.items():
            mask = 0
            for i in subset:
                if not 0 <= i < n_pixels:
                    raise ValueError(f"pixel {i} outside 0..{n_pixels - 1}")
                mask |= 1 << i
            probs[mask] += p
        return cls(n_pixels, probs)

    def as_dict(self, atol: float = 0.0) -> dict[frozenset, float]:
        """Nonzero subsets as ``{frozenset_of_pixel_indices: prob}``."""
        out = {}
        for mask, p in enumerate(self.probs):
            if p > atol:
                out[frozenset(i for i in range(self.n_pixels) if mask >> i & 1)] = float(p)
        return out

    def click_distribution(self) -> np.ndarray:
        """Probability of each number of fired pixels, ``0..N``."""
        return _popcount_aggregator(self.n_pixels) @ self.probs


@lru_cache(maxsize=None)
def _subset_tables(n_pixels: int):
    masks = np.arange(1 << n_pixels)
    fired = (masks[:, None] >> np.arange(n_pixels)) & 1
    # for each pixel j: masks lacking j, and where they go when j fires
    src = np.stack([masks[fired[:, j] == 0] for j in range(n_pixels)])
    dst = src | (1 << np.arange(n_pixels))[:, None]
    fired = fired.astype(float)
    fired.setflags(write=False)
    return fired, src, dst


@lru_cache(maxsize=None)
def _popcount_aggregator(n_pixels: int) -> np.ndarray:
    fired, _, _ = _subset_tables(n_pixels)
    counts = fired.sum(axis=1).astype(int)
    agg = np.zeros((n_pixels + 1, 1 << n_pixels))
    agg[counts, np.arange(1 << n_pixels)] = 1.0
    agg.setflags(write=False)
    return agg


@lru_cache(maxsize=None)
def _fire_operators(n_pixels: int) -> np.ndarray:
    # _fire_operators(N)[j] moves mass from mask to mask | (1 << j)
    _, src, dst = _subset_tables(n_pixels)
    ops = np.zeros((n_pixels, 1 << n_pixels, 1 << n_pixels))
    for j in range(n_pixels):
        ops[j, dst[j], src[j]] = 1.0
    ops.setflags(write=False)
    return ops


@lru_cache(maxsize=None)
def _below_diagonal(n_pixels: int, max_photons: int):
    return np.tril_indices(n_pixels + 1, -1, max_photons + 1)


def _miss_probabilities(etas: np.ndarray) -> np.ndarray:
    # per fired-set mask: 1 - sum of still-active efficiencies
    fired, _, _ = _subset_tables(etas.size)
    return np.clip(1.0 - (1.0 - fired) @ etas, 0.0, 1.0)


def evolve_one_photon(state: ActiveSubsetDistribution, etas) -> ActiveSubsetDistribution:
    """Absorb one more photon into the fired-subset distribution."""
    etas = as_efficiencies(etas)
    if etas.n_pixels != state.n_pixels:
        raise ValueError(
            f"state has {state.n_pixels} pixels but {etas.n_pixels} efficiencies given")
    return ActiveSubsetDistribution(state.n_pixels, _step(state.probs, etas.etas))


def _step(probs: np.ndarray, etas: np.ndarray) -> np.ndarray:
    _, src, dst = _subset_tables(etas.size)
    out = probs * _miss_probabilities(etas)
    moved = probs[src] * etas[:, None]
    out += np.bincount(dst.ravel(), weights=moved.ravel(), minlength=probs.size)
    return out


def transition_matrix(etas) -> np.ndarray:
    """Dense single-photon transition matrix on fired-subset states."""
    eta = as_efficiencies(etas).etas
    return np.diag(_miss_probabilities(eta)) + np.tensordot(
        eta, _fire_operators(eta.size), axes=1)


def build_p_matrix(etas, max_photons: int = 9) -> ProbabilityMatrix:
    """Click-probability matrix for photon numbers ``0..max_photons``."""
    etas = as_efficiencies(etas)
    if max_photons < 0:
        raise ValueError(f"max_photons must be >= 0, got {max_photons}")
    return ProbabilityMatrix(p_matrix_entries(etas.etas, max_photons),
                             etas.n_pixels, max_photons)


def p_matrix_entries(eta: np.ndarray, max_photons: int) -> np.ndarray:
    """Unvalidated core of :func:`build_p_matrix` for optimizer inner loops."""
    n = eta.size
    cols = np.empty((1 << n, max_photons + 1))
    state = np.zeros(1 << n)
    state[0] = 1.0
    cols[:, 0] = state
    if n <= _DENSE_MAX_PIXELS:
        t = np.diag(_miss_probabilities(eta)) + np.tensordot(
            eta, _fire_operators(n), axes=1)
        for m in range(1, max_photons + 1):
            state = t @ state
            cols[:, m] = state
    else:
        for m in range(1, max_photons + 1):
            state = _step(state, eta)
            cols[:, m] = state
    entries = _popcount_aggregator(n) @ cols
    # exact structural zeros; rounding can leave ~1e-17 residue
    entries[_below_diagonal(n, max_photons)] = 0.0
    return entries


def enumerate_pnm_closed_form(etas, n: int, m: int) -> float:
    """``P[n, m]`` by explicit enumeration of detection histories.

    Sums over every set of positions ``g1 < ... < gn`` in ``1..m`` at which a
    photon was detected and every ordered sequence of ``n`` distinct pixels
    that fired. Between detections, photons are missed with probability
    ``1 - sum(etas of pixels still active)``.

    Returns 0 for ``n > m``; raises for ``n > N``.
    """
    etas = as_efficiencies(etas)
    eta = etas.etas
    if n < 0 or m < 0:
        raise ValueError("n and m must be nonnegative")
    if n > etas.n_pixels:
        raise ValueError(f"{n}-click impossible with {etas.n_pixels} pixels")
    if n > m:
        return 0.0
    miss_all = max(1.0 - eta.sum(), 0.0)
    if n == 0:
        return miss_all ** m

    positions = np.array(list(itertools.combinations(range(1, m + 1), n)))
    bounds = np.concatenate([
        np.zeros((len(positions), 1), dtype=int),
        positions,
        np.full((len(positions), 1), m + 1),
    ], axis=1)
    gaps = np.diff(bounds, axis=1) - 1  # misses before each detection and after the last

    total = 0.0
    for seq in itertools.permutations(range(etas.n_pixels), n):
        seq = list(seq)
        miss = np.empty(n + 1)
        miss[0] = miss_all
        for k in range(1, n + 1):
            miss[k] = 1.0 - np.delete(eta, seq[:k]).sum()
        miss = np.clip(miss, 0.0, 1.0)
        fire = np.prod(eta[seq])
        if fire == 0.0:
            continue
        total += fire * np.prod(miss[None, :] ** gaps, axis=1).sum()
    return float(total)
