"""Least-squares recovery of pixel efficiencies from click statistics.

The objective is the Euclidean distance between measured click
probabilities and those predicted for a known source, summed in quadrature
over all (Q, S) pairs supplied. Nelder-Mead runs in unconstrained
coordinates ``x`` with ``eta = x**2 / max(1, sum(x**2))``, which covers the
feasible set ``{eta >= 0, sum(eta) <= 1}`` including its boundary.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import optimize
from scipy.stats import qmc

from .detector_model import PixelEfficiencies, p_matrix_entries
from .photon_sources import ClickStatistics, PhotonStatistics

__all__ = [
    "FitOptions",
    "FitResult",
    "fit_efficiencies",
    "fit_efficiencies_joint",
    "residual_norm",
    "estimate_total_efficiency",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FitOptions:
    n_restarts: int = 16
    seed: int = 0
    fatol: float = 1e-12
    xatol: float = 1e-9
    max_evals: int = 100_000
    initial_step: float = 0.05
    # extra starting points (efficiency vectors), tried in addition to the restarts
    extra_starts: tuple = ()


@dataclass(frozen=True)
class FitResult:
    etas: PixelEfficiencies
    residual_norm: float
    n_restarts_used: int
    converged: bool
    start_residuals: tuple = field(default=(), compare=False, repr=False)

    def to_dict(self) -> dict:
        return {
            "etas_sorted": self.etas.etas.tolist(),
            "residual_norm": self.residual_norm,
            "converged": self.converged,
            "n_restarts_used": self.n_restarts_used,
        }


def _to_etas(x: np.ndarray) -> np.ndarray:
    w = x * x
    return w / max(1.0, w.sum())


def _to_params(etas: np.ndarray) -> np.ndarray:
    return np.sqrt(np.clip(etas, 0.0, None))


class _Objective:
    def __init__(self, pairs, n_pixels):
        self.n_pixels = n_pixels
        self.max_photons = max(s.max_photons for _, s in pairs)
        # pad sources to a common length
        self.q = np.stack([q.probs for q, _ in pairs])
        s = np.zeros((len(pairs), self.max_photons + 1))
        for k, (_, src) in enumerate(pairs):
            s[k, : src.probs.size] = src.probs
        self.s = s
        self.s_total = s.sum(axis=1)

    def norm(self, etas: np.ndarray) -> float:
        p = p_matrix_entries(etas, self.max_photons)
        pred = (self.s @ p.T) / self.s_total[:, None]
        return float(np.sqrt(((self.q - pred) ** 2).sum()))

    def __call__(self, x: np.ndarray) -> float:
        return self.norm(_to_etas(x))


def residual_norm(q: ClickStatistics, s: PhotonStatistics, etas) -> float:
    """``||Q - P(etas) S||_2`` with the source renormalized over its support."""
    eta = np.asarray(getattr(etas, "etas", etas), dtype=float)
    return _Objective([(q, s)], eta.size).norm(eta)


def estimate_total_efficiency(q: ClickStatistics, s: PhotonStatistics) -> float:
    """Total efficiency reproducing the observed no-click probability.

    Solves ``sum_m S(m) (1 - t)^m / sum(S) = Q(0)`` for ``t`` in ``[0, 1]``.
    """
    probs = s.probs / s.probs.sum()
    m = np.arange(probs.size)

    def gap(t):
        return probs @ (1.0 - t) ** m - q.probs[0]

    lo, hi = gap(0.0), gap(1.0)
    if lo <= 0:
        return 0.0
    if hi >= 0:
        return 1.0
    return float(optimize.brentq(gap, 0.0, 1.0, xtol=1e-14))


def _starting_points(pairs, n_pixels, options) -> list[np.ndarray]:
    total = np.mean([estimate_total_efficiency(q, s) for q, s in pairs])
    starts = [np.full(n_pixels, total / n_pixels)]
    starts += [np.asarray(e, dtype=float) for e in options.extra_starts]
    if options.n_restarts > 0:
        lhs = qmc.LatinHypercube(d=n_pixels, seed=np.random.default_rng(options.seed))
        u = lhs.random(options.n_restarts)
        # stratified splits of the estimated total among the pixels
        u = np.clip(u, 1e-6, None)
        starts += list(total * u / u.sum(axis=1, keepdims=True))
    return starts


def _initial_simplex(x0: np.ndarray, step: float) -> np.ndarray:
    simplex = np.tile(x0, (x0.size + 1, 1))
    for i in range(x0.size):
        simplex[i + 1, i] += step if x0[i] + step <= 1.0 else -step
    return simplex


def fit_efficiencies_joint(
    pairs: Sequence[tuple[ClickStatistics, PhotonStatistics]],
    n_pixels: int,
    options: Optional[FitOptions] = None,
) -> FitResult:
    """Fit efficiencies to several (click, source) pairs at once.

    Squared residuals of all pairs are summed. The best of the multi-start
    local searches is returned, efficiencies sorted ascending.
    """
    options = options or FitOptions()
    pairs = list(pairs)
    if not pairs:
        raise ValueError("need at least one (click statistics, source) pair")
    if n_pixels < 1:
        raise ValueError("n_pixels must be >= 1")
    for q, _ in pairs:
        if q.probs.size != n_pixels + 1:
            raise ValueError(
                f"click statistics have {q.probs.size} entries, expected {n_pixels + 1}")

    objective = _Objective(pairs, n_pixels)
    if np.all(objective.s[:, 1:] == 0):
        # vacuum source: every efficiency vector fits equally well
        logger.warning("source has no photons; efficiencies are unidentifiable")
        return FitResult(PixelEfficiencies(np.zeros(n_pixels)),
                         objective.norm(np.zeros(n_pixels)), 0, False)

    candidates = []
    start_residuals = []
    for eta0 in _starting_points(pairs, n_pixels, options):
        x0 = _to_params(eta0)
        start_residuals.append(objective(x0))
        res = optimize.minimize(
            objective, x0, method="Nelder-Mead",
            options={
                "xatol": options.xatol,
                "fatol": options.fatol,
                "maxfev": options.max_evals,
                "maxiter": options.max_evals,
                "initial_simplex": _initial_simplex(x0, options.initial_step),
            },
        )
        etas = np.sort(_to_etas(res.x))
        candidates.append((float(res.fun), tuple(etas), bool(res.success)))

    fun, etas, success = min(candidates, key=lambda c: (c[0], c[1]))
    return FitResult(
        PixelEfficiencies(np.array(etas)),
        fun,
        len(candidates),
        success,
        tuple(start_residuals),
    )


def fit_efficiencies(
    q: ClickStatistics,
    s: PhotonStatistics,
    n_pixels: Optional[int] = None,
    options: Optional[FitOptions] = None,
) -> FitResult:
    """Pixel efficiencies minimizing ``||Q - P(etas) S||_2``."""
    if n_pixels is None:
        n_pixels = q.n_pixels
    return fit_efficiencies_joint([(q, s)], n_pixels, options)
