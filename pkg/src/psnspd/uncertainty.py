"""Monte Carlo error propagation into fitted efficiencies and matrix entries.

Each Monte Carlo set resamples the click counts (independent binomials per
n-click class, zero-click class taking the remainder) and the mean photon
number (Gaussian with the flux uncertainty), refits the efficiencies and
rebuilds the matrix. Means and standard deviations are taken elementwise
over the surviving sets.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .detector_model import ProbabilityMatrix, build_p_matrix
from .efficiency_fit import FitOptions, fit_efficiencies
from .photon_sources import ClickStatistics, poisson_statistics

__all__ = [
    "FluxErrorBudget",
    "MatrixUncertainty",
    "TooManyDiscardedError",
    "PAPER_BUDGET",
    "flux_relative_uncertainty",
    "resample_click_counts",
    "resample_mu",
    "matrix_uncertainty",
    "set_generator",
]

logger = logging.getLogger(__name__)

_MAX_REDRAWS = 1000


class TooManyDiscardedError(RuntimeError):
    pass


@dataclass(frozen=True)
class FluxErrorBudget:
    """Relative standard uncertainties of the photon-flux calibration chain.

    ``sigma_at_rel`` is per attenuator; three attenuators are in the chain.
    """

    sigma_pm_rel: float = 0.0
    sigma_op_rel: float = 0.0
    sigma_at_rel: float = 0.0

    def __post_init__(self):
        for name in ("sigma_pm_rel", "sigma_op_rel", "sigma_at_rel"):
            v = getattr(self, name)
            if not v >= 0 or not math.isfinite(v):
                raise ValueError(f"{name} must be finite and >= 0, got {v}")

    def to_dict(self) -> dict:
        return {"sigma_pm_rel": self.sigma_pm_rel, "sigma_op_rel": self.sigma_op_rel,
                "sigma_at_rel": self.sigma_at_rel}

    @classmethod
    def from_dict(cls, d: dict) -> "FluxErrorBudget":
        return cls(float(d.get("sigma_pm_rel", 0.0)), float(d.get("sigma_op_rel", 0.0)),
                   float(d.get("sigma_at_rel", 0.0)))


# power meter 2.52 %, 99/1 coupler 0.19 %, attenuator repeatability 0.12 %
PAPER_BUDGET = FluxErrorBudget(0.0252, 0.0019, 0.0012)


def flux_relative_uncertainty(budget: FluxErrorBudget) -> float:
    """Relative uncertainty on the number of photons per pulse."""
    return math.sqrt(budget.sigma_pm_rel ** 2 + budget.sigma_op_rel ** 2
                     + 3.0 * budget.sigma_at_rel ** 2)


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def resample_click_counts(q_observed: ClickStatistics, n_trials_per_set: int, seed=None) -> ClickStatistics:
    """Binomially resample each n >= 1 class; the 0-click class takes the rest.

    If the independent draws overshoot ``n_trials_per_set`` the whole set is
    redrawn.
    """
    if n_trials_per_set < 1:
        raise ValueError("n_trials_per_set must be >= 1")
    rng = _rng(seed)
    p = np.clip(q_observed.probs[1:], 0.0, 1.0)
    for _ in range(_MAX_REDRAWS):
        clicks = rng.binomial(n_trials_per_set, p)
        zero = n_trials_per_set - int(clicks.sum())
        if zero >= 0:
            counts = np.concatenate([[zero], clicks])
            return ClickStatistics(counts / n_trials_per_set)
    raise RuntimeError(
        f"resampled click counts exceeded {n_trials_per_set} trials {_MAX_REDRAWS} times")


def resample_mu(mu: float, flux_rel_sigma: float, seed=None) -> float:
    """Gaussian draw around ``mu`` with standard deviation ``flux_rel_sigma * mu``, redrawn while negative."""
    if mu < 0:
        raise ValueError("mu must be >= 0")
    if flux_rel_sigma < 0:
        raise ValueError("flux_rel_sigma must be >= 0")
    if mu == 0 or flux_rel_sigma == 0:
        return float(mu)
    rng = _rng(seed)
    while True:
        draw = rng.normal(mu, flux_rel_sigma * mu)
        if draw >= 0:
            return float(draw)


@dataclass(frozen=True)
class MatrixUncertainty:
    mean_matrix: ProbabilityMatrix
    sigma_matrix: np.ndarray
    etas_mean: np.ndarray
    etas_sigma: np.ndarray
    n_trials: int
    n_discarded: int = 0

    def to_dict(self) -> dict:
        return {
            "mean_matrix": self.mean_matrix.to_dict(),
            "sigma_matrix": self.sigma_matrix.tolist(),
            "etas_mean_sorted": self.etas_mean.tolist(),
            "etas_sigma_sorted": self.etas_sigma.tolist(),
            "n_trials": self.n_trials,
            "n_discarded": self.n_discarded,
        }


def set_generator(seed: int, index: int) -> np.random.Generator:
    """Independent generator for Monte Carlo set ``index``."""
    return np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(seed, spawn_key=(index,))))


def _one_set(args):
    index, q, mu, n_pixels, n_t, rel, seed, max_photons, options = args
    rng = set_generator(seed, index)
    q_set = resample_click_counts(q, n_t, rng)
    mu_set = resample_mu(mu, rel, rng)
    fit = fit_efficiencies(q_set, poisson_statistics(mu_set, max_photons), n_pixels, options)
    p = build_p_matrix(fit.etas, max_photons)
    return fit.converged, fit.etas.etas, p.entries


def matrix_uncertainty(
    q_observed: ClickStatistics,
    mu: float,
    n_pixels: Optional[int] = None,
    n_mc_sets: int = 200,
    n_trials_per_set: int = 10_000_000,
    budget: FluxErrorBudget = PAPER_BUDGET,
    seed: int = 0,
    max_photons: int = 9,
    fit_options: Optional[FitOptions] = None,
    workers: int = 1,
) -> MatrixUncertainty:
    """Spread of the fitted matrix and efficiencies over resampled data sets.

    Sets whose fit does not converge are discarded; more than 10 % discarded
    raises :class:`TooManyDiscardedError`. Each set's fit starts from the
    fit of the unperturbed data plus ``fit_options.n_restarts`` random points.
    """
    if n_mc_sets < 2:
        raise ValueError("need at least 2 Monte Carlo sets")
    if n_pixels is None:
        n_pixels = q_observed.n_pixels
    rel = flux_relative_uncertainty(budget)
    if fit_options is None:
        fit_options = FitOptions(n_restarts=2, seed=seed)
    nominal = fit_efficiencies(q_observed, poisson_statistics(mu, max_photons), n_pixels,
                               replace(fit_options, n_restarts=max(fit_options.n_restarts, 16)))
    options = replace(fit_options,
                      extra_starts=tuple(fit_options.extra_starts) + (tuple(nominal.etas.etas),))

    jobs = [(i, q_observed, mu, n_pixels, n_trials_per_set, rel, seed, max_photons, options)
            for i in range(n_mc_sets)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_one_set, jobs))
    else:
        results = [_one_set(j) for j in jobs]

    kept = [(e, p) for ok, e, p in results if ok]
    n_discarded = len(results) - len(kept)
    if n_discarded > 0.1 * n_mc_sets:
        raise TooManyDiscardedError(f"{n_discarded} of {n_mc_sets} fits did not converge")
    if len(kept) < 2:
        raise TooManyDiscardedError("fewer than 2 converged fits")
    if n_discarded:
        logger.warning("discarded %d non-converged Monte Carlo sets", n_discarded)

    etas = np.array([e for e, _ in kept])
    mats = np.array([p for _, p in kept])
    mean = mats.mean(axis=0)
    # exact structural entries stay exact: every trial shares them
    sigma = np.where(np.all(mats == mats[:1], axis=0), 0.0, mats.std(axis=0, ddof=1))
    return MatrixUncertainty(
        ProbabilityMatrix(mean, n_pixels, max_photons),
        sigma,
        etas.mean(axis=0),
        etas.std(axis=0, ddof=1),
        len(kept),
        n_discarded,
    )
