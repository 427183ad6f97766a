"""Photon-number statistics from click statistics by square-matrix inversion.

Only photon numbers ``0..N`` can be resolved by an ``N``-pixel detector, so
the click-probability matrix is cut to its first ``N + 1`` columns and the
resulting triangular system is solved. Sources with appreciable weight above
``N`` photons leak into the recovered entries; this is a property of the
truncation, not of conditioning.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .detector_model import ProbabilityMatrix
from .photon_sources import ClickStatistics, PhotonStatistics

__all__ = [
    "ReconstructionResult",
    "SingularTruncationError",
    "IllConditionedWarning",
    "reconstruct_statistics",
    "CONDITION_WARNING_THRESHOLD",
]

logger = logging.getLogger(__name__)

CONDITION_WARNING_THRESHOLD = 1e6


class SingularTruncationError(np.linalg.LinAlgError):
    """The square-truncated matrix cannot be inverted."""


class IllConditionedWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class ReconstructionResult:
    raw: np.ndarray
    clipped: PhotonStatistics
    condition_number: float
    truncation_note: bool

    @property
    def ill_conditioned(self) -> bool:
        return self.condition_number > CONDITION_WARNING_THRESHOLD

    def to_dict(self) -> dict:
        return {
            "raw": self.raw.tolist(),
            "clipped": self.clipped.probs.tolist(),
            "condition_number": self.condition_number,
            "truncation_note": self.truncation_note,
        }


def reconstruct_statistics(p: ProbabilityMatrix, q: ClickStatistics) -> ReconstructionResult:
    """Solve the ``(N+1) x (N+1)`` truncated system ``P_sq S = Q`` for ``S``.

    ``raw`` is the exact solution and can have negative entries; ``clipped``
    zeroes those and renormalizes. ``truncation_note`` is set when columns
    ``m > N`` were dropped.
    """
    n = p.n_pixels
    if q.probs.size != n + 1:
        raise ValueError(f"click statistics have {q.probs.size} entries, matrix has {n + 1} rows")
    if p.max_photons < n:
        raise ValueError(f"matrix covers m <= {p.max_photons}; need at least m <= {n}")
    square = p.entries[:, : n + 1]
    diag = np.diag(square)
    if np.any(diag == 0.0):
        raise SingularTruncationError(
            f"truncated matrix is singular (zero fidelity P_nn at n={np.flatnonzero(diag == 0)[0]})")
    cond = float(np.linalg.cond(square))
    if not np.isfinite(cond) or cond * np.finfo(float).eps >= 1.0:
        raise SingularTruncationError(f"truncated matrix is numerically singular (cond={cond:.3g})")
    if cond > CONDITION_WARNING_THRESHOLD:
        warnings.warn(f"truncated matrix condition number {cond:.3g} exceeds "
                      f"{CONDITION_WARNING_THRESHOLD:.0e}", IllConditionedWarning, stacklevel=2)

    lu, piv = scipy.linalg.lu_factor(square)
    raw = scipy.linalg.lu_solve((lu, piv), q.probs)

    clipped = np.clip(raw, 0.0, None)
    if clipped.sum() <= 0:
        raise ValueError("reconstruction has no positive mass")
    clipped = PhotonStatistics(clipped / clipped.sum(), tail_mass=0.0)
    return ReconstructionResult(raw, clipped, cond, p.max_photons > n)
