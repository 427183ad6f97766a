"""Threshold-count records, their conversion to click statistics, and workflows."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .detector_model import ProbabilityMatrix, build_p_matrix
from .efficiency_fit import FitOptions, FitResult, fit_efficiencies_joint
from .mc_simulator import ClickCountsHistogram
from .photon_sources import ClickStatistics, PhotonStatistics, poisson_statistics
from .reconstruction import ReconstructionResult, reconstruct_statistics

__all__ = [
    "CountRecord",
    "FitWorkflowConfig",
    "counts_to_click_statistics",
    "histogram_to_record",
    "load_records",
    "run_fit_workflow",
    "run_reconstruct_workflow",
    "reconstruction_table",
]


@dataclass(frozen=True)
class CountRecord:
    """Time-tagger counts above each amplitude threshold.

    ``threshold_counts[k]`` counts events at or above the ``(k+1)``-click
    level, so the sequence is non-increasing.
    """

    threshold_counts: tuple
    rep_rate_hz: float
    acquisition_time_s: float
    mu: Optional[float] = None

    def __post_init__(self):
        counts = tuple(int(c) for c in self.threshold_counts)
        if not counts:
            raise ValueError("need at least one threshold count")
        if any(c < 0 for c in counts):
            raise ValueError("threshold counts must be nonnegative")
        for k in range(len(counts) - 1):
            if counts[k] < counts[k + 1]:
                raise ValueError(
                    f"threshold counts must be nested: c_{k + 1}={counts[k]} < c_{k + 2}={counts[k + 1]}")
        if self.rep_rate_hz <= 0 or self.acquisition_time_s <= 0:
            raise ValueError("rep_rate_hz and acquisition_time_s must be positive")
        if counts[0] > self.total_pulses():
            raise ValueError(
                f"c_1={counts[0]} exceeds the {self.total_pulses()} pulses sent")
        if self.mu is not None and self.mu < 0:
            raise ValueError("mu must be >= 0")
        object.__setattr__(self, "threshold_counts", counts)

    @property
    def n_pixels(self) -> int:
        return len(self.threshold_counts)

    def total_pulses(self) -> int:
        """Pulses sent, ``round(R t)``."""
        return int(round(self.rep_rate_hz * self.acquisition_time_s))

    def to_dict(self) -> dict:
        return {
            "threshold_counts": list(self.threshold_counts),
            "rep_rate_hz": self.rep_rate_hz,
            "acquisition_time_s": self.acquisition_time_s,
            "mu": self.mu,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CountRecord":
        return cls(tuple(d["threshold_counts"]), float(d["rep_rate_hz"]),
                   float(d["acquisition_time_s"]), d.get("mu"))


def counts_to_click_statistics(rec: CountRecord, background_rate_hz: float = 0.0) -> ClickStatistics:
    """Click statistics from nested threshold counts.

    Exclusive counts are ``c_n - c_{n+1}`` (``c_N`` for the top class); the
    zero-click class is the remainder of ``round(R t)`` pulses.
    ``background_rate_hz`` optionally removes ``round(rate * t)`` dark events
    from the 1-click class.
    """
    c = np.array(rec.threshold_counts + (0,), dtype=np.int64)
    exclusive = c[:-1] - c[1:]
    if background_rate_hz:
        if background_rate_hz < 0:
            raise ValueError("background_rate_hz must be >= 0")
        dark = int(round(background_rate_hz * rec.acquisition_time_s))
        exclusive[0] = max(0, exclusive[0] - dark)
    n_tot = rec.total_pulses()
    zero = n_tot - int(exclusive.sum())
    counts = np.concatenate([[zero], exclusive])
    return ClickStatistics(counts / n_tot)


def histogram_to_record(hist: ClickCountsHistogram, rep_rate_hz: float = 1e7,
                        mu: Optional[float] = None) -> CountRecord:
    """Encode a simulated histogram as cumulative threshold counts."""
    cumulative = np.cumsum(hist.counts[::-1])[::-1][1:]
    return CountRecord(tuple(int(c) for c in cumulative), rep_rate_hz,
                       hist.n_pulses / rep_rate_hz, mu)


def load_records(path: Union[str, Path]) -> list[CountRecord]:
    """Read one record object or an array of them from a JSON file."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(data, dict):
        data = [data]
    return [CountRecord.from_dict(d) for d in data]


@dataclass(frozen=True)
class FitWorkflowConfig:
    max_photons: int = 9
    background_rate_hz: float = 0.0
    fit_options: FitOptions = field(default_factory=FitOptions)


ClickInput = Union[CountRecord, ClickStatistics]


def _as_click_statistics(item: ClickInput, background_rate_hz: float = 0.0) -> ClickStatistics:
    if isinstance(item, CountRecord):
        return counts_to_click_statistics(item, background_rate_hz)
    return item


def run_fit_workflow(
    records: Sequence[ClickInput],
    mus: Optional[Sequence[float]] = None,
    config: Optional[FitWorkflowConfig] = None,
) -> tuple[FitResult, ProbabilityMatrix]:
    """Joint efficiency fit across records taken at different mean photon numbers.

    ``mus`` defaults to each record's own ``mu``.
    """
    config = config or FitWorkflowConfig()
    records = list(records)
    if not records:
        raise ValueError("need at least one record")
    if mus is None:
        mus = [getattr(r, "mu", None) for r in records]
    if len(mus) != len(records):
        raise ValueError(f"{len(records)} records but {len(mus)} mu values")
    if any(m is None for m in mus):
        raise ValueError("every record needs a mean photon number")
    qs = [_as_click_statistics(r, config.background_rate_hz) for r in records]
    n_pixels = {q.n_pixels for q in qs}
    if len(n_pixels) != 1:
        raise ValueError(f"records disagree on the number of pixels: {sorted(n_pixels)}")
    (n,) = n_pixels
    pairs = [(q, poisson_statistics(mu, config.max_photons)) for q, mu in zip(qs, mus)]
    fit = fit_efficiencies_joint(pairs, n, config.fit_options)
    return fit, build_p_matrix(fit.etas, config.max_photons)


def reconstruction_table(result: ReconstructionResult,
                         s_true: Optional[PhotonStatistics] = None) -> list[dict]:
    """Rows ``{m, s_true, s_raw, s_clipped}`` for plotting."""
    rows = []
    for m, (raw, clipped) in enumerate(zip(result.raw, result.clipped.probs)):
        truth = None
        if s_true is not None and m < s_true.probs.size:
            truth = float(s_true.probs[m])
        rows.append({"m": m, "s_true": truth, "s_raw": float(raw), "s_clipped": float(clipped)})
    return rows


def run_reconstruct_workflow(
    q: ClickInput,
    matrix: ProbabilityMatrix,
    s_true: Optional[PhotonStatistics] = None,
    background_rate_hz: float = 0.0,
) -> tuple[ReconstructionResult, list[dict]]:
    """Reconstruct photon statistics and tabulate them against an optional truth."""
    q = _as_click_statistics(q, background_rate_hz)
    if q.n_pixels != matrix.n_pixels:
        raise ValueError(
            f"click statistics have {q.n_pixels + 1} classes, matrix has {matrix.n_pixels + 1} rows")
    result = reconstruct_statistics(matrix, q)
    return result, reconstruction_table(result, s_true)
