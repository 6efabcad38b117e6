"""Point-wise error metrics, tracking-error indices and throughput stats."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .decimator import DecisionRecord
from .errors import InvalidInputError, UndefinedMetricError
from .estimators import MeasurementTriplet, TripletSeries
from .waveform import GroundTruth, eval_reference

TRE_FORMULAS = ("rms", "printed")


def tve(estimate, reference):
    """Relative complex-plane distance in percent."""
    ref_mag = np.abs(reference)
    if np.any(ref_mag == 0.0):
        raise UndefinedMetricError("TVE undefined for zero reference phasor")
    out = 100.0 * np.abs(np.asarray(estimate) - np.asarray(reference)) / ref_mag
    return float(out) if np.ndim(out) == 0 else out


def fe(estimate, reference):
    """Signed frequency error in mHz."""
    return 1e3 * (np.asarray(estimate) - np.asarray(reference)) if np.ndim(estimate) \
        else 1e3 * (estimate - reference)


def rfe(estimate, reference):
    """Signed ROCOF error in Hz/s."""
    return np.asarray(estimate) - np.asarray(reference) if np.ndim(estimate) \
        else estimate - reference


def _aggregate(dev: np.ndarray, formula: str) -> float:
    if formula == "rms":
        return float(np.sqrt(np.mean(dev * dev)))
    if formula == "printed":
        # audit variant: no square inside the sum
        return float(np.sqrt(np.mean(np.abs(dev))))
    raise InvalidInputError(f"unknown tracking formula {formula!r}")


def tracking_indices(
    reconstructed: TripletSeries,
    gt: GroundTruth,
    formula: str = "rms",
) -> tuple[float, float, float]:
    """Tracking-error indices over a dense grid: (percent, mHz, Hz/s).

    Each index aggregates the point-wise deviation between the reconstructed
    stream and the reference profiles over the grid carried by
    ``reconstructed.t``; the default is a true rms.
    """
    ref_phasor, ref_freq, ref_rocof = eval_reference(gt, reconstructed.t)
    ref_mag = np.abs(ref_phasor)
    if np.any(ref_mag == 0.0):
        raise UndefinedMetricError("tracking index undefined where |reference phasor| = 0")
    tre_tve = _aggregate(np.abs(reconstructed.phasor - ref_phasor) / ref_mag, formula) * 100.0
    tre_fe = _aggregate((reconstructed.frequency - ref_freq) * 1e3, formula)
    tre_rfe = _aggregate(reconstructed.rocof - ref_rocof, formula)
    return tre_tve, tre_fe, tre_rfe


def throughput_stats(
    decisions: Sequence[DecisionRecord],
) -> tuple[float, list[tuple[float, float]]]:
    """Compression ratio and instantaneous reporting-rate series.

    The instantaneous rate at each kept instant (after the first) is the
    reciprocal of the gap to the previous kept instant.
    """
    if not decisions:
        raise InvalidInputError("need at least one decision record")
    kept_times = [d.t for d in decisions if d.kept]
    if not kept_times:
        raise InvalidInputError("no kept measurement in the decision sequence")
    ratio = len(decisions) / len(kept_times)
    inst = [
        (kept_times[i], 1.0 / (kept_times[i] - kept_times[i - 1]))
        for i in range(1, len(kept_times))
    ]
    return ratio, inst


def fixed_rate_baseline(
    triplets: Sequence[MeasurementTriplet],
    divisor: int,
) -> list[MeasurementTriplet]:
    """Every ``divisor``-th triplet starting from the first."""
    if divisor < 1 or int(divisor) != divisor:
        raise InvalidInputError("divisor must be a positive integer")
    return list(triplets[::divisor])


def divisor_rates(rr_in: float) -> list[float]:
    """Reporting rates that divide ``rr_in`` evenly, descending."""
    base = round(rr_in)
    rates = [rr_in / d for d in range(1, base + 1) if base % d == 0]
    return rates


def nearest_divisor_rate(rr_in: float, target_rate: float) -> float:
    """Divisor rate of ``rr_in`` closest to ``target_rate`` (ties go up)."""
    rates = divisor_rates(rr_in)
    return min(rates, key=lambda r: (abs(r - target_rate), -r))


@dataclass(frozen=True)
class TrackingReport:
    """Scores for one (algorithm, reporting mode) combination."""

    algorithm: str
    rr_mode: str
    tre_tve: float                       # percent
    tre_fe: float                        # mHz
    tre_rfe: float                       # Hz/s
    kept_count: int
    total_count: int
    instantaneous_rr: list[tuple[float, float]] = field(default_factory=list)

    def __post_init__(self):
        if self.kept_count < 1:
            raise InvalidInputError("a report needs at least one kept measurement")
        for value in (self.tre_tve, self.tre_fe, self.tre_rfe):
            if not math.isfinite(value) or value < 0:
                raise InvalidInputError("tracking indices must be finite and non-negative")

    @property
    def compression_ratio(self) -> float:
        return self.total_count / self.kept_count
