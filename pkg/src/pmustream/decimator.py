"""Accuracy-driven keep/discard decimation of a measurement stream.

Each incoming triplet is compared against a prediction extrapolated from the
last retained triplet: amplitude is held, the phasor angle advances with the
last frequency offset and half the last ROCOF, frequency extrapolates
linearly, ROCOF is held.  The triplet is retained only when at least one
normalized deviation exceeds its threshold (infinity norm strictly above 1);
the first triplet of a stream is always retained.  The same prediction rules
rebuild a dense receiver-side view from the retained set.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DomainError,
    InvalidInputError,
    SequencingError,
)
from .estimators import MeasurementTriplet, TripletSeries

QUANTITY_NAMES = ("phasor", "frequency", "rocof")


@dataclass(frozen=True)
class Thresholds:
    """Normalization factors for phasor, frequency and ROCOF deviations."""

    delta_tve: float = 1e-3   # relative phasor deviation
    delta_fe: float = 1e-3    # Hz
    delta_rfe: float = 0.07   # Hz/s

    def __post_init__(self):
        for name, value in (("delta_tve", self.delta_tve),
                            ("delta_fe", self.delta_fe),
                            ("delta_rfe", self.delta_rfe)):
            if not (math.isfinite(value) and value > 0):
                raise InvalidInputError(f"{name} must be finite and strictly positive")


@dataclass(frozen=True)
class DecimatorState:
    """Last retained triplet; drives every subsequent keep/discard decision."""

    last_kept: MeasurementTriplet

    @property
    def last_kept_time(self) -> float:
        return self.last_kept.t


@dataclass(frozen=True)
class DecisionRecord:
    """Outcome of one keep/discard decision.

    ``epsilon`` is None for the unconditional first keep.  ``binding_quantity``
    names the deviation that forced a keep ("first" for the initial frame,
    "none" when the frame was discarded).
    """

    t: float
    kept: bool
    epsilon: np.ndarray | None
    binding_quantity: str


def predict(last: MeasurementTriplet, dt: float, f0: float) -> tuple[complex, float, float]:
    """Extrapolate (phasor, frequency, rocof) ``dt`` seconds past ``last``."""
    if dt < 0:
        raise InvalidInputError("prediction horizon must be non-negative")
    angle = 2.0 * math.pi * (last.frequency - f0) * dt + math.pi * last.rocof * dt * dt
    phasor = last.phasor * cmath.exp(1j * angle)
    return phasor, last.frequency + last.rocof * dt, last.rocof


def epsilon(state: DecimatorState, incoming: MeasurementTriplet,
            thresholds: Thresholds, f0: float) -> np.ndarray:
    """Normalized deviation vector between prediction and incoming triplet."""
    dt = incoming.t - state.last_kept_time
    if dt <= 0:
        raise SequencingError("incoming triplet does not advance the stream clock")
    phasor_p, freq_p, rocof_p = predict(state.last_kept, dt, f0)
    ref_mag = abs(state.last_kept.phasor)
    if ref_mag == 0.0:
        e1 = math.inf  # collapsed reference: force a keep as soon as signal returns
    else:
        e1 = abs(phasor_p - incoming.phasor) / (thresholds.delta_tve * ref_mag)
    e2 = abs(freq_p - incoming.frequency) / thresholds.delta_fe
    e3 = abs(rocof_p - incoming.rocof) / thresholds.delta_rfe
    return np.array([e1, e2, e3])


def decide(state: DecimatorState | None, incoming: MeasurementTriplet,
           thresholds: Thresholds, f0: float) -> tuple[DecisionRecord, DecimatorState]:
    """One keep/discard step; returns the record and the resulting state."""
    if state is None:
        return (
            DecisionRecord(incoming.t, True, None, "first"),
            DecimatorState(incoming),
        )
    eps = epsilon(state, incoming, thresholds, f0)
    kept = bool(np.max(eps) > 1.0)  # strictly above threshold
    if kept:
        binding = QUANTITY_NAMES[int(np.argmax(eps))]
        return DecisionRecord(incoming.t, True, eps, binding), DecimatorState(incoming)
    return DecisionRecord(incoming.t, False, eps, "none"), state


class Decimator:
    """Streaming wrapper around :func:`decide` for one measurement stream."""

    def __init__(self, thresholds: Thresholds, f0: float):
        self.thresholds = thresholds
        self.f0 = f0
        self._state: DecimatorState | None = None
        self.kept: list[MeasurementTriplet] = []
        self.records: list[DecisionRecord] = []

    def process(self, incoming: MeasurementTriplet) -> DecisionRecord:
        record, self._state = decide(self._state, incoming, self.thresholds, self.f0)
        if record.kept:
            self.kept.append(incoming)
        self.records.append(record)
        return record


def decimate_stream(
    triplets: Iterable[MeasurementTriplet],
    thresholds: Thresholds,
    f0: float,
) -> tuple[list[MeasurementTriplet], list[DecisionRecord]]:
    """Run the keep/discard rule over a whole stream in arrival order."""
    dec = Decimator(thresholds, f0)
    for m in triplets:
        dec.process(m)
    return dec.kept, dec.records


def reconstruct(
    kept: Sequence[MeasurementTriplet],
    query_times,
    f0: float,
    ts: float,
) -> TripletSeries:
    """Receiver-side view: kept triplets verbatim, predictions in between.

    A query within ``ts/2`` of a kept timestamp returns that triplet; any
    other query is served by predicting from the most recent kept triplet at
    or before it.
    """
    if not kept:
        raise InvalidInputError("need at least one kept triplet")
    kt = np.array([m.t for m in kept])
    if np.any(np.diff(kt) <= 0):
        raise SequencingError("kept triplets must be strictly time-ordered")
    q = np.atleast_1d(np.asarray(query_times, dtype=float))
    tol = ts / 2.0
    if np.any(q < kt[0] - tol):
        raise DomainError("query precedes the first kept triplet")

    idx = np.searchsorted(kt, q + tol, side="right") - 1
    dt = q - kt[idx]
    kp = np.array([m.phasor for m in kept], dtype=complex)
    kf = np.array([m.frequency for m in kept])
    kr = np.array([m.rocof for m in kept])

    angle = 2.0 * math.pi * (kf[idx] - f0) * dt + math.pi * kr[idx] * dt * dt
    phasor = kp[idx] * np.exp(1j * angle)
    freq = kf[idx] + kr[idx] * dt
    rocof = kr[idx].copy()

    exact = np.abs(dt) <= tol
    phasor[exact] = kp[idx[exact]]
    freq[exact] = kf[idx[exact]]
    return TripletSeries(t=q, phasor=phasor, frequency=freq, rocof=rocof)
