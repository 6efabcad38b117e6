"""Synchrophasor, frequency and ROCOF estimation from three-phase samples.

Two P-class algorithms share a common reporting interface:

* ``p_iec_estimate`` demodulates each phase at the rated frequency, filters
  with a two-cycle triangular FIR, and derives frequency and ROCOF from
  symmetric first and second differences of the positive-sequence angle at
  the internal sample step.
* ``ipdft_estimate`` interpolates three DFT bins of a three-cycle
  Hann-windowed spectrum per phase, iteratively removing the negative
  frequency image, and derives ROCOF from a backward difference of
  consecutive internal frequency estimates.

Both timestamp at the window center and emit the positive-sequence phasor in
rms volts.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import DegenerateSignalError, InvalidInputError
from .waveform import GroundTruth, SampleBlock, SQRT2, synth_three_phase

ALPHA = cmath.exp(2j * math.pi / 3)

REPORT_ALIGN_TOL = 1e-6  # sample periods; reporting instants sit on the fs grid


@dataclass(frozen=True)
class MeasurementTriplet:
    """One report: positive-sequence phasor (rms volts), Hz, Hz/s."""

    t: float
    phasor: complex
    frequency: float
    rocof: float

    def __post_init__(self):
        if not (math.isfinite(self.t) and math.isfinite(self.frequency)
                and math.isfinite(self.rocof) and cmath.isfinite(self.phasor)):
            raise InvalidInputError("measurement fields must be finite")


@dataclass(frozen=True)
class TripletSeries:
    """Column-oriented view of a triplet sequence (for dense grids)."""

    t: np.ndarray
    phasor: np.ndarray
    frequency: np.ndarray
    rocof: np.ndarray

    @classmethod
    def from_triplets(cls, triplets: Sequence[MeasurementTriplet]) -> "TripletSeries":
        return cls(
            t=np.array([m.t for m in triplets]),
            phasor=np.array([m.phasor for m in triplets], dtype=complex),
            frequency=np.array([m.frequency for m in triplets]),
            rocof=np.array([m.rocof for m in triplets]),
        )

    def __len__(self) -> int:
        return self.t.size

    def __getitem__(self, i: int) -> MeasurementTriplet:
        return MeasurementTriplet(
            float(self.t[i]), complex(self.phasor[i]),
            float(self.frequency[i]), float(self.rocof[i]),
        )


@dataclass(frozen=True)
class EstimatorConfig:
    """Sampling and reporting geometry shared by all estimators."""

    f0: float = 50.0
    fs: float = 10_000.0
    internal_rate: float = 100.0

    def __post_init__(self):
        m = self.fs / self.f0
        if abs(m - round(m)) > 1e-9:
            raise InvalidInputError("fs must be an integer multiple of f0")
        r = self.fs / self.internal_rate
        if abs(r - round(r)) > 1e-9:
            raise InvalidInputError("internal_rate must divide fs evenly")

    @property
    def m(self) -> int:
        """Samples per nominal cycle."""
        return round(self.fs / self.f0)

    @property
    def r(self) -> int:
        """Samples per internal reporting interval."""
        return round(self.fs / self.internal_rate)

    @property
    def ts(self) -> float:
        return 1.0 / self.fs


@dataclass(frozen=True)
class EstimatorKind:
    """Algorithm selector plus per-algorithm parameters."""

    algorithm: str
    ipdft_iterations: int = 3

    def __post_init__(self):
        if self.algorithm not in ("p_iec", "i_ipdft"):
            raise InvalidInputError(f"unknown estimator algorithm {self.algorithm!r}")
        if self.ipdft_iterations < 0:
            raise InvalidInputError("iteration count must be >= 0")

    def left_margin(self, config: EstimatorConfig) -> int:
        """Samples needed before a reporting instant."""
        if self.algorithm == "p_iec":
            return config.m
        return 3 * config.m // 2 + config.r

    def right_margin(self, config: EstimatorConfig) -> int:
        """Samples needed after a reporting instant."""
        if self.algorithm == "p_iec":
            return config.m
        return 3 * config.m // 2 - 1

    def estimate(self, block: SampleBlock, config: EstimatorConfig,
                 t_report: float) -> MeasurementTriplet:
        if self.algorithm == "p_iec":
            return p_iec_estimate(block, config, t_report)
        return ipdft_estimate(block, config, t_report, iterations=self.ipdft_iterations)


def fortescue_positive(xa: complex, xb: complex, xc: complex) -> complex:
    """Positive-sequence component ``(Xa + a*Xb + a^2*Xc) / 3``."""
    return (xa + ALPHA * xb + ALPHA * ALPHA * xc) / 3.0


def _check_frequency(freq: float, config: EstimatorConfig) -> None:
    if not 0.0 < freq < 2.0 * config.f0:
        raise DegenerateSignalError(
            f"frequency estimate {freq} Hz outside (0, {2 * config.f0}) Hz")


def _report_index(block: SampleBlock, fs: float, t_report: float) -> int:
    pos = t_report * fs
    n = round(pos)
    if abs(pos - n) > REPORT_ALIGN_TOL:
        raise InvalidInputError(f"reporting instant {t_report} is not on the sampling grid")
    return n - block.start_index


@lru_cache(maxsize=8)
def _triangle_weights(m: int) -> np.ndarray:
    w = 1.0 - np.abs(np.arange(2 * m - 1) - (m - 1)) / m
    return w / w.sum()


def _triangle_gain(df: float, m: int, ts: float) -> float:
    """Magnitude response of the unit-DC triangular filter at offset df Hz."""
    if df == 0.0:
        return 1.0
    x = math.pi * df * ts
    return (math.sin(m * x) / (m * math.sin(x))) ** 2


def p_iec_estimate(block: SampleBlock, config: EstimatorConfig,
                   t_report: float) -> MeasurementTriplet:
    """Demodulate-and-filter reference estimator for one reporting instant.

    The window holds ``2M+1`` samples centered on the report: ``2M-1`` for the
    triangular filter plus one extra sample on each side for the symmetric
    frequency/ROCOF difference stencils at step ``Ts``.
    """
    m = config.m
    ic = _report_index(block, config.fs, t_report)
    if ic - m < 0 or ic + m >= block.n:
        raise InvalidInputError("sample window too short for the triangular filter")

    idx = np.arange(ic - m, ic + m + 1)
    t = (block.start_index + idx) / config.fs
    carrier = SQRT2 * np.exp(-2j * math.pi * config.f0 * t)
    demod = block.samples[:, ic - m:ic + m + 1] * carrier

    w = _triangle_weights(m)
    pos = np.empty(3, dtype=complex)
    for o in range(3):
        per_phase = demod[:, o:o + 2 * m - 1] @ w
        pos[o] = fortescue_positive(per_phase[0], per_phase[1], per_phase[2])

    ang = np.unwrap(np.angle(pos))
    ts = config.ts
    freq = config.f0 + (ang[2] - ang[0]) / (4.0 * math.pi * ts)
    rocof = (ang[2] - 2.0 * ang[1] + ang[0]) / (2.0 * math.pi * ts * ts)
    _check_frequency(freq, config)
    phasor = pos[1] / _triangle_gain(freq - config.f0, m, ts)
    return MeasurementTriplet(t_report, complex(phasor), float(freq), float(rocof))


@lru_cache(maxsize=8)
def _hann_window(n: int) -> np.ndarray:
    return 0.5 - 0.5 * np.cos(2.0 * math.pi * np.arange(n) / n)


@lru_cache(maxsize=8)
def _bin_kernel(n: int, k0: int) -> np.ndarray:
    ks = np.arange(k0 - 1, k0 + 2)
    return np.exp(-2j * math.pi * np.outer(ks, np.arange(n)) / n)


def _dirichlet(lam: float, n: int) -> complex:
    """Sum of ``exp(-2j*pi*lam*k/n)`` for k = 0..n-1, at continuous ``lam``."""
    if lam == 0.0:
        return complex(n)
    ratio = math.sin(math.pi * lam) / math.sin(math.pi * lam / n)
    return cmath.exp(-1j * math.pi * lam * (n - 1) / n) * ratio


def _hann_transform(lam: float, n: int) -> complex:
    """Continuous-frequency transform of the periodic Hann window, in bins."""
    return 0.5 * _dirichlet(lam, n) - 0.25 * (_dirichlet(lam - 1.0, n) + _dirichlet(lam + 1.0, n))


def _hann_delta(bins: np.ndarray) -> float:
    """Fractional bin offset from three Hann-windowed bin magnitudes."""
    am, a0, ap = np.abs(bins)
    denom = am + 2.0 * a0 + ap
    if denom == 0.0:
        raise DegenerateSignalError("all DFT bins vanish")
    return 2.0 * (ap - am) / denom


def _ipdft_window(block: SampleBlock, ic: int, config: EstimatorConfig,
                  iterations: int) -> tuple[complex, np.ndarray]:
    """Phasor and per-phase frequencies from a three-cycle window at ``ic``."""
    n = 3 * config.m
    half = n // 2
    k0 = 3
    i0 = ic - half
    if i0 < 0 or i0 + n > block.n:
        raise InvalidInputError("sample window too short for the three-cycle spectrum")

    seg = block.samples[:, i0:i0 + n]
    xw = seg * _hann_window(n)
    bins_all = xw @ _bin_kernel(n, k0).T  # (3 phases, 3 bins)

    scale = math.sqrt(float(np.sum(xw * xw)) * n)
    if scale == 0.0 or np.min(np.abs(bins_all[:, 1])) < 1e-12 * scale:
        raise DegenerateSignalError("fundamental bin below the noise floor")

    t_center = (block.start_index + ic) / config.fs
    bin_ks = (float(k0 - 1), float(k0), float(k0 + 1))
    phasors = np.empty(3, dtype=complex)
    freqs = np.empty(3)
    for p in range(3):
        orig = bins_all[p]
        work = orig
        delta = _hann_delta(work)
        for _ in range(iterations):
            coeff = work[1] / _hann_transform(-delta, n)
            conj_coeff = coeff.conjugate()
            work = orig - np.array(
                [conj_coeff * _hann_transform(k + k0 + delta, n) for k in bin_ks])
            delta = _hann_delta(work)
        nu = k0 + delta
        coeff = work[1] / _hann_transform(-delta, n)
        freqs[p] = nu * config.fs / n
        # coeff holds (A/sqrt(2))*exp(j*angle at first window sample)
        total_angle = cmath.phase(coeff) + math.pi * nu
        sync_angle = total_angle - 2.0 * math.pi * config.f0 * t_center
        phasors[p] = abs(coeff) * SQRT2 * cmath.exp(1j * sync_angle)

    return fortescue_positive(phasors[0], phasors[1], phasors[2]), freqs


def ipdft_estimate(block: SampleBlock, config: EstimatorConfig, t_report: float,
                   iterations: int = 3) -> MeasurementTriplet:
    """Iterative interpolated-DFT estimate for one reporting instant.

    The block must cover the three-cycle window centered on ``t_report`` and
    the window one internal reporting interval earlier, whose frequency
    estimate feeds the backward ROCOF difference.
    """
    ic = _report_index(block, config.fs, t_report)
    phasor, freqs = _ipdft_window(block, ic, config, iterations)
    _, freqs_prev = _ipdft_window(block, ic - config.r, config, iterations)
    freq = float(np.mean(freqs))
    _check_frequency(freq, config)
    rocof = (freq - float(np.mean(freqs_prev))) * config.internal_rate
    return MeasurementTriplet(t_report, phasor, freq, rocof)


def run_estimator(
    kind: EstimatorKind,
    source: GroundTruth | SampleBlock,
    config: EstimatorConfig,
    t_start: float,
    t_end: float,
) -> list[MeasurementTriplet]:
    """Estimate triplets at the internal rate over [t_start, t_end] inclusive.

    ``source`` may be a ground-truth model (samples are synthesized with the
    margins each window needs) or a pre-synthesized block that already covers
    those margins.
    """
    fs = config.fs
    n_start = round(t_start * fs)
    n_end = round(t_end * fs)
    if abs(t_start * fs - n_start) > REPORT_ALIGN_TOL or abs(t_end * fs - n_end) > REPORT_ALIGN_TOL:
        raise InvalidInputError("t_start and t_end must lie on the sampling grid")
    if n_end < n_start:
        raise InvalidInputError("t_end must not precede t_start")

    left = kind.left_margin(config)
    right = kind.right_margin(config)
    if isinstance(source, GroundTruth):
        first = n_start - left
        count = (n_end + right) - first + 1
        try:
            block = synth_three_phase(source, first / fs, count)
        except Exception as exc:
            raise InvalidInputError(
                "time range (plus estimator window margins) exceeds the signal domain"
            ) from exc
    else:
        block = source
        if n_start - left < block.start_index or n_end + right >= block.start_index + block.n:
            raise InvalidInputError("sample block does not cover the estimator windows")

    return [
        kind.estimate(block, config, n / fs)
        for n in range(n_start, n_end + 1, config.r)
    ]
