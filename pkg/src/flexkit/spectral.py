"""Frequency-domain analysis of consumption series.

Finds the dominant repeat cycles of a load (daily, weekly, ...) by
transforming a gap-free series, ranking spectral peaks, and converting
peak frequencies into slot-based segmentation rules for baselining.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime

import numpy as np

from .errors import GappySeries, NoPeaks, PeriodBelowResolution, TooShort
from .timeseries import MeterSeries, _to_epoch, fill_gaps, slice_month

DEFAULT_MIN_RELATIVE_POWER = 0.05
MONTHLY_GAP_SKIP_FRACTION = 0.20


@dataclass(frozen=True)
class Spectrum:
    """Non-negative-frequency half spectrum of a real-valued series.

    ``amplitudes[k]`` is the complex coefficient at ``frequencies[k] =
    k * sampling_frequency_hz / n_samples`` for k = 0..floor(n/2); bin 0
    is the DC component.
    """

    sampling_frequency_hz: float
    n_samples: int
    frequencies: tuple[float, ...]
    amplitudes: tuple[complex, ...]

    def magnitudes(self) -> np.ndarray:
        return np.abs(np.asarray(self.amplitudes))

    def bin_power(self) -> np.ndarray:
        """Per-bin signal power, folding in the mirrored negative bins."""
        mags = self.magnitudes()
        power = mags ** 2
        weights = np.full(len(power), 2.0)
        weights[0] = 1.0
        if self.n_samples % 2 == 0:
            weights[-1] = 1.0  # Nyquist bin has no mirror
        return power * weights


@dataclass(frozen=True)
class SpectralPeak:
    frequency_hz: float
    period_s: float
    magnitude: float
    magnitude_rank: int
    relative_power: float


@dataclass(frozen=True)
class SegmentationRule:
    """Maps timestamps onto slots of a repeating consumption cycle.

    Slots are anchored at the Unix epoch, so for a 24 h cycle on hourly
    data slot k is simply hour-of-day k (UTC).
    """

    slots_per_cycle: int
    sampling_interval_s: int

    @property
    def cycle_s(self) -> int:
        return self.slots_per_cycle * self.sampling_interval_s

    def slot_of(self, ts: datetime) -> int:
        return (_to_epoch(ts) // self.sampling_interval_s) % self.slots_per_cycle

    def slot_of_index(self, series: MeterSeries, index: int) -> int:
        return self.slot_of(series.timestamp_at(index))


def dft(series: MeterSeries, detrend: str = "remove_mean") -> Spectrum:
    """Transform a gap-free series into its half spectrum.

    ``remove_mean`` (the default) subtracts the series mean first so the
    DC level does not swamp every magnitude comparison.
    """
    if detrend not in ("none", "remove_mean"):
        raise ValueError(f"unknown detrend mode {detrend!r}")
    if series.gaps:
        raise GappySeries("series has gaps; fill or drop them first")
    n = len(series)
    if n < 4:
        raise TooShort(f"need at least 4 samples, got {n}")

    x = np.asarray(series.values, dtype=float)
    if detrend == "remove_mean":
        x = x - x.mean()

    amplitudes = np.fft.rfft(x)
    fs = series.sampling_frequency_hz
    frequencies = np.arange(len(amplitudes)) * fs / n
    return Spectrum(
        sampling_frequency_hz=fs,
        n_samples=n,
        frequencies=tuple(float(f) for f in frequencies),
        amplitudes=tuple(complex(a) for a in amplitudes),
    )


def dominant_periods(
    spectrum: Spectrum,
    max_peaks: int = 5,
    min_relative_power: float = DEFAULT_MIN_RELATIVE_POWER,
) -> list[SpectralPeak]:
    """Rank strict local maxima of the magnitude spectrum by magnitude.

    The DC bin is never a peak.  ``relative_power`` is the peak bin's
    share of total non-DC power; bins below ``min_relative_power`` are
    discarded.  Raises NoPeaks when nothing clears the floor, which is
    the signature of an aperiodic load.
    """
    if max_peaks < 1:
        raise ValueError("max_peaks must be >= 1")
    mags = spectrum.magnitudes()
    if len(mags) < 2:
        raise NoPeaks("spectrum has no non-DC bins")

    power = spectrum.bin_power()
    total = float(power[1:].sum())
    if total <= 0.0:
        raise NoPeaks("no non-DC power")

    last = len(mags) - 1
    candidates = []
    for k in range(1, last + 1):
        left_ok = mags[k] > mags[k - 1]
        right_ok = k == last or mags[k] > mags[k + 1]
        if left_ok and right_ok:
            rel = float(power[k]) / total
            if rel >= min_relative_power:
                candidates.append((k, rel))

    if not candidates:
        raise NoPeaks("all non-DC power below threshold")

    candidates.sort(key=lambda kr: (-mags[kr[0]], kr[0]))
    peaks = []
    for rank, (k, rel) in enumerate(candidates[:max_peaks], start=1):
        f = spectrum.frequencies[k]
        peaks.append(
            SpectralPeak(
                frequency_hz=f,
                period_s=1.0 / f,
                magnitude=float(mags[k]),
                magnitude_rank=rank,
                relative_power=rel,
            )
        )
    return peaks


def period_to_segmentation(peak: SpectralPeak, sampling_interval_s: int) -> SegmentationRule:
    """Turn a detected period into a slot rule at the series resolution."""
    if peak.period_s < 2 * sampling_interval_s:
        raise PeriodBelowResolution(
            f"period {peak.period_s:.0f}s under 2x interval {sampling_interval_s}s"
        )
    slots = round(peak.period_s / sampling_interval_s)
    return SegmentationRule(slots_per_cycle=slots, sampling_interval_s=sampling_interval_s)


def monthly_spectra(
    series: MeterSeries,
    months: list[str],
    detrend: str = "remove_mean",
    whole_history: bool = False,
):
    """Compute per-month spectra (or one whole-history spectrum).

    Months with more than 20% gaps are skipped and reported rather than
    silently interpolated into shape.  Returns (spectra, skipped) where
    spectra maps month -> Spectrum and skipped lists (month, reason).
    """
    if whole_history:
        filled = fill_gaps(series, "linear_interp") if series.gaps else series
        return {"all": dft(filled, detrend)}, []

    spectra: dict[str, Spectrum] = {}
    skipped: list[tuple[str, str]] = []
    for month in months:
        try:
            chunk = slice_month(series, month)
        except Exception as exc:
            skipped.append((month, str(exc)))
            continue
        if chunk.gap_fraction() > MONTHLY_GAP_SKIP_FRACTION:
            skipped.append((month, f"gap fraction {chunk.gap_fraction():.2f} > 0.20"))
            continue
        if chunk.gaps:
            chunk = fill_gaps(chunk, "linear_interp")
        try:
            spectra[month] = dft(chunk, detrend)
        except TooShort as exc:
            skipped.append((month, str(exc)))
    return spectra, skipped
