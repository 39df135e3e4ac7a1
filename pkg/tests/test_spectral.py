"""DFT, peak ranking, and cycle segmentation."""

import math
from datetime import datetime, timedelta, timezone

import numpy as np
import pytest

from flexkit.errors import GappySeries, NoPeaks, PeriodBelowResolution, TooShort
from flexkit.spectral import (
    SegmentationRule,
    dft,
    dominant_periods,
    monthly_spectra,
    period_to_segmentation,
)
from flexkit.timeseries import MeterSeries

from oracles import naive_dft, parseval_gap

T0 = datetime(2021, 1, 1, tzinfo=timezone.utc)


def series_of(values, interval=3600, gaps=()):
    return MeterSeries(T0, interval, tuple(float(v) for v in values), "Wh", tuple(gaps))


def tone(n, period_h, amplitude=500.0, level=1000.0, phase=0.0):
    return [
        level + amplitude * math.cos(2 * math.pi * h / period_h + phase) for h in range(n)
    ]


# -- dft ---------------------------------------------------------------------

def test_pure_cosine_has_single_dominant_bin():
    spectrum = dft(series_of(tone(720, 24.0)))
    mags = spectrum.magnitudes()
    k = int(np.argmax(mags[1:])) + 1
    assert spectrum.frequencies[k] == pytest.approx(1.0 / 86400.0, rel=1e-12)
    others = np.delete(mags[1:], k - 1)
    assert others.max() < 1e-6 * mags[k]


def test_constant_series_with_remove_mean_is_silent():
    spectrum = dft(series_of([42.0] * 48), detrend="remove_mean")
    assert spectrum.magnitudes()[1:].max() < 1e-9


def test_matches_naive_summation_oracle():
    rng = np.random.default_rng(13)
    values = list(rng.random(64) * 100)
    spectrum = dft(series_of(values), detrend="none")
    expected = naive_dft(values)
    assert len(spectrum.amplitudes) == len(expected)
    for got, want in zip(spectrum.amplitudes, expected):
        assert abs(got - want) <= 1e-9 * max(1.0, abs(want))


def test_parseval_identity():
    rng = np.random.default_rng(17)
    values = list(rng.random(100) * 50)
    spectrum = dft(series_of(values), detrend="none")
    assert parseval_gap(values, spectrum.amplitudes) < 1e-6


def test_preconditions():
    with pytest.raises(GappySeries):
        dft(series_of([1, 2, 3, 4, 5], gaps=[(1, 1)]))
    with pytest.raises(TooShort):
        dft(series_of([1, 2, 3]))


def test_linearity():
    rng = np.random.default_rng(19)
    x = rng.random(32)
    y = rng.random(32)
    a, b = 2.5, -1.25
    sx = np.array(dft(series_of(x), "none").amplitudes)
    sy = np.array(dft(series_of(y), "none").amplitudes)
    sxy = np.array(dft(series_of(a * x + b * y), "none").amplitudes)
    ref = a * sx + b * sy
    assert np.abs(sxy - ref).max() < 1e-9 * max(1.0, np.abs(ref).max())


def test_circular_shift_preserves_magnitudes():
    rng = np.random.default_rng(23)
    x = list(rng.random(48) * 10)
    base = dft(series_of(x), "none").magnitudes()
    for shift in (1, 7, 24):
        rolled = dft(series_of(np.roll(x, shift)), "none").magnitudes()
        assert np.abs(rolled - base).max() < 1e-9 * max(1.0, base.max())


# -- dominant_periods -----------------------------------------------------------

def test_single_tone_period():
    peaks = dominant_periods(dft(series_of(tone(720, 24.0))))
    assert len(peaks) == 1
    assert peaks[0].period_s == pytest.approx(86400.0, rel=1e-12)
    assert peaks[0].period_s * peaks[0].frequency_hz == pytest.approx(1.0, rel=1e-12)
    assert peaks[0].relative_power == pytest.approx(1.0, abs=1e-9)


def test_two_tones_ranked_by_synthesis_amplitude():
    n = 336  # lcm of 24 h and 168 h cycles at hourly sampling
    values = [
        2000.0
        + 600.0 * math.cos(2 * math.pi * h / 24.0)
        + 150.0 * math.cos(2 * math.pi * h / 168.0)
        for h in range(n)
    ]
    peaks = dominant_periods(dft(series_of(values)), max_peaks=5, min_relative_power=0.01)
    assert [round(p.period_s) for p in peaks[:2]] == [86400, 604800]
    assert peaks[0].magnitude_rank == 1 and peaks[1].magnitude_rank == 2
    # magnitudes scale with the synthesis amplitudes (n/2 factor each)
    assert peaks[0].magnitude == pytest.approx(600.0 * n / 2, rel=1e-9)
    assert peaks[1].magnitude == pytest.approx(150.0 * n / 2, rel=1e-9)


def test_square_wave_day_profile_top_peak_is_daily():
    values = [1800.0 if 8 <= (h % 24) < 18 else 300.0 for h in range(720)]
    peaks = dominant_periods(dft(series_of(values)))
    assert peaks[0].period_s == pytest.approx(86400.0, rel=1e-9)


def test_no_peaks_for_flat_signal():
    with pytest.raises(NoPeaks):
        dominant_periods(dft(series_of([5.0] * 64)))


def test_rank_order_is_scale_invariant():
    rng = np.random.default_rng(29)
    base = [
        1000.0
        + 300.0 * math.cos(2 * math.pi * h / 24.0)
        + 80.0 * math.cos(2 * math.pi * h / 12.0)
        + 10.0 * rng.standard_normal()
        for h in range(480)
    ]
    reference = [
        p.period_s
        for p in dominant_periods(dft(series_of(base)), min_relative_power=0.01)
    ]
    for c in (0.001, 3.7, 1e4):
        scaled = dominant_periods(
            dft(series_of([c * v for v in base])), min_relative_power=0.01
        )
        assert [p.period_s for p in scaled] == reference


# -- segmentation ------------------------------------------------------------------

def test_daily_cycle_hourly_slots():
    peaks = dominant_periods(dft(series_of(tone(720, 24.0))))
    rule = period_to_segmentation(peaks[0], 3600)
    assert rule.slots_per_cycle == 24
    assert rule.slot_of(datetime(2021, 3, 5, 13, 0, tzinfo=timezone.utc)) == 13


def test_daily_cycle_quarter_hour_slots():
    peaks = dominant_periods(dft(series_of(tone(720, 24.0))))
    rule = period_to_segmentation(peaks[0], 900)
    assert rule.slots_per_cycle == 96
    assert rule.slot_of(datetime(2021, 3, 5, 1, 30, tzinfo=timezone.utc)) == 6


def test_weekly_cycle_slot_matches_calendar_arithmetic():
    rule = SegmentationRule(slots_per_cycle=168, sampling_interval_s=3600)
    # 1970-01-01 was a Thursday, so Wednesday is day index 6 of the cycle.
    wednesday = datetime(2021, 1, 6, 2, 0, tzinfo=timezone.utc)
    assert wednesday.strftime("%A") == "Wednesday"
    assert rule.slot_of(wednesday) == (6 * 24 + 2) % 168
    from oracles import weekly_slot_oracle

    for ts in (
        wednesday,
        datetime(2021, 7, 19, 23, 0, tzinfo=timezone.utc),
        datetime(2022, 12, 31, 5, 0, tzinfo=timezone.utc),
    ):
        assert rule.slot_of(ts) == weekly_slot_oracle(ts, 168, 3600)


def test_period_below_resolution():
    peaks = dominant_periods(dft(series_of(tone(720, 24.0))))
    with pytest.raises(PeriodBelowResolution):
        period_to_segmentation(peaks[0], 50000)


# -- monthly segmentation ------------------------------------------------------------

def test_monthly_spectra_skips_gappy_months():
    n = 24 * 60
    values = [1000.0 + 500.0 * math.cos(2 * math.pi * h / 24.0) for h in range(n)]
    gaps = tuple((i, i) for i in range(24 * 40, 24 * 40 + 200))  # Feb hole > 20%
    series = MeterSeries(T0, 3600, tuple(values), "Wh", gaps)
    spectra, skipped = monthly_spectra(series, ["2021-01", "2021-02"])
    assert "2021-01" in spectra
    assert [month for month, _ in skipped] == ["2021-02"]


def test_whole_history_flag():
    values = tone(24 * 45, 24.0)
    series = series_of(values)
    spectra, skipped = monthly_spectra(series, [], whole_history=True)
    assert list(spectra) == ["all"] and not skipped
