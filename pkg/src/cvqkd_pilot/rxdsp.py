"""Receiver DSP: pilot isolation, carrier phase tracking, downconversion and
matched filtering.

The digitized photocurrent is real. Everything downstream works on its
analytic (positive-frequency) representation, built once per capture by
``AnalyticCapture`` together with the optional inverse of the known PD
response.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import FrameSyncError, ParameterError, PilotNotFoundError, SyncFailureError
from .receiver import pd_response_rfft
from .wavecore import ComplexWaveform, RrcFilter, SymbolBlock, matched_filter_decimate, moving_average

__all__ = [
    "AnalyticCapture",
    "PhaseEstimate",
    "TimingReference",
    "locate_pilot",
    "estimate_phase",
    "synchronize_and_demodulate",
    "find_timing",
    "demodulate_stationary",
]


@dataclass(frozen=True, eq=False)
class AnalyticCapture:
    """Full-length spectrum of the analytic signal of a real capture.

    ``spectrum`` is the ``n``-point FFT with negative frequencies zeroed and
    positive ones doubled, so ``ifft(spectrum)`` is the analytic signal.
    """

    spectrum: np.ndarray
    sample_rate: float

    @classmethod
    def from_real(cls, rx: ComplexWaveform, equalize_bandwidth: float | None = None):
        if not rx.is_real:
            raise ParameterError("expected a real-valued capture")
        n = len(rx)
        half = np.fft.rfft(rx.samples)
        if equalize_bandwidth is not None:
            half /= pd_response_rfft(n, rx.sample_rate, equalize_bandwidth)
        spectrum = np.zeros(n, dtype=np.complex128)
        spectrum[: half.size] = half
        spectrum[1 : (n + 1) // 2] *= 2.0
        return cls(spectrum, rx.sample_rate)

    def __len__(self) -> int:
        return self.spectrum.size

    @property
    def bin_width(self) -> float:
        return self.sample_rate / self.spectrum.size

    def freqs(self) -> np.ndarray:
        return np.fft.fftfreq(self.spectrum.size, 1.0 / self.sample_rate)

    def signal(self) -> np.ndarray:
        return np.fft.ifft(self.spectrum)

    def band_limited(self, f_lo: float, f_hi: float) -> "AnalyticCapture":
        """Copy with every bin outside ``[f_lo, f_hi]`` zeroed."""
        f = self.freqs()
        keep = (f >= f_lo) & (f <= f_hi)
        return AnalyticCapture(np.where(keep, self.spectrum, 0.0), self.sample_rate)


def _as_capture(rx) -> AnalyticCapture:
    if isinstance(rx, AnalyticCapture):
        return rx
    return AnalyticCapture.from_real(rx)


@dataclass(frozen=True, eq=False)
class PhaseEstimate:
    """Pilot phase relative to a ``reference_freq`` carrier.

    The full estimated pilot phase at sample ``k`` is
    ``2 pi reference_freq k / F_s + phase_trace[k]``; ``freq_offset_est`` adds
    the linear trend of ``phase_trace`` to ``reference_freq``.
    """

    phase_trace: np.ndarray
    freq_offset_est: float
    pilot_snr_db: float
    reference_freq: float = 0.0

    @classmethod
    def disabled(cls, n_samples: int, reference_freq: float = 0.0) -> "PhaseEstimate":
        return cls(np.zeros(n_samples), reference_freq, float("inf"), reference_freq)


def locate_pilot(rx, expected_band, segment_len: int = 4096, min_prominence_db: float = 10.0) -> float:
    """Frequency of the strongest tone inside ``expected_band = (f_lo, f_hi)``.

    Detection uses a Welch-averaged periodogram (peak against the in-band
    median); the frequency is then refined on the full-length Hann-windowed
    spectrum by parabolic interpolation of the log-magnitude peak.
    """
    f_lo, f_hi = expected_band
    if not f_hi > f_lo:
        raise ParameterError("expected_band must be (low, high) with high > low")
    cap = _as_capture(rx)
    x = cap.signal()
    n = x.size
    fs = cap.sample_rate
    seg = min(segment_len, 1 << int(np.log2(n)))
    n_seg = n // seg
    frames = x[: n_seg * seg].reshape(n_seg, seg) * np.hanning(seg)
    welch = np.mean(np.abs(np.fft.fft(frames, axis=1)) ** 2, axis=0)
    wf = np.fft.fftfreq(seg, 1.0 / fs)
    sel = (wf >= f_lo) & (wf <= f_hi)
    if np.count_nonzero(sel) < 3:
        raise PilotNotFoundError("expected band is narrower than the detection resolution")
    band = welch[sel]
    if band.max() < np.median(band) * 10 ** (min_prominence_db / 10):
        raise PilotNotFoundError(
            f"no tone {min_prominence_db:g} dB above the in-band median in "
            f"[{f_lo / 1e6:g}, {f_hi / 1e6:g}] MHz"
        )

    full = np.abs(np.fft.fft(x * np.hanning(n))) ** 2
    ff = np.fft.fftfreq(n, 1.0 / fs)
    idx = np.flatnonzero((ff >= f_lo) & (ff <= f_hi))
    k = idx[np.argmax(full[idx])]
    a, b, c = (np.log(full[(k + d) % n] + 1e-300) for d in (-1, 0, 1))
    denom = a - 2 * b + c
    delta = 0.5 * (a - c) / denom if denom != 0 else 0.0
    return float(ff[k] + delta * fs / n)


def estimate_phase(rx, pilot_freq: float, pilot_bw: float, M: int, min_snr_db: float = 0.0) -> PhaseEstimate:
    """Pilot phase trace from a brick-wall isolated, MAF-smoothed pilot.

    The pilot band ``pilot_freq +/- pilot_bw/2`` is cut out of the analytic
    spectrum and shifted down by ``pilot_freq`` rounded to the nearest FFT bin
    (the ``reference_freq``). Each quadrature of the resulting complex envelope
    is smoothed with an ``M``-sample centred moving average, and the unwrapped
    angle is returned.
    """
    if not pilot_bw > 0:
        raise ParameterError("pilot_bw must be positive")
    cap = _as_capture(rx)
    n = len(cap)
    df = cap.bin_width
    ref_bin = int(round(pilot_freq / df))
    half_bins = max(int(np.floor(pilot_bw / 2.0 / df)), 1)
    lo = ref_bin - half_bins
    band = cap.spectrum[np.arange(lo, ref_bin + half_bins + 1) % n]

    power = np.abs(band) ** 2
    noise_per_bin = float(np.median(power))
    total = float(np.sum(power))
    noise_total = noise_per_bin * band.size
    snr = (total - noise_total) / noise_total if noise_total > 0 else np.inf
    snr_db = float(10 * np.log10(snr)) if snr > 0 else -np.inf
    if snr_db < min_snr_db:
        raise SyncFailureError(f"pilot SNR {snr_db:.1f} dB below {min_snr_db:g} dB")

    shifted = np.zeros(n, dtype=np.complex128)
    shifted[np.arange(-half_bins, half_bins + 1) % n] = band
    envelope = ComplexWaveform(np.fft.ifft(shifted), cap.sample_rate)
    if M > 1:
        envelope = moving_average(envelope, M)
    trace = np.unwrap(np.angle(envelope.samples))
    t = np.arange(n) / cap.sample_rate
    tc = t - t.mean()
    slope = float(np.dot(tc, trace) / np.dot(tc, tc))
    ref = ref_bin * df
    return PhaseEstimate(trace, float(ref + slope / (2 * np.pi)), snr_db, float(ref))


@dataclass(frozen=True)
class TimingReference:
    """Fixed symbol timing and constant derotation from a reference run."""

    offset: int
    rotation: complex = 1.0 + 0.0j


def _baseband(cap: AnalyticCapture, est: PhaseEstimate, f_quantum: float) -> np.ndarray:
    z = cap.signal()
    k = np.arange(z.size)
    arg = 2.0 * np.pi * f_quantum / cap.sample_rate * k + est.phase_trace
    return z * np.exp(-1j * arg)


def find_timing(
    baseband: np.ndarray,
    rrc: RrcFilter,
    preamble: np.ndarray,
    max_lag_samples: int,
    threshold: float,
) -> tuple[int, float, complex]:
    """Sample offset maximising the normalised preamble correlation.

    Returns ``(offset, peak, complex_correlation)``; raises ``FrameSyncError``
    if the peak normalised magnitude is below ``threshold``.
    """
    sps = rrc.samples_per_symbol
    n_pre = preamble.size
    best = (0, -1.0, 0j)
    pre_energy = float(np.sum(np.abs(preamble) ** 2))
    head = baseband[: (n_pre + rrc.span_symbols) * sps + max_lag_samples + 1]
    for off in range(-max_lag_samples, max_lag_samples + 1):
        y = matched_filter_decimate(head, rrc.taps, sps, off, n_pre)
        c = complex(np.vdot(preamble, y))
        norm = np.sqrt(pre_energy * float(np.sum(np.abs(y) ** 2)))
        rho = abs(c) / norm if norm > 0 else 0.0
        if rho > best[1]:
            best = (off, rho, c)
    if best[1] < threshold:
        raise FrameSyncError(f"preamble correlation {best[1]:.3f} below threshold {threshold:.3f}")
    return best


@lru_cache(maxsize=8)
def _rrc_response(taps_key: bytes, n: int) -> np.ndarray:
    taps = np.frombuffer(taps_key)
    c = taps.size // 2
    padded = np.zeros(n)
    padded[: taps.size] = taps
    h = np.fft.fft(np.roll(padded, -c))
    h.flags.writeable = False
    return h


def demodulate_stationary(
    cap: AnalyticCapture, f_quantum: float, rrc: RrcFilter, offset: int, n_symbols: int
) -> np.ndarray | None:
    """Frequency-domain downconversion, matched filter and decimation.

    Uses circular convolution, so it matches the time-domain path except
    within a filter span of the block edges. Requires ``f_quantum`` on the
    FFT grid and the capture length divisible by ``sps``; returns ``None``
    otherwise so callers can fall back to the time-domain path.
    """
    n = len(cap)
    sps = rrc.samples_per_symbol
    shift = f_quantum / cap.bin_width
    m = int(round(shift))
    if abs(shift - m) > 1e-6 or n % sps:
        return None
    bb = np.roll(cap.spectrum, -m)
    y = bb * _rrc_response(rrc.taps.tobytes(), n)
    if offset:
        y = y * np.exp(2j * np.pi * np.fft.fftfreq(n) * offset)
    folded = y.reshape(sps, n // sps).sum(axis=0)
    out = np.fft.ifft(folded) / sps
    return out[:n_symbols]


def synchronize_and_demodulate(
    rx,
    est: PhaseEstimate,
    f_quantum: float,
    rrc: RrcFilter,
    sps: int,
    n_symbols: int,
    *,
    preamble: np.ndarray | None = None,
    timing: TimingReference | None = None,
    max_lag_samples: int | None = None,
    threshold: float = 0.3,
) -> SymbolBlock:
    """Derotate, matched-filter and decimate to symbols.

    The analytic signal is rotated by ``-(2 pi f_quantum k / F_s + phase_trace[k])``.
    Timing comes from ``timing`` if given, otherwise from correlation with the
    known ``preamble`` at the head of the block. ``timing.rotation`` is applied
    to the output symbols.
    """
    if sps != rrc.samples_per_symbol:
        raise ParameterError("sps must match the RRC oversampling")
    cap = _as_capture(rx)
    if est.phase_trace.size != len(cap):
        raise ParameterError("phase trace length must match the capture")
    bb = _baseband(cap, est, f_quantum)
    rotation = 1.0 + 0.0j
    if timing is not None:
        offset = timing.offset
        rotation = timing.rotation
    elif preamble is not None:
        lag = sps if max_lag_samples is None else max_lag_samples
        offset, _, _ = find_timing(bb, rrc, np.asarray(preamble), lag, threshold)
    else:
        offset = 0
    y = matched_filter_decimate(bb, rrc.taps, sps, offset, n_symbols) * rotation
    return SymbolBlock.from_complex(y, cap.sample_rate / sps)
