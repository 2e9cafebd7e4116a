"""Sampled-waveform container and the DSP primitives shared by TX, channel and RX.

Every function here is a pure function of its arguments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

from .errors import ParameterError

__all__ = [
    "ComplexWaveform",
    "SymbolBlock",
    "RrcFilter",
    "design_rrc",
    "upsample_zeros",
    "pulse_shape",
    "matched_filter_decimate",
    "frequency_shift",
    "moving_average",
    "quantize_uniform",
    "estimate_psd",
    "band_power",
]


@dataclass(frozen=True, eq=False)
class ComplexWaveform:
    """Uniformly sampled signal.

    ``samples`` is complex for optical fields and baseband signals. Electrical
    waveforms (drive voltages, photocurrents) are stored with a real dtype in
    the same container so that FFT-based stages can use real transforms.
    """

    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        samples = np.asarray(self.samples)
        if samples.ndim != 1 or samples.size == 0:
            raise ParameterError("waveform must be a non-empty 1-D sequence")
        if not np.iscomplexobj(samples):
            samples = samples.astype(np.float64, copy=False)
        else:
            samples = samples.astype(np.complex128, copy=False)
        if not self.sample_rate > 0:
            raise ParameterError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.samples)

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    def time(self) -> np.ndarray:
        return np.arange(self.samples.size) / self.sample_rate

    def power(self) -> float:
        """Mean of |x|^2."""
        return float(np.mean(np.abs(self.samples) ** 2))

    def energy(self) -> float:
        """Sum of |x|^2 (sample-domain energy, not scaled by 1/fs)."""
        return float(np.sum(np.abs(self.samples) ** 2))

    def with_samples(self, samples: np.ndarray) -> "ComplexWaveform":
        return ComplexWaveform(samples, self.sample_rate)

    def _check_compatible(self, other: "ComplexWaveform"):
        if other.sample_rate != self.sample_rate:
            raise ParameterError(
                f"sample rate mismatch: {self.sample_rate} vs {other.sample_rate}"
            )
        if len(other) != len(self):
            raise ParameterError(f"length mismatch: {len(self)} vs {len(other)}")

    def _binary(self, other, op):
        if isinstance(other, ComplexWaveform):
            self._check_compatible(other)
            return self.with_samples(op(self.samples, other.samples))
        if np.isscalar(other):
            return self.with_samples(op(self.samples, other))
        return NotImplemented

    def __add__(self, other):
        return self._binary(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __mul__(self, other):
        return self._binary(other, np.multiply)

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_samples(-self.samples)

    @property
    def real(self) -> "ComplexWaveform":
        return self.with_samples(self.samples.real.copy())

    @property
    def imag(self) -> "ComplexWaveform":
        return self.with_samples(self.samples.imag.copy())


@dataclass(frozen=True, eq=False)
class SymbolBlock:
    """Paired quadrature symbol sequences at the symbol rate."""

    X: np.ndarray
    P: np.ndarray
    symbol_rate: float

    def __post_init__(self):
        x = np.asarray(self.X, dtype=np.float64)
        p = np.asarray(self.P, dtype=np.float64)
        if x.shape != p.shape or x.ndim != 1:
            raise ParameterError("X and P must be 1-D arrays of equal length")
        object.__setattr__(self, "X", x)
        object.__setattr__(self, "P", p)

    def __len__(self) -> int:
        return self.X.size

    @property
    def complex(self) -> np.ndarray:
        return self.X + 1j * self.P

    @classmethod
    def from_complex(cls, values, symbol_rate: float) -> "SymbolBlock":
        values = np.asarray(values)
        return cls(values.real.copy(), values.imag.copy(), symbol_rate)

    def __getitem__(self, item) -> "SymbolBlock":
        return SymbolBlock(self.X[item], self.P[item], self.symbol_rate)

    def scaled(self, gain: float) -> "SymbolBlock":
        return SymbolBlock(self.X * gain, self.P * gain, self.symbol_rate)


@dataclass(frozen=True, eq=False)
class RrcFilter:
    roll_off: float
    span_symbols: int
    samples_per_symbol: int
    taps: np.ndarray

    def __len__(self) -> int:
        return self.taps.size

    @property
    def center(self) -> int:
        return self.taps.size // 2


def _rrc_impulse(t: np.ndarray, beta: float) -> np.ndarray:
    # t in symbol periods
    h = np.empty_like(t)
    zero = np.isclose(t, 0.0, atol=1e-12)
    singular = np.isclose(np.abs(4 * beta * t), 1.0, atol=1e-9)
    regular = ~(zero | singular)

    h[zero] = 1.0 - beta + 4.0 * beta / np.pi
    a = np.pi / (4.0 * beta)
    h[singular] = (beta / np.sqrt(2.0)) * (
        (1 + 2 / np.pi) * np.sin(a) + (1 - 2 / np.pi) * np.cos(a)
    )
    tr = t[regular]
    num = np.sin(np.pi * tr * (1 - beta)) + 4 * beta * tr * np.cos(np.pi * tr * (1 + beta))
    den = np.pi * tr * (1 - (4 * beta * tr) ** 2)
    h[regular] = num / den
    return h


def design_rrc(roll_off: float, span_symbols: int, samples_per_symbol: int) -> RrcFilter:
    """Unit-energy root-raised-cosine FIR with ``span*sps + 1`` taps."""
    if not 0 < roll_off <= 1:
        raise ParameterError(f"roll_off must be in (0, 1], got {roll_off}")
    if int(span_symbols) != span_symbols or span_symbols < 2:
        raise ParameterError(f"span_symbols must be an integer >= 2, got {span_symbols}")
    if int(samples_per_symbol) != samples_per_symbol or samples_per_symbol < 2:
        raise ParameterError(
            f"samples_per_symbol must be an integer >= 2, got {samples_per_symbol}"
        )
    span_symbols = int(span_symbols)
    sps = int(samples_per_symbol)
    n = span_symbols * sps + 1
    t = (np.arange(n) - n // 2) / sps
    taps = _rrc_impulse(t, roll_off)
    # enforce exact symmetry before normalising
    taps = 0.5 * (taps + taps[::-1])
    taps /= np.sqrt(np.sum(taps**2))
    return RrcFilter(roll_off, span_symbols, sps, taps)


def upsample_zeros(symbols: SymbolBlock, factor) -> ComplexWaveform:
    if int(factor) != factor or factor < 1:
        raise ParameterError(f"upsampling factor must be a positive integer, got {factor}")
    factor = int(factor)
    out = np.zeros(len(symbols) * factor, dtype=np.complex128)
    out[::factor] = symbols.complex
    return ComplexWaveform(out, symbols.symbol_rate * factor)


def pulse_shape(symbols: SymbolBlock, rrc: RrcFilter) -> ComplexWaveform:
    """Zero-stuff and RRC-filter in one polyphase pass.

    Equivalent to ``upsample_zeros`` followed by a centred ("same") FIR
    convolution with ``rrc.taps``; symbol ``k`` peaks at sample ``k*sps``.
    """
    sps = rrc.samples_per_symbol
    full = signal.upfirdn(rrc.taps, symbols.complex, up=sps)
    c = rrc.center
    return ComplexWaveform(full[c : c + len(symbols) * sps], symbols.symbol_rate * sps)


def matched_filter_decimate(
    samples: np.ndarray, taps: np.ndarray, sps: int, offset: int, n_symbols: int
) -> np.ndarray:
    """Centred FIR filtering evaluated only at ``offset + k*sps``.

    Returns ``y[k] = sum_m taps[m] * x[offset + k*sps + c - m]`` with ``c`` the
    centre tap, i.e. the "same"-mode convolution output decimated by ``sps``.
    Samples outside the input are treated as zero.
    """
    c = taps.size // 2
    s0 = offset + c
    pad = (-s0) % sps
    x = np.concatenate([np.zeros(pad, dtype=samples.dtype), samples])
    full = signal.upfirdn(taps, x, down=sps)
    start = (s0 + pad) // sps
    y = full[start : start + n_symbols]
    if y.size < n_symbols:
        y = np.concatenate([y, np.zeros(n_symbols - y.size, dtype=y.dtype)])
    return y


def frequency_shift(w: ComplexWaveform, f: float) -> ComplexWaveform:
    """Multiply by exp(j 2 pi f k / fs)."""
    if abs(f) >= w.sample_rate / 2:
        raise ParameterError(f"shift {f} Hz is not below Nyquist ({w.sample_rate / 2} Hz)")
    if f == 0:
        return w.with_samples(w.samples.astype(np.complex128, copy=True))
    k = np.arange(len(w))
    return w.with_samples(w.samples * np.exp(2j * np.pi * f * k / w.sample_rate))


def moving_average(w: ComplexWaveform, M: int) -> ComplexWaveform:
    """Centred M-sample running mean applied to each quadrature.

    Windows are truncated at the block edges and the mean is taken over the
    samples actually inside the window. ``M`` of 0 or 1 returns the input.
    """
    n = len(w)
    if int(M) != M or M < 0:
        raise ParameterError(f"M must be a non-negative integer, got {M}")
    if M > n:
        raise ParameterError(f"M={M} exceeds waveform length {n}")
    M = int(M)
    if M <= 1:
        return w.with_samples(w.samples.copy())
    x = w.samples
    csum = np.concatenate([np.zeros(1, dtype=x.dtype), np.cumsum(x)])
    k = np.arange(n)
    lo = np.maximum(k - (M - 1) // 2, 0)
    hi = np.minimum(k + M // 2 + 1, n)
    return w.with_samples((csum[hi] - csum[lo]) / (hi - lo))


def _quantize_real(x: np.ndarray, n_bits: int, full_scale: float) -> np.ndarray:
    step = 2.0 * full_scale / 2**n_bits
    top = full_scale - step / 2
    q = (np.floor(x / step) + 0.5) * step
    return np.clip(q, -top, top)


def quantize_uniform(w, n_bits: int, full_scale: float):
    """Mid-rise uniform quantizer with saturation, per quadrature.

    ``2**n_bits`` levels spaced ``2*full_scale/2**n_bits`` apart, symmetric
    about zero (no zero level). Accepts a ``ComplexWaveform`` or an ndarray and
    returns the same kind.
    """
    if int(n_bits) != n_bits or n_bits < 1:
        raise ParameterError(f"n_bits must be an integer >= 1, got {n_bits}")
    if not full_scale > 0:
        raise ParameterError(f"full_scale must be positive, got {full_scale}")
    is_wave = isinstance(w, ComplexWaveform)
    x = w.samples if is_wave else np.asarray(w)
    if np.iscomplexobj(x):
        q = _quantize_real(x.real, n_bits, full_scale) + 1j * _quantize_real(
            x.imag, n_bits, full_scale
        )
    else:
        q = _quantize_real(x.astype(np.float64), n_bits, full_scale)
    return w.with_samples(q) if is_wave else q


def estimate_psd(w: ComplexWaveform, segment_len: int):
    """Welch PSD (Hann, 50 % overlap), two-sided, in power per Hz.

    Returns ``(freqs, psd)`` sorted by frequency; ``sum(psd) * df`` equals the
    mean power of the waveform.
    """
    n = len(w)
    if int(segment_len) != segment_len or segment_len < 2:
        raise ParameterError("segment_len must be an integer >= 2")
    segment_len = int(segment_len)
    if segment_len & (segment_len - 1):
        raise ParameterError(f"segment_len must be a power of two, got {segment_len}")
    if segment_len > n:
        raise ParameterError(f"segment_len {segment_len} exceeds waveform length {n}")
    f, p = signal.welch(
        w.samples,
        fs=w.sample_rate,
        window="hann",
        nperseg=segment_len,
        noverlap=segment_len // 2,
        detrend=False,
        return_onesided=False,
        scaling="density",
    )
    order = np.argsort(f)
    return f[order], p[order]


def band_power(w: ComplexWaveform, f_lo: float, f_hi: float) -> float:
    """Power in ``[f_lo, f_hi]`` from the full-length periodogram (Parseval).

    Frequencies are two-sided; for real waveforms only the positive band is
    counted, so pass a positive band and double it if the mirror is wanted.
    """
    x = w.samples
    n = x.size
    spec = np.abs(np.fft.fft(x)) ** 2 / n**2
    f = np.fft.fftfreq(n, d=1.0 / w.sample_rate)
    sel = (f >= f_lo) & (f <= f_hi)
    return float(np.sum(spec[sel]))
