import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats

from cvqkd_pilot.errors import ParameterError
from cvqkd_pilot.wavecore import (
    ComplexWaveform,
    SymbolBlock,
    band_power,
    design_rrc,
    estimate_psd,
    frequency_shift,
    matched_filter_decimate,
    moving_average,
    pulse_shape,
    quantize_uniform,
    upsample_zeros,
)
from oracles import gaussian_quantizer_snr_db, raised_cosine_zero_isi

FS = 2e9
finite = st.floats(-1e3, 1e3, allow_nan=False)
complex_arrays = arrays(np.complex128, st.integers(1, 64), elements=st.complex_numbers(max_magnitude=1e3))


# ---------------------------------------------------------------- containers


def test_waveform_rejects_empty_and_bad_rate():
    with pytest.raises(ParameterError):
        ComplexWaveform(np.array([]), FS)
    with pytest.raises(ParameterError):
        ComplexWaveform(np.ones(4), 0.0)


def test_waveform_arithmetic_requires_matching_grid():
    a = ComplexWaveform(np.ones(4), FS)
    with pytest.raises(ParameterError):
        a + ComplexWaveform(np.ones(5), FS)
    with pytest.raises(ParameterError):
        a + ComplexWaveform(np.ones(4), FS / 2)
    assert np.allclose((a + a).samples, 2.0)


def test_symbol_block_complex_roundtrip():
    z = np.array([1 + 2j, -3 + 0.5j])
    b = SymbolBlock.from_complex(z, 100e6)
    assert np.array_equal(b.complex, z)
    assert np.array_equal(b[1:].complex, z[1:])


# ---------------------------------------------------------------- RRC


@given(st.floats(0.05, 1.0), st.integers(2, 24), st.integers(2, 24))
def test_rrc_taps_symmetric_unit_energy(beta, span, sps):
    rrc = design_rrc(beta, span, sps)
    assert np.array_equal(rrc.taps, rrc.taps[::-1])
    assert np.isclose(np.sum(rrc.taps**2), 1.0)


def test_rrc_matched_pair_is_nyquist():
    rrc = design_rrc(0.65, 20, 20)
    peak, right, left = raised_cosine_zero_isi(rrc.taps, 20)
    assert peak == pytest.approx(1.0, abs=1e-12)
    assert np.max(np.abs(right)) < 1e-3 and np.max(np.abs(left)) < 1e-3


def test_rrc_rejects_bad_parameters():
    for args in [(0.0, 20, 20), (1.5, 20, 20), (0.5, 0, 20), (0.5, 20, 1)]:
        with pytest.raises(ParameterError):
            design_rrc(*args)


# ---------------------------------------------------------------- up/down sampling


def test_upsample_definition():
    one = SymbolBlock.from_complex(np.array([1 + 0j]), 1.0)
    assert np.array_equal(upsample_zeros(one, 3).samples, [1, 0, 0])
    two = SymbolBlock.from_complex(np.array([2 + 1j, -1j]), 1.0)
    assert np.array_equal(upsample_zeros(two, 2).samples, [2 + 1j, 0, -1j, 0])


@given(complex_arrays, st.integers(1, 8))
def test_upsample_preserves_energy(z, factor):
    block = SymbolBlock.from_complex(z, 1.0)
    out = upsample_zeros(block, factor)
    assert np.isclose(out.energy(), np.sum(np.abs(z) ** 2), rtol=1e-12, atol=1e-12)


def test_pulse_shape_then_matched_filter_recovers_symbols():
    rrc = design_rrc(0.65, 20, 20)
    rng = np.random.default_rng(0)
    z = rng.standard_normal(400) + 1j * rng.standard_normal(400)
    shaped = pulse_shape(SymbolBlock.from_complex(z, 100e6), rrc)
    y = matched_filter_decimate(shaped.samples, rrc.taps, 20, 0, 400)
    core = slice(20, -20)
    assert np.max(np.abs(y[core] - z[core])) < 0.01


def test_matched_filter_matches_full_convolution():
    rng = np.random.default_rng(1)
    x = rng.standard_normal(500) + 1j * rng.standard_normal(500)
    taps = rng.standard_normal(21)
    full = np.convolve(x, taps, mode="same")
    for offset in (-3, 0, 4):
        y = matched_filter_decimate(x, taps, 5, offset, 60)
        idx = offset + 5 * np.arange(60)
        ok = (idx >= 0) & (idx < x.size)
        assert np.allclose(y[ok], full[idx[ok]])


# ---------------------------------------------------------------- frequency shift


def test_frequency_shift_zero_is_identity():
    w = ComplexWaveform(np.arange(8) + 1j, FS)
    assert np.array_equal(frequency_shift(w, 0.0).samples, w.samples)


@given(st.floats(-0.99e9, 0.99e9))
def test_frequency_shift_inverse_pair(f):
    x = ComplexWaveform(np.random.default_rng(2).standard_normal(256) + 0j, FS)
    back = frequency_shift(frequency_shift(x, f), -f)
    assert np.max(np.abs(back.samples - x.samples)) <= 1e-12 * np.max(np.abs(x.samples)) * 10


def test_frequency_shift_moves_tone_peak():
    n = 1 << 14
    tone = ComplexWaveform(np.exp(2j * np.pi * 200e6 / FS * np.arange(n)), FS)
    f, p = estimate_psd(frequency_shift(tone, 150e6), 1024)
    assert abs(f[np.argmax(p)] - 350e6) <= (f[1] - f[0])


def test_frequency_shift_rejects_beyond_nyquist():
    with pytest.raises(ParameterError):
        frequency_shift(ComplexWaveform(np.ones(4), FS), 1e9)


# ---------------------------------------------------------------- moving average


@given(st.complex_numbers(max_magnitude=1e3), st.integers(1, 50), st.integers(1, 50))
def test_moving_average_constant_fixed(c, n, m):
    w = ComplexWaveform(np.full(max(n, m), c, dtype=complex), FS)
    assert np.allclose(moving_average(w, m).samples, c)


def test_moving_average_window_sums():
    y = moving_average(ComplexWaveform(np.array([0, 3, 0, 3, 0], dtype=complex), FS), 3).samples.real
    # centred windows [k-1, k+1]; edges average the available samples
    assert np.allclose(y, [1.5, 1.0, 2.0, 1.0, 1.5])


@given(arrays(np.float64, st.integers(1, 60), elements=finite), st.integers(0, 60))
def test_moving_average_matches_direct_sum(x, m):
    m = min(m, x.size)
    y = moving_average(ComplexWaveform(x.astype(complex), FS), m).samples.real
    if m <= 1:
        assert np.allclose(y, x)
        return
    for k in range(x.size):
        lo, hi = max(k - (m - 1) // 2, 0), min(k + m // 2 + 1, x.size)
        assert np.isclose(y[k], x[lo:hi].mean(), atol=1e-9)


# ---------------------------------------------------------------- quantizer


def test_quantizer_one_bit():
    assert quantize_uniform(np.array([0.3]), 1, 1.0)[0] == 0.5
    assert quantize_uniform(np.array([-0.01]), 1, 1.0)[0] == -0.5


@given(st.integers(1, 14), st.floats(0.1, 10.0), st.data())
def test_quantizer_levels_are_fixed_points(n_bits, fs, data):
    step = 2 * fs / 2**n_bits
    k = data.draw(st.integers(0, 2**n_bits - 1))
    level = -fs + step / 2 + k * step
    assert np.isclose(quantize_uniform(np.array([level]), n_bits, fs)[0], level)


@given(st.integers(1, 14), st.floats(0.1, 10.0), arrays(np.float64, 16, elements=st.floats(-100, 100)))
def test_quantizer_error_and_saturation(n_bits, fs, x):
    q = quantize_uniform(x, n_bits, fs)
    step = 2 * fs / 2**n_bits
    top = fs - step / 2
    inside = np.abs(x) <= top
    assert np.all(np.abs(q[inside] - x[inside]) <= step / 2 + 1e-9)
    assert np.allclose(q[x > fs], top) and np.allclose(q[x < -fs], -top)
    assert len(np.unique(q)) <= 2**n_bits


def test_quantizer_complex_per_quadrature():
    z = np.array([0.3 - 0.7j])
    q = quantize_uniform(z, 1, 1.0)
    assert q[0] == 0.5 - 0.5j


def test_quantizer_gaussian_snr_against_overload_oracle():
    # Gaussian quantiles instead of random draws: overload noise comes from
    # rare tail samples and a random sample of 1e6 points is too noisy
    n = 1 << 20
    x = stats.norm.ppf((np.arange(n) + 0.5) / n)
    q = quantize_uniform(x, 12, 4.0)
    snr = 10 * np.log10(np.var(x) / np.mean((q - x) ** 2))
    assert abs(snr - gaussian_quantizer_snr_db(12, 4.0)) < 2.0


def test_quantizer_granular_snr_formula_without_overload():
    # the 6.02 n + 4.77 - 20 log10(load) rule counts granular noise only
    x = np.random.default_rng(4).standard_normal(1 << 20)
    x = x[np.abs(x) < 3.9]
    q = quantize_uniform(x, 12, 4.0)
    snr = 10 * np.log10(np.var(x) / np.var(q - x))
    assert abs(snr - (6.02 * 12 + 4.77 - 20 * np.log10(4.0) + 10 * np.log10(np.var(x)))) < 2.0


# ---------------------------------------------------------------- PSD


@given(st.floats(0.01, 10.0), st.integers(-500, 500))
def test_psd_integrates_tone_power(amp, fbin):
    n, seg = 1 << 13, 512
    f0 = fbin * FS / 1024
    tone = ComplexWaveform(amp * np.exp(2j * np.pi * f0 / FS * np.arange(n)), FS)
    f, p = estimate_psd(tone, seg)
    assert np.sum(p) * (f[1] - f[0]) == pytest.approx(amp**2, rel=0.01)


def test_psd_white_noise_flat_and_integrates():
    x = np.random.default_rng(5).standard_normal(1 << 18) * 0.3
    f, p = estimate_psd(ComplexWaveform(x, FS), 1024)
    df = f[1] - f[0]
    assert np.sum(p) * df == pytest.approx(0.09, rel=0.05)
    assert np.std(p) / np.mean(p) < 0.2


def test_psd_peak_at_500mhz():
    n = 1 << 14
    f, p = estimate_psd(ComplexWaveform(np.cos(2 * np.pi * 500e6 / FS * np.arange(n)), FS), 1024)
    assert abs(abs(f[np.argmax(p)]) - 500e6) < 1e-3


def test_psd_rejects_bad_segments():
    w = ComplexWaveform(np.ones(100), FS)
    with pytest.raises(ParameterError):
        estimate_psd(w, 48)
    with pytest.raises(ParameterError):
        estimate_psd(w, 128)


def test_band_power_parseval():
    rng = np.random.default_rng(6)
    x = rng.standard_normal(4096) + 1j * rng.standard_normal(4096)
    w = ComplexWaveform(x, FS)
    assert band_power(w, -FS, FS) == pytest.approx(w.power(), rel=1e-12)
