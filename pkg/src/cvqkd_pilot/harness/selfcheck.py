"""Quick built-in checks of the closed-form and synthetic-signal contracts.

Each check returns ``(passed, detail)``. ``run_all`` runs them in order and
never raises; an exception inside a check counts as a failure.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import constants

from ..channel import ChannelSpec, apply_channel, fiber_transmittance, phase_noise_trace
from ..estimation import holevo_bound, mutual_information, secret_key_rate
from ..errors import PilotNotFoundError
from ..receiver import DetectorSpec, heterodyne_detect, noise_variances
from ..rxdsp import estimate_phase, locate_pilot
from ..transmitter import (
    IqModulatorSpec,
    PilotKind,
    PilotMode,
    apply_voa_and_meter,
    generate_gaussian_symbols,
    iq_modulate,
    photon_energy,
    tx_dsp,
)
from ..wavecore import (
    ComplexWaveform,
    band_power,
    design_rrc,
    estimate_psd,
    frequency_shift,
    moving_average,
    quantize_uniform,
)

__all__ = ["CheckResult", "CHECKS", "run_all"]

FS = 2e9


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _tone(f, n, amp=1.0):
    return ComplexWaveform(amp * np.exp(2j * np.pi * f / FS * np.arange(n)), FS)


def check_rrc_nyquist():
    rrc = design_rrc(0.65, 20, 20)
    sym = np.array_equal(rrc.taps, rrc.taps[::-1])
    full = np.convolve(rrc.taps, rrc.taps)
    c = full.size // 2
    lags = np.arange(-10, 11) * 20
    isi = full[c + lags[lags != 0]]
    ok = sym and abs(full[c] - 1.0) < 1e-9 and np.max(np.abs(isi)) < 1e-3
    return ok, f"peak={full[c]:.6f} max ISI={np.max(np.abs(isi)):.2e}"


def check_frequency_shift():
    x = ComplexWaveform(np.random.default_rng(1).standard_normal(4096) + 0j, FS)
    back = frequency_shift(frequency_shift(x, 123e6), -123e6)
    err = np.max(np.abs(back.samples - x.samples)) / np.max(np.abs(x.samples))
    f, p = estimate_psd(frequency_shift(_tone(200e6, 1 << 14), 100e6), 1024)
    return err < 1e-12 and abs(f[np.argmax(p)] - 300e6) < 2e6, f"roundtrip err={err:.1e}"


def check_moving_average():
    y = moving_average(ComplexWaveform(np.array([0.0, 3, 0, 3, 0]) + 0j, FS), 3).samples.real
    return bool(np.isclose(y[2], 2.0) and np.allclose(y[[1, 3]], 1.0)), f"out={np.round(y, 6).tolist()}"


def check_quantizer():
    one_bit = quantize_uniform(np.array([0.3]), 1, 1.0)[0]
    n = 1 << 18
    tone = 0.25 * np.sin(2 * np.pi * 0.1234567 * np.arange(n))
    q = quantize_uniform(tone, 12, 1.0)
    sndr = 10 * np.log10(np.var(tone) / np.var(q - tone))
    ideal = 6.02 * 12 + 1.76 - 20 * np.log10(4.0)
    return one_bit == 0.5 and abs(sndr - ideal) < 2.0, f"sine SNDR={sndr:.2f} dB (ideal {ideal:.2f})"


def check_psd_parseval():
    w = _tone(500e6, 1 << 14, amp=0.7)
    f, p = estimate_psd(w, 1024)
    integ = float(np.sum(p) * (f[1] - f[0]))
    noise = ComplexWaveform(np.random.default_rng(3).standard_normal(1 << 16) * 0.5, FS)
    fn, pn = estimate_psd(noise, 1024)
    integ_n = float(np.sum(pn) * (fn[1] - fn[0]))
    ok = abs(integ / 0.49 - 1) < 0.01 and abs(f[np.argmax(p)] - 500e6) < 1e-3 and abs(integ_n / 0.25 - 1) < 0.05
    return ok, f"tone {integ:.4f}/0.49 noise {integ_n:.4f}/0.25"


def check_ep_pilot_ratio():
    rrc = design_rrc(0.65, 20, 20)
    sym = generate_gaussian_symbols(20000, 2.0, 4)
    v1, v2 = tx_dsp(sym, PilotMode(PilotKind.ELECTRICAL, 500e6, 100e6), rrc, FS, 34.0)
    s = ComplexWaveform(v1.samples + 1j * v2.samples, FS)
    ratio = band_power(s, 99.5e6, 100.5e6) / band_power(s, 500e6 - 82.5e6, 500e6 + 82.5e6)
    return abs(ratio / 10**3.4 - 1) < 0.02, f"ratio/10^3.4={ratio / 10**3.4:.4f}"


def check_null_leakage():
    spec = IqModulatorSpec(1.0, 35.0, 1.0)
    z = ComplexWaveform(np.zeros(1), FS)
    e = abs(iq_modulate(z, z, spec).samples[0])
    return abs(e - (1 - spec.gamma) / np.sqrt(2)) < 1e-12 and abs(e - 0.0247) < 5e-4, f"|E|={e:.5f}"


def check_power_meter():
    e_ph = photon_energy(1550e-9)
    _, p = apply_voa_and_meter(_tone(0, 16), 1.25, 100e6, 1550e-9, 1.0)
    expected = 1.25 * 2 * e_ph * 1e8
    return abs(p / expected - 1) < 1e-12, f"P_POM={p:.4e} W"


def check_fiber():
    t100 = fiber_transmittance(ChannelSpec(100, 0.16))
    t200 = fiber_transmittance(ChannelSpec(200, 0.16))
    ok = abs(t100 - 10**-1.6) < 1e-15 and abs(t200 - 10**-3.2) < 1e-16 and fiber_transmittance(ChannelSpec(0)) == 1
    return ok, f"T(100)={t100:.5f} T(200)={t200:.3e}"


def check_phase_noise():
    lw, m = 200.0, 1000
    phi = np.stack([phase_noise_trace(lw, 20001, FS, s) for s in range(400)])
    inc = np.diff(phi[:, ::m], axis=1)
    ratio = np.var(inc) / (2 * np.pi * lw * m / FS)
    w = apply_channel(_tone(0, 4096), ChannelSpec(0, 0, 0, 100e6))
    f, p = estimate_psd(w, 1024)
    return abs(ratio - 1) < 0.05 and abs(f[np.argmax(p)] - 100e6) < 2e6, f"increment var ratio={ratio:.3f}"


def check_beat_note():
    spec = DetectorSpec()
    amp = 1e-6
    v = heterodyne_detect(_tone(300e6, 4096, amp), spec, shot_noise=False, electronic_noise=False, bandwidth_limit=False)
    expected = 2 * spec.responsivity * np.sqrt(spec.optical_efficiency * spec.lo_power_w) * amp * spec.tia_gain
    got = np.max(np.abs(v.samples))
    return abs(got / expected - 1) < 1e-9, f"peak={got:.6e} expected={expected:.6e}"


def check_electronic_noise():
    def v_en(p_lo):
        shot, elec = noise_variances(DetectorSpec(lo_power_w=p_lo), FS)
        return elec / shot

    a, b = v_en(1.5e-3), v_en(3e-3)
    return 0.01 <= a <= 0.3 and abs(a / b - 2) < 0.1, f"V_en={a:.4f} (2x LO: {b:.4f})"


def check_locate_pilot():
    n = int(1e-3 * FS)
    rng = np.random.default_rng(5)
    tone = np.cos(2 * np.pi * 100e6 / FS * np.arange(n)) + 0.1 * rng.standard_normal(n)
    f = locate_pilot(ComplexWaveform(tone, FS), (50e6, 150e6))
    errors = 0
    for sig in (0.1 * rng.standard_normal(n), np.cos(2 * np.pi * 500e6 / FS * np.arange(n))):
        try:
            locate_pilot(ComplexWaveform(sig, FS), (50e6, 150e6))
        except PilotNotFoundError:
            errors += 1
    return abs(f - 100e6) < 1e3 and errors == 2, f"f={f:.1f} Hz, rejections={errors}/2"


def check_noiseless_phase():
    n = 1 << 16
    phi = phase_noise_trace(200.0, n, FS, 6)
    tone = np.cos(2 * np.pi * 100e6 / FS * np.arange(n) + phi)
    # wide filter: a band-limited estimate cannot follow the phase-noise
    # content outside the pilot band (about 2e-3 rad rms at 25 MHz)
    est = estimate_phase(ComplexWaveform(tone, FS), 100e6, 250e6, 0)
    k = np.arange(n)
    full = 2 * np.pi * est.reference_freq / FS * k + est.phase_trace - 2 * np.pi * 100e6 / FS * k
    err = np.angle(np.exp(1j * (full - phi)))
    core = err[n // 8 : -n // 8]
    rms = float(np.sqrt(np.mean((core - core.mean()) ** 2)))
    return rms < 1e-3, f"rms={rms:.2e} rad"


def check_rate_formulas():
    i_ab = mutual_information(2.5, 1.0, 1.0, 0.0, 0.0)
    chi = holevo_bound(2.5, 1.0, 1.0, 0.0, 0.0)
    skr = secret_key_rate(1.0, 0.0, 0.95, 100e6)
    ok = abs(i_ab - np.log2(2.25)) < 1e-12 and abs(chi) < 1e-9 and abs(skr - 2.375e7) < 1e-6
    return ok, f"I_AB={i_ab:.4f} chi(identity)={chi:.1e} SKR={skr:.4e}"


def check_photon_energy():
    e = photon_energy(1550e-9)
    return abs(e - constants.h * constants.c / 1550e-9) < 1e-30, f"E_ph={e:.4e} J"


CHECKS: list[tuple[str, Callable[[], tuple[bool, str]]]] = [
    ("rrc symmetric and Nyquist", check_rrc_nyquist),
    ("frequency shift inverse and peak", check_frequency_shift),
    ("moving average window sums", check_moving_average),
    ("quantizer levels and 12-bit SNR", check_quantizer),
    ("PSD integrates to power", check_psd_parseval),
    ("EP pilot ratio 34 dB", check_ep_pilot_ratio),
    ("null-point carrier leakage", check_null_leakage),
    ("power-meter target", check_power_meter),
    ("fiber transmittance", check_fiber),
    ("Wiener increments and offset", check_phase_noise),
    ("heterodyne beat amplitude", check_beat_note),
    ("electronic noise in SNU", check_electronic_noise),
    ("pilot location and rejection", check_locate_pilot),
    ("noiseless phase tracking", check_noiseless_phase),
    ("rate formulas", check_rate_formulas),
    ("photon energy", check_photon_energy),
]


def run_all() -> list[CheckResult]:
    out = []
    for name, fn in CHECKS:
        try:
            ok, detail = fn()
        except Exception as exc:  # noqa: BLE001 - a crashing check is a failed check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append(CheckResult(name, bool(ok), detail))
    return out
