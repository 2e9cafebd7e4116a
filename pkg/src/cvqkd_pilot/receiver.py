"""RF heterodyne front end: LO beat, balanced detection noise, PD bandwidth and ADC.

Current convention: the optical field is in sqrt(W) and the balanced
photocurrent is ``i = 2 R sqrt(eta_opt P_LO) Re{E}``. ``eta_opt`` is the
optical part of the detection efficiency, i.e. the configured total ``eta``
divided by the photodiode quantum efficiency ``R E_ph / q``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import constants

from .errors import CalibrationError, ConfigurationError, ParameterError
from .wavecore import ComplexWaveform, quantize_uniform

__all__ = [
    "DetectorSpec",
    "CalibrationRecord",
    "single_pole_response",
    "pd_response_rfft",
    "heterodyne_detect",
    "adc_digitize",
    "noise_variances",
    "run_calibration",
]


@dataclass(frozen=True)
class DetectorSpec:
    """Balanced receiver parameters.

    ``adc_full_scale`` may be left as ``None`` until the receiver has been
    ranged (see ``with_full_scale``); digitizing requires it.
    """

    responsivity: float = 1.0
    nep: float = 7e-12
    tia_gain: float = 3500.0
    bandwidth_hz: float = 800e6
    adc_bits: int = 12
    adc_full_scale: float | None = None
    lo_power_w: float = 1.5e-3
    efficiency_eta: float = 0.7
    wavelength_m: float = 1550e-9

    def __post_init__(self):
        for name in ("responsivity", "tia_gain", "bandwidth_hz", "lo_power_w", "wavelength_m"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive, got {getattr(self, name)}")
        if self.nep < 0:
            raise ParameterError(f"nep must be >= 0, got {self.nep}")
        if not 0 < self.efficiency_eta <= 1:
            raise ParameterError(f"efficiency_eta must be in (0, 1], got {self.efficiency_eta}")
        if int(self.adc_bits) != self.adc_bits or self.adc_bits < 1:
            raise ParameterError(f"adc_bits must be an integer >= 1, got {self.adc_bits}")
        if self.adc_full_scale is not None and not self.adc_full_scale > 0:
            raise ParameterError(f"adc_full_scale must be positive, got {self.adc_full_scale}")
        if self.optical_efficiency > 1.0 + 1e-12:
            raise ConfigurationError(
                f"eta={self.efficiency_eta} exceeds the photodiode quantum efficiency "
                f"{self.quantum_efficiency:.3f} implied by the responsivity"
            )

    @property
    def quantum_efficiency(self) -> float:
        e_ph = constants.h * constants.c / self.wavelength_m
        return self.responsivity * e_ph / constants.e

    @property
    def optical_efficiency(self) -> float:
        return self.efficiency_eta / self.quantum_efficiency

    def with_full_scale(self, full_scale: float) -> "DetectorSpec":
        return replace(self, adc_full_scale=float(full_scale))


@dataclass(frozen=True)
class CalibrationRecord:
    """Noise variances from the two optical-switch settings (raw units)."""

    v_electronic: float
    v_shot_plus_electronic: float
    v_shot: float
    snu_scale: float

    @property
    def v_en(self) -> float:
        return self.v_electronic / self.v_shot

    @classmethod
    def from_variances(cls, v_electronic: float, v_shot_plus_electronic: float):
        v_shot = v_shot_plus_electronic - v_electronic
        if not v_shot > 0:
            raise CalibrationError(
                f"shot-noise variance {v_shot:.3e} is not positive; LO power too low "
                "against electronic noise"
            )
        return cls(float(v_electronic), float(v_shot_plus_electronic), float(v_shot), 1.0 / v_shot)


def single_pole_response(freqs: np.ndarray, bandwidth_hz: float) -> np.ndarray:
    return 1.0 / (1.0 + 1j * freqs / bandwidth_hz)


@lru_cache(maxsize=8)
def pd_response_rfft(n: int, sample_rate: float, bandwidth_hz: float) -> np.ndarray:
    """Single-pole response on the ``rfft`` grid of an ``n``-sample capture (read-only)."""
    h = single_pole_response(np.fft.rfftfreq(n, 1.0 / sample_rate), bandwidth_hz)
    h.flags.writeable = False
    return h


def noise_variances(spec: DetectorSpec, sample_rate: float):
    """Per-sample current variances ``(shot, electronic)`` in A^2 (white, full band)."""
    shot = constants.e * spec.responsivity * spec.lo_power_w * sample_rate
    elec = (spec.nep * spec.responsivity) ** 2 * sample_rate / 2.0
    return shot, elec


def heterodyne_detect(
    signal: ComplexWaveform,
    spec: DetectorSpec,
    seed=None,
    *,
    lo_on: bool = True,
    shot_noise: bool = True,
    electronic_noise: bool = True,
    bandwidth_limit: bool = True,
) -> ComplexWaveform:
    """TIA output voltage (before the ADC) for a received field.

    The beat term and shot noise need the LO; electronic noise is always
    present unless disabled. Noise is white Gaussian at the current level and
    the sum passes the TIA and the single-pole PD response.
    """
    n = len(signal)
    fs = signal.sample_rate
    current = np.zeros(n)
    if lo_on:
        amp = 2.0 * spec.responsivity * np.sqrt(spec.optical_efficiency * spec.lo_power_w)
        current = amp * np.real(signal.samples)
    rng = np.random.default_rng(seed)
    var_shot, var_elec = noise_variances(spec, fs)
    sigma2 = (var_shot if (lo_on and shot_noise) else 0.0) + (var_elec if electronic_noise else 0.0)
    if sigma2 > 0:
        current = current + rng.standard_normal(n) * np.sqrt(sigma2)
    volts = current * spec.tia_gain
    if bandwidth_limit:
        spectrum = np.fft.rfft(volts)
        spectrum *= pd_response_rfft(n, fs, spec.bandwidth_hz)
        volts = np.fft.irfft(spectrum, n)
    return ComplexWaveform(volts, fs)


def adc_digitize(v: ComplexWaveform, spec: DetectorSpec) -> ComplexWaveform:
    if spec.adc_full_scale is None:
        raise ConfigurationError("ADC full scale is not set; range the receiver first")
    return quantize_uniform(v, spec.adc_bits, spec.adc_full_scale)


def _variance(values) -> float:
    values = values.samples if isinstance(values, ComplexWaveform) else np.asarray(values)
    if np.iscomplexobj(values):
        return 0.5 * (float(np.var(values.real)) + float(np.var(values.imag)))
    return float(np.var(values))


def run_calibration(
    spec: DetectorSpec,
    n_samples: int,
    seeds,
    sample_rate: float = 2e9,
    process: Callable[[ComplexWaveform], object] | None = None,
) -> CalibrationRecord:
    """Electronic-only and shot-plus-electronic captures with no signal.

    Both captures go through the ADC. ``process`` maps a digitized capture to
    the domain where variances are compared (e.g. the RX DSP symbol output);
    for complex outputs the per-quadrature variance is used.
    """
    if int(n_samples) != n_samples or n_samples < 2:
        raise ParameterError(f"n_samples must be an integer >= 2, got {n_samples}")
    seed_e, seed_s = seeds
    vacuum = ComplexWaveform(np.zeros(int(n_samples), dtype=complex), sample_rate)
    process = process or (lambda w: w)
    raw_e = adc_digitize(heterodyne_detect(vacuum, spec, seed_e, lo_on=False), spec)
    raw_s = adc_digitize(heterodyne_detect(vacuum, spec, seed_s, lo_on=True), spec)
    return CalibrationRecord.from_variances(_variance(process(raw_e)), _variance(process(raw_s)))
