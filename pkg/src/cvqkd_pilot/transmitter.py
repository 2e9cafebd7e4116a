"""Gaussian-modulated coherent-state transmitter.

Symbols are pulse-shaped, upconverted to the quantum carrier ``f_uc``, and
optionally summed with an electrical pilot tone. The composite drive passes
through an ``n_dac``-bit DAC and a push-pull IQ modulator. The modulator sits
at the null point for an electrical pilot (EP) and at the quadrature point
for an optical pilot (OP), where the residual carrier is the pilot. A VOA then
sets the launch power read by the in-line power meter.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy import constants

from .errors import ConfigurationError, DegenerateInputError, ParameterError
from .wavecore import (
    ComplexWaveform,
    RrcFilter,
    SymbolBlock,
    band_power,
    pulse_shape,
    quantize_uniform,
)

__all__ = [
    "PilotKind",
    "PilotMode",
    "IqModulatorSpec",
    "LaserSpec",
    "TransmitterConfig",
    "TxOutput",
    "SmallSignalReport",
    "db_to_linear",
    "gamma_from_extinction",
    "photon_energy",
    "generate_gaussian_symbols",
    "tx_dsp",
    "drive_to_volts",
    "iq_modulate",
    "small_signal_check",
    "apply_voa_and_meter",
    "calibrate_vmod",
    "measure_pilot_ratio",
    "transmit",
]


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def gamma_from_extinction(extinction_ratio_db: float) -> float:
    """Arm-imbalance factor ``(sqrt(d) - 1)/(sqrt(d) + 1)`` for linear ER ``d``."""
    root = np.sqrt(db_to_linear(extinction_ratio_db))
    return float((root - 1.0) / (root + 1.0))


def photon_energy(wavelength_m: float) -> float:
    return constants.h * constants.c / wavelength_m


class PilotKind(enum.Enum):
    ELECTRICAL = "EP"
    OPTICAL = "OP"

    @classmethod
    def parse(cls, value) -> "PilotKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().upper()
        for kind in cls:
            if key in (kind.value, kind.name):
                return kind
        raise ConfigurationError(f"unknown pilot mode {value!r} (expected EP or OP)")


@dataclass(frozen=True)
class PilotMode:
    """Pilot scheme and carrier plan at the transmitter.

    ``f_pilot`` is the electrical pilot frequency and is ignored for OP, where
    the pilot is the optical carrier at 0 Hz in the TX frame.
    """

    mode: PilotKind
    f_uc: float
    f_pilot: float = 100e6

    def __post_init__(self):
        object.__setattr__(self, "mode", PilotKind.parse(self.mode))

    @property
    def is_electrical(self) -> bool:
        return self.mode is PilotKind.ELECTRICAL

    @property
    def tx_pilot_freq(self) -> float:
        """Pilot frequency in the TX frame (the carrier sits at 0 Hz)."""
        return self.f_pilot if self.is_electrical else 0.0

    @property
    def separation(self) -> float:
        """Quantum-carrier minus pilot frequency, fixed at the transmitter."""
        return self.f_uc - self.tx_pilot_freq

    def check_bands(self, roll_off: float, symbol_rate: float):
        half = (1.0 + roll_off) * symbol_rate / 2.0
        if abs(self.separation) <= half:
            raise ConfigurationError(
                f"pilot at {self.tx_pilot_freq / 1e6:g} MHz overlaps the quantum band "
                f"{self.f_uc / 1e6:g} +/- {half / 1e6:g} MHz"
            )


@dataclass(frozen=True)
class IqModulatorSpec:
    v_pi: float = 1.0
    extinction_ratio_db: float = 35.0
    bias: float = 1.0
    iq_imbalance_db: float = 0.0

    def __post_init__(self):
        if not self.v_pi > 0:
            raise ParameterError(f"v_pi must be positive, got {self.v_pi}")
        if not self.extinction_ratio_db > 0:
            raise ParameterError(
                f"extinction_ratio_db must be positive, got {self.extinction_ratio_db}"
            )

    @property
    def gamma(self) -> float:
        return gamma_from_extinction(self.extinction_ratio_db)

    @classmethod
    def for_mode(cls, mode, v_pi=1.0, extinction_ratio_db=35.0, iq_imbalance_db=0.0):
        """Null bias for EP, quadrature bias for OP."""
        kind = PilotKind.parse(mode)
        bias = v_pi if kind is PilotKind.ELECTRICAL else v_pi / 2.0
        return cls(v_pi, extinction_ratio_db, bias, iq_imbalance_db)


@dataclass(frozen=True)
class LaserSpec:
    wavelength_m: float = 1550e-9
    power_w: float = 1e-3

    @property
    def photon_energy(self) -> float:
        return photon_energy(self.wavelength_m)


def generate_gaussian_symbols(
    n_sym: int, variance: float, seed, symbol_rate: float = 100e6
) -> SymbolBlock:
    """I.i.d. zero-mean Gaussian quadratures, ``variance/2`` each."""
    if int(n_sym) != n_sym or n_sym < 1:
        raise ParameterError(f"n_sym must be a positive integer, got {n_sym}")
    if not variance > 0:
        raise ParameterError(f"variance must be positive, got {variance}")
    rng = np.random.default_rng(seed)
    scale = np.sqrt(variance / 2.0)
    x = rng.standard_normal(int(n_sym)) * scale
    p = rng.standard_normal(int(n_sym)) * scale
    return SymbolBlock(x, p, symbol_rate)


def tx_dsp(
    symbols: SymbolBlock,
    pilot: PilotMode,
    rrc: RrcFilter,
    F_s: float,
    rho_db: float,
    sigma_s: float | None = None,
):
    """Digital baseband drive ``s = shaped * exp(j 2 pi f_uc t) [+ pilot]``.

    Returns ``(V_RF1, V_RF2)`` as real waveforms holding ``Re s`` and ``Im s``
    in digital units. The EP tone is ``sqrt(rho) * sigma_s * exp(j 2 pi f_p t)``
    with ``sigma_s**2`` the mean power of the shaped quantum signal, taken from
    the block itself unless given.
    """
    ratio = F_s / symbols.symbol_rate
    sps = int(round(ratio))
    if abs(ratio - sps) > 1e-9 or sps != rrc.samples_per_symbol:
        raise ConfigurationError(
            f"F_s/R_s = {ratio:g} must be an integer equal to the RRC oversampling "
            f"({rrc.samples_per_symbol})"
        )
    if pilot.is_electrical:
        pilot.check_bands(rrc.roll_off, symbols.symbol_rate)
    shaped = pulse_shape(symbols, rrc).samples
    k = np.arange(shaped.size)
    s = shaped * np.exp(2j * np.pi * pilot.f_uc / F_s * k)
    if pilot.is_electrical:
        if sigma_s is None:
            sigma_s = np.sqrt(np.mean(np.abs(symbols.complex) ** 2) / sps)
        amp = np.sqrt(db_to_linear(rho_db)) * sigma_s
        s = s + amp * np.exp(2j * np.pi * pilot.f_pilot / F_s * k)
    return ComplexWaveform(s.real.copy(), F_s), ComplexWaveform(s.imag.copy(), F_s)


def iq_modulate(
    V_RF1: ComplexWaveform,
    V_RF2: ComplexWaveform,
    spec: IqModulatorSpec,
    laser: LaserSpec | None = None,
    input_phase: np.ndarray | None = None,
) -> ComplexWaveform:
    """Push-pull IQ modulator with finite extinction ratio.

    ``E_out = E_in/2 * [(e^{j t1} + g e^{-j t1}) + j a (e^{j t2} + g e^{-j t2})]``
    with ``t_i = pi (V_RFi - V_bias) / (2 V_pi)``, ``g`` the extinction factor and
    ``a`` the Q-arm field gain from the IQ imbalance (1 when balanced).
    ``E_in`` has power ``laser.power_w`` (1 if no laser given) and optional
    phase ``input_phase``.
    """
    if len(V_RF1) != len(V_RF2) or V_RF1.sample_rate != V_RF2.sample_rate:
        raise ParameterError("drive waveforms must share length and sample rate")
    v1 = np.real(V_RF1.samples)
    v2 = np.real(V_RF2.samples)
    g = spec.gamma
    t1 = np.pi * (v1 - spec.bias) / (2.0 * spec.v_pi)
    t2 = np.pi * (v2 - spec.bias) / (2.0 * spec.v_pi)
    a_q = 10.0 ** (-spec.iq_imbalance_db / 20.0)
    arm_i = np.exp(1j * t1) + g * np.exp(-1j * t1)
    arm_q = np.exp(1j * t2) + g * np.exp(-1j * t2)
    e_in = np.sqrt(laser.power_w) if laser is not None else 1.0
    if input_phase is not None:
        if len(input_phase) != len(V_RF1):
            raise ParameterError("input_phase length must match the drive")
        e_in = e_in * np.exp(1j * np.asarray(input_phase))
    return ComplexWaveform(e_in * 0.5 * (arm_i + 1j * a_q * arm_q), V_RF1.sample_rate)


@dataclass(frozen=True)
class SmallSignalReport:
    bias: np.ndarray
    measured: np.ndarray
    expected: np.ndarray
    max_abs_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_abs_error <= self.tolerance


def small_signal_check(
    spec: IqModulatorSpec, n_points: int = 201, tolerance: float = 0.01
) -> SmallSignalReport:
    """Zero-drive per-quadrature output power against ``cos^2(pi V_bias / 2 V_pi)``.

    Both arms see the same bias, so each quadrature carries half of ``|E_out|^2``.
    The measured curve is normalised to the ideal on-state arm power
    ``((1 + g)/2)^2`` so that a lossless modulator reads 1 at ``V_bias = 0``.
    """
    bias = np.linspace(0.0, 2.0 * spec.v_pi, n_points)
    zero = ComplexWaveform(np.zeros(1), 1.0)
    norm = ((1.0 + spec.gamma) / 2.0) ** 2
    measured = np.empty(n_points)
    for i, vb in enumerate(bias):
        s = IqModulatorSpec(spec.v_pi, spec.extinction_ratio_db, vb, spec.iq_imbalance_db)
        e = iq_modulate(zero, zero, s).samples[0]
        measured[i] = 0.5 * abs(e) ** 2 / norm
    expected = np.cos(0.5 * np.pi * bias / spec.v_pi) ** 2
    err = float(np.max(np.abs(measured - expected)))
    return SmallSignalReport(bias, measured, expected, err, tolerance)


def apply_voa_and_meter(
    field: ComplexWaveform,
    target_mean_photons: float,
    R_s: float,
    wavelength: float,
    rho_linear: float = 0.0,
):
    """Attenuate so the launch power equals ``<n> (1 + rho) E_ph R_s``.

    Field samples are in sqrt(W). Returns ``(attenuated_field, P_POM)``.
    """
    if not target_mean_photons > 0:
        raise ParameterError(f"target mean photon number must be positive, got {target_mean_photons}")
    p_in = field.power()
    if not p_in > 0:
        raise DegenerateInputError("cannot set launch power of a zero-power field")
    p_pom = target_mean_photons * (1.0 + rho_linear) * photon_energy(wavelength) * R_s
    return field * float(np.sqrt(p_pom / p_in)), p_pom


def calibrate_vmod(P_POM: float, rho_linear: float, E_ph: float, R_s: float) -> float:
    """``V_mod = 2 <n>`` with ``<n> = P_POM / ((1 + rho) E_ph R_s)``."""
    if not (P_POM > 0 and rho_linear >= 0 and E_ph > 0 and R_s > 0):
        raise ParameterError("calibrate_vmod needs positive power, E_ph and R_s, and rho >= 0")
    return 2.0 * P_POM / ((1.0 + rho_linear) * E_ph * R_s)


def measure_pilot_ratio(
    field: ComplexWaveform,
    pilot_freq: float,
    quantum_center: float,
    quantum_halfwidth: float,
    pilot_halfwidth: float = 0.5e6,
):
    """Pilot-band over quantum-band power of a TX-frame field.

    Returns ``(rho_linear, pilot_power, quantum_power)``.
    """
    p_pilot = band_power(field, pilot_freq - pilot_halfwidth, pilot_freq + pilot_halfwidth)
    p_q = band_power(field, quantum_center - quantum_halfwidth, quantum_center + quantum_halfwidth)
    if not p_q > 0:
        raise DegenerateInputError("no power in the quantum band")
    return p_pilot / p_q, p_pilot, p_q


@dataclass(frozen=True)
class TransmitterConfig:
    """Everything the transmitter needs besides the symbols.

    ``dac_clip_sigma`` sets the DAC full scale at that multiple of the composite
    per-quadrature rms drive. ``ep_full_scale_vpi`` maps the EP full scale to
    that fraction of V_pi. OP drive depth follows from ``rho_db`` so that the
    residual carrier over the quantum sideband power equals rho.
    """

    pilot: PilotMode
    rrc: RrcFilter
    sample_rate: float = 2e9
    symbol_rate: float = 100e6
    rho_db: float = 34.0
    n_dac: int = 12
    mean_photons: float = 1.25
    modulator: IqModulatorSpec = field(default_factory=IqModulatorSpec)
    laser: LaserSpec = field(default_factory=LaserSpec)
    dac_clip_sigma: float = 4.0
    ep_full_scale_vpi: float = 0.15

    @property
    def rho_linear(self) -> float:
        return db_to_linear(self.rho_db)

    @property
    def quantum_halfwidth(self) -> float:
        return (1.0 + self.rrc.roll_off) * self.symbol_rate / 2.0


def _op_drive_rms_volts(spec: IqModulatorSpec, rho_linear: float) -> float:
    # small-signal: carrier |E_I0|^2 per arm, sideband |D|^2 sigma_u^2 per arm
    g = spec.gamma
    th0 = np.pi * (-spec.bias) / (2.0 * spec.v_pi)
    e0 = 0.5 * (np.exp(1j * th0) + g * np.exp(-1j * th0))
    d = 0.5j * (np.exp(1j * th0) - g * np.exp(-1j * th0))
    sigma_u = np.sqrt(abs(e0) ** 2 / (abs(d) ** 2 * rho_linear))
    return float(2.0 * spec.v_pi * sigma_u / np.pi)


def drive_to_volts(V_RF1, V_RF2, config: TransmitterConfig, nominal_rms: float, quantize: bool = True):
    """DAC-quantize the digital drive and scale it to modulator volts.

    ``nominal_rms`` is the composite per-quadrature rms the DAC full scale is
    referenced to. ``quantize=False`` gives the ideal-DAC drive. Returns
    ``(V1, V2, full_scale)`` with the volts waveforms.
    """
    full_scale = config.dac_clip_sigma * nominal_rms
    if quantize:
        q1 = quantize_uniform(V_RF1, config.n_dac, full_scale)
        q2 = quantize_uniform(V_RF2, config.n_dac, full_scale)
    else:
        q1, q2 = V_RF1, V_RF2
    spec = config.modulator
    if config.pilot.is_electrical:
        volts_per_unit = config.ep_full_scale_vpi * spec.v_pi / full_scale
    else:
        volts_per_unit = _op_drive_rms_volts(spec, config.rho_linear) / nominal_rms
    return q1 * volts_per_unit, q2 * volts_per_unit, full_scale


@dataclass(frozen=True, eq=False)
class TxOutput:
    """Launch field and the transmitter-side bookkeeping for one block.

    ``rho_measured`` is pilot-band over quantum-band power. ``rho_effective``
    counts all power outside the quantum band as pilot and is the ratio used
    to turn the power-meter reading into ``v_mod``.
    """

    field: ComplexWaveform
    p_pom: float
    v_mod: float
    rho_measured: float
    rho_effective: float
    alice: SymbolBlock
    dac_full_scale: float

    @property
    def rho_measured_db(self) -> float:
        return float(10.0 * np.log10(self.rho_measured))


def transmit(symbols: SymbolBlock, config: TransmitterConfig) -> TxOutput:
    """Full TX chain for one symbol block.

    ``alice`` holds the symbols rescaled to SNU using the V_mod the power
    meter reports, i.e. per-quadrature variance ``v_mod`` over the block.
    """
    v1, v2 = tx_dsp(symbols, config.pilot, config.rrc, config.sample_rate, config.rho_db)
    sps = config.rrc.samples_per_symbol
    quantum_rms = np.sqrt(np.mean(np.abs(symbols.complex) ** 2) / sps / 2.0)
    if config.pilot.is_electrical:
        nominal_rms = quantum_rms * np.sqrt(1.0 + config.rho_linear)
    else:
        nominal_rms = quantum_rms
    if not nominal_rms > 0:
        raise DegenerateInputError("zero-power symbol block")
    def launch_ratios(field_):
        rho, _, p_q = measure_pilot_ratio(
            field_, config.pilot.tx_pilot_freq, config.pilot.f_uc, config.quantum_halfwidth
        )
        # everything outside the quantum band (pilot, carrier leakage, DAC
        # images) is charged to the pilot term of the power-meter formula
        return rho, (field_.power() - p_q) / p_q

    # the VOA is set for the design point, i.e. the same chain with an ideal DAC
    ideal1, ideal2, _ = drive_to_volts(v1, v2, config, nominal_rms, quantize=False)
    _, rho_design = launch_ratios(iq_modulate(ideal1, ideal2, config.modulator, config.laser))

    volts1, volts2, fs = drive_to_volts(v1, v2, config, nominal_rms)
    optical = iq_modulate(volts1, volts2, config.modulator, config.laser)
    launched, p_pom = apply_voa_and_meter(
        optical,
        config.mean_photons,
        config.symbol_rate,
        config.laser.wavelength_m,
        rho_design,
    )
    rho_meas, rho_eff = launch_ratios(launched)
    v_mod = calibrate_vmod(p_pom, rho_eff, config.laser.photon_energy, config.symbol_rate)
    per_quad = np.mean(np.abs(symbols.complex) ** 2) / 2.0
    alice = symbols.scaled(float(np.sqrt(v_mod / per_quad)))
    return TxOutput(launched, p_pom, v_mod, rho_meas, rho_eff, alice, fs)
