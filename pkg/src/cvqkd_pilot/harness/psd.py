"""Spectra at the probe points and the DAC-distortion metric."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError
from ..transmitter import drive_to_volts, iq_modulate, transmit, tx_dsp
from ..wavecore import ComplexWaveform, band_power, design_rrc, estimate_psd
from .config import RunConfig
from .runner import adc_capture, build_block, carrier_plan, prepare, transmitter_config

__all__ = ["Stage", "probe_waveform", "export_psd", "write_psd_csv", "DacDistortion", "dac_distortion"]


class Stage(str, Enum):
    TX_OUTPUT = "tx_output"
    RX_OUTPUT = "rx_output"

    @classmethod
    def parse(cls, value) -> "Stage":
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ConfigurationError(f"stage must be one of {[s.value for s in cls]}, got {value!r}") from None


def probe_waveform(cfg: RunConfig, stage) -> ComplexWaveform:
    """Launched optical field (``tx_output``) or copy 0's ADC samples (``rx_output``)."""
    stage = Stage.parse(stage)
    if stage is Stage.TX_OUTPUT:
        plan = carrier_plan(cfg)
        s = cfg.system
        rrc = design_rrc(s.roll_off, s.rrc_span, s.sps)
        block, _ = build_block(cfg)
        return transmit(block, transmitter_config(cfg, plan, rrc)).field
    return adc_capture(prepare(cfg), 0)[2]


def write_psd_csv(path, freqs: np.ndarray, psd: np.ndarray):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["freq_hz", "psd_per_hz"])
        w.writerows(zip(freqs.tolist(), psd.tolist()))


def export_psd(cfg: RunConfig, stage, path=None, segment_len: int = 4096):
    """Welch PSD at a probe point, optionally written as ``freq_hz,psd_per_hz`` CSV."""
    freqs, psd = estimate_psd(probe_waveform(cfg, stage), segment_len)
    if path is not None:
        write_psd_csv(path, freqs, psd)
    return freqs, psd


@dataclass(frozen=True)
class DacDistortion:
    """In-band power added by the DAC, relative to the ideal in-band power."""

    distortion_power: float
    quantum_power: float

    @property
    def relative_db(self) -> float:
        return float(10 * np.log10(max(self.distortion_power, 1e-300) / self.quantum_power))


def dac_distortion(cfg: RunConfig) -> DacDistortion:
    """Quantum-band power of (quantized - ideal DAC) optical field.

    Both fields come from the same symbols and drive mapping and differ only
    by the DAC quantizer, so the difference holds quantization noise and
    spurs (pilot replicas in EP mode) that land on the quantum signal.
    """
    plan = carrier_plan(cfg)
    s = cfg.system
    rrc = design_rrc(s.roll_off, s.rrc_span, s.sps)
    block, _ = build_block(cfg)
    tcfg = transmitter_config(cfg, plan, rrc)
    v1, v2 = tx_dsp(block, tcfg.pilot, rrc, tcfg.sample_rate, tcfg.rho_db)
    quantum_rms = np.sqrt(np.mean(np.abs(block.complex) ** 2) / s.sps / 2.0)
    nominal = quantum_rms * np.sqrt(1.0 + tcfg.rho_linear) if tcfg.pilot.is_electrical else quantum_rms
    ideal = iq_modulate(*drive_to_volts(v1, v2, tcfg, nominal, quantize=False)[:2], tcfg.modulator)
    real = iq_modulate(*drive_to_volts(v1, v2, tcfg, nominal)[:2], tcfg.modulator)
    lo, hi = plan.pilot.f_uc - tcfg.quantum_halfwidth, plan.pilot.f_uc + tcfg.quantum_halfwidth
    return DacDistortion(band_power(real - ideal, lo, hi), band_power(ideal, lo, hi))
