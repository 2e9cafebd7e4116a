"""Fiber loss, lumped TX+LO laser phase noise and TX-LO frequency offset."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .wavecore import ComplexWaveform

__all__ = ["ChannelSpec", "fiber_transmittance", "phase_noise_trace", "apply_channel"]


@dataclass(frozen=True)
class ChannelSpec:
    distance_km: float = 100.0
    loss_db_per_km: float = 0.16
    linewidth_total_hz: float = 0.0
    freq_offset_hz: float = 0.0

    def __post_init__(self):
        if self.distance_km < 0:
            raise ParameterError(f"distance_km must be >= 0, got {self.distance_km}")
        if self.loss_db_per_km < 0:
            raise ParameterError(f"loss_db_per_km must be >= 0, got {self.loss_db_per_km}")
        if self.linewidth_total_hz < 0:
            raise ParameterError(
                f"linewidth_total_hz must be >= 0, got {self.linewidth_total_hz}"
            )


def fiber_transmittance(spec: ChannelSpec) -> float:
    return float(10.0 ** (-spec.loss_db_per_km * spec.distance_km / 10.0))


def phase_noise_trace(linewidth_hz: float, n_samples: int, F_s: float, seed) -> np.ndarray:
    """Wiener phase with increment variance ``2 pi linewidth / F_s`` and ``phi[0] = 0``."""
    if linewidth_hz < 0:
        raise ParameterError(f"linewidth must be >= 0, got {linewidth_hz}")
    if linewidth_hz == 0:
        return np.zeros(int(n_samples))
    rng = np.random.default_rng(seed)
    steps = rng.standard_normal(int(n_samples)) * np.sqrt(2.0 * np.pi * linewidth_hz / F_s)
    steps[0] = 0.0
    return np.cumsum(steps)


def apply_channel(
    field: ComplexWaveform, spec: ChannelSpec, phase: np.ndarray | None = None
) -> ComplexWaveform:
    """``field * sqrt(T) * exp(j (2 pi f_off k / F_s + phase[k]))``.

    The signal is rotated relative to an ideal LO, so the whole TX-LO beat
    (offset and both lasers' phase noise) lives here.
    """
    n = len(field)
    if phase is not None and len(phase) != n:
        raise ParameterError(f"phase trace length {len(phase)} != field length {n}")
    arg = np.zeros(n)
    if spec.freq_offset_hz:
        arg = 2.0 * np.pi * spec.freq_offset_hz / field.sample_rate * np.arange(n)
    if phase is not None:
        arg = arg + phase
    gain = np.sqrt(fiber_transmittance(spec))
    return field.with_samples(field.samples * gain * np.exp(1j * arg))
