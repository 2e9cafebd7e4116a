"""Ensemble runner: one transmitted block, K independent receptions.

The transmitter runs once in the parent process. Each copy then draws fresh
laser phase noise, detector noise and calibration captures from its own seed
stream, recovers Bob's symbols, and reports second moments. The reduction is
keyed by copy index, so the result does not depend on how copies were
scheduled across workers.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.fft import next_fast_len

from ..channel import ChannelSpec, apply_channel, phase_noise_trace
from ..errors import CopyFailure, SimulationError
from ..estimation import CopyStats, EnsembleStats, EstimationResult
from ..receiver import CalibrationRecord, DetectorSpec, adc_digitize, heterodyne_detect, run_calibration
from ..rxdsp import (
    AnalyticCapture,
    PhaseEstimate,
    TimingReference,
    demodulate_stationary,
    estimate_phase,
    find_timing,
)
from ..transmitter import (
    IqModulatorSpec,
    LaserSpec,
    PilotKind,
    PilotMode,
    TransmitterConfig,
    TxOutput,
    generate_gaussian_symbols,
    transmit,
)
from ..wavecore import ComplexWaveform, SymbolBlock, design_rrc, matched_filter_decimate
from .config import RunConfig

log = logging.getLogger(__name__)

__all__ = [
    "CarrierPlan",
    "RunContext",
    "CopyOutcome",
    "PhaseStudyResult",
    "carrier_plan",
    "build_block",
    "transmitter_config",
    "copy_seeds",
    "prepare",
    "simulate_copy",
    "adc_capture",
    "run_single",
    "run_phase_study",
    "calibrate",
]

PREAMBLE_SEED = 0x5EED_0001
_TX_KEY, _COPY_KEY, _RANGING_KEY = 0, 1, 2


@dataclass(frozen=True)
class CarrierPlan:
    """TX pilot setup and where pilot and quantum carriers land at the receiver."""

    pilot: PilotMode
    freq_offset: float
    rx_pilot_freq: float
    rx_quantum_freq: float


def carrier_plan(cfg: RunConfig) -> CarrierPlan:
    s = cfg.system
    if cfg.pilot_mode is PilotKind.ELECTRICAL:
        f_p = s.f_pilot_ep if cfg.delta_f is None else s.f_uc_ep - cfg.delta_f
        pilot = PilotMode(PilotKind.ELECTRICAL, s.f_uc_ep, f_p)
        offset = s.freq_offset_ep
    else:
        if cfg.delta_f is None:
            pilot = PilotMode(PilotKind.OPTICAL, s.f_uc_op)
            offset = s.freq_offset_op
        else:
            pilot = PilotMode(PilotKind.OPTICAL, cfg.delta_f)
            offset = s.f_uc_ep - cfg.delta_f
    return CarrierPlan(pilot, offset, pilot.tx_pilot_freq + offset, pilot.f_uc + offset)


def copy_seeds(master_seed: int, index: int):
    """``(phase, detection, cal_electronic, cal_shot)`` seed sequences for one copy."""
    root = np.random.SeedSequence(master_seed, spawn_key=(_COPY_KEY, int(index)))
    return tuple(root.spawn(4))


def _tx_seed(master_seed: int):
    return np.random.SeedSequence(master_seed, spawn_key=(_TX_KEY,))


def _ranging_seed(master_seed: int):
    return np.random.SeedSequence(master_seed, spawn_key=(_RANGING_KEY,))


@dataclass(frozen=True, eq=False)
class RunContext:
    """Read-only state shared by every copy of one run."""

    cfg: RunConfig
    plan: CarrierPlan
    tx: TxOutput
    detector: DetectorSpec
    timing: TimingReference
    rrc: object
    data_slice: slice
    n_block: int

    @property
    def channel(self) -> ChannelSpec:
        return ChannelSpec(
            self.cfg.distance_km,
            self.cfg.system.loss_db_per_km,
            self.cfg.linewidth_hz,
            self.plan.freq_offset,
        )

    @property
    def equalize_bw(self):
        return self.cfg.system.pd_bandwidth if self.cfg.system.equalize_pd else None


def transmitter_config(cfg: RunConfig, plan: CarrierPlan, rrc) -> TransmitterConfig:
    s = cfg.system
    return TransmitterConfig(
        pilot=plan.pilot,
        rrc=rrc,
        sample_rate=s.sample_rate,
        symbol_rate=s.symbol_rate,
        rho_db=cfg.rho_db,
        n_dac=cfg.n_dac,
        mean_photons=s.mean_photons,
        modulator=IqModulatorSpec.for_mode(cfg.pilot_mode, s.v_pi, s.extinction_ratio_db, s.iq_imbalance_db),
        laser=LaserSpec(s.wavelength),
        dac_clip_sigma=s.dac_clip_sigma,
        ep_full_scale_vpi=s.ep_full_scale_vpi,
    )


def _detector(cfg: RunConfig) -> DetectorSpec:
    s = cfg.system
    return DetectorSpec(
        responsivity=s.responsivity,
        nep=s.nep,
        tia_gain=s.tia_gain,
        bandwidth_hz=s.pd_bandwidth,
        adc_bits=s.adc_bits,
        lo_power_w=s.lo_power_w,
        efficiency_eta=s.eta,
        wavelength_m=s.wavelength,
    )


def build_block(cfg: RunConfig) -> tuple[SymbolBlock, slice]:
    """Preamble + data + tail guard. The preamble is fixed; data and guard are seeded."""
    s = cfg.system
    # pad the guard so the sample count is 5-smooth and FFTs stay fast
    total = next_fast_len(s.preamble_len + cfg.n_sym + s.rrc_span, real=True)
    preamble = generate_gaussian_symbols(s.preamble_len, 2.0, PREAMBLE_SEED, s.symbol_rate)
    body = generate_gaussian_symbols(total - s.preamble_len, 2.0, _tx_seed(cfg.master_seed), s.symbol_rate)
    block = SymbolBlock(
        np.concatenate([preamble.X, body.X]), np.concatenate([preamble.P, body.P]), s.symbol_rate
    )
    start = s.preamble_len
    return block, slice(start, start + cfg.n_sym)


def _estimate(cfg, plan, cap, M=None) -> PhaseEstimate:
    if not cfg.sync:
        return PhaseEstimate.disabled(len(cap), plan.rx_pilot_freq)
    return estimate_phase(cap, plan.rx_pilot_freq, cfg.system.pilot_bw, cfg.maf_m if M is None else M)


def _quantum_freq(cfg, plan, est: PhaseEstimate) -> float:
    if not cfg.sync:
        return plan.rx_quantum_freq
    return est.reference_freq + plan.pilot.separation


def _quantum_band(cfg, cap: AnalyticCapture, f_q: float) -> AnalyticCapture:
    # the truncated RRC has finite stopband rejection; a strong pilot just
    # outside the quantum band would otherwise leak into the symbols
    half = 0.5 * (1.0 + cfg.system.roll_off) * cfg.system.symbol_rate
    return cap.band_limited(f_q - half, f_q + half)


def _demod(cfg, rrc, cap, est, f_q, offset, n_symbols):
    z = _quantum_band(cfg, cap, f_q).signal()
    k = np.arange(z.size)
    bb = z * np.exp(-1j * (2.0 * np.pi * f_q / cfg.system.sample_rate * k + est.phase_trace))
    return bb, matched_filter_decimate(bb, rrc.taps, cfg.system.sps, offset, n_symbols)


def _reference_timing(cfg, plan, tx: TxOutput, detector: DetectorSpec, rrc, eq_bw) -> TimingReference:
    """Noise-free back-to-back pass: symbol timing and constant derotation."""
    b2b = apply_channel(tx.field, ChannelSpec(0.0, 0.0, 0.0, plan.freq_offset))
    v = heterodyne_detect(b2b, detector, lo_on=True, shot_noise=False, electronic_noise=False)
    cap = AnalyticCapture.from_real(v, eq_bw)
    est = _estimate(cfg, plan, cap)
    f_q = _quantum_freq(cfg, plan, est)
    pre = tx.alice.complex[: cfg.system.preamble_len]
    bb, _ = _demod(cfg, rrc, cap, est, f_q, 0, 1)
    offset, _, _ = find_timing(bb, rrc, pre, cfg.system.sps, threshold=0.2)
    y = matched_filter_decimate(bb, rrc.taps, cfg.system.sps, offset, len(tx.alice))
    g = complex(np.vdot(tx.alice.complex, y))
    return TimingReference(int(offset), complex(np.conj(g) / abs(g)))


def prepare(cfg: RunConfig) -> RunContext:
    """Transmit once, range the ADC, and derive the reference timing."""
    s = cfg.system
    plan = carrier_plan(cfg)
    rrc = design_rrc(s.roll_off, s.rrc_span, s.sps)
    block, data = build_block(cfg)
    tx = transmit(block, transmitter_config(cfg, plan, rrc))
    detector = _detector(cfg)
    eq_bw = s.pd_bandwidth if s.equalize_pd else None
    timing = _reference_timing(cfg, plan, tx, detector, rrc, eq_bw)

    ch = ChannelSpec(cfg.distance_km, s.loss_db_per_km, cfg.linewidth_hz, plan.freq_offset)
    seed = _ranging_seed(cfg.master_seed)
    p_seed, d_seed = seed.spawn(2)
    ranging = apply_channel(tx.field, ch, phase_noise_trace(cfg.linewidth_hz, len(tx.field), s.sample_rate, p_seed))
    v = heterodyne_detect(ranging, detector, d_seed)
    rms = float(np.sqrt(np.mean(v.samples**2)))
    detector = detector.with_full_scale(s.adc_clip_sigma * rms)
    return RunContext(cfg, plan, tx, detector, timing, rrc, data, len(block))


@dataclass(frozen=True)
class CopyOutcome:
    index: int
    stats: CopyStats
    calibration: CalibrationRecord
    phase_error_var: float
    phase_mean_cos: float
    pilot_snr_db: float


def _phase_error(ctx: RunContext, est: PhaseEstimate, phase: np.ndarray):
    """Variance and mean cosine of the pilot phase error at symbol instants."""
    fs = ctx.cfg.system.sample_rate
    sps = ctx.cfg.system.sps
    k = np.arange(ctx.data_slice.start, ctx.data_slice.stop) * sps
    err = (
        2.0 * np.pi * (est.reference_freq - ctx.plan.rx_pilot_freq) / fs * k
        + est.phase_trace[k]
        - phase[k]
    )
    err = np.angle(np.exp(1j * err))
    err = np.angle(np.exp(1j * (err - np.angle(np.mean(np.exp(1j * err))))))
    return float(np.mean(err**2)), float(np.mean(np.cos(err)))


def adc_capture(ctx: RunContext, index: int):
    """``(seeds, true_phase, adc_samples)`` for one copy."""
    s = ctx.cfg.system
    seeds = copy_seeds(ctx.cfg.master_seed, index)
    phase = phase_noise_trace(ctx.cfg.linewidth_hz, len(ctx.tx.field), s.sample_rate, seeds[0])
    rx = apply_channel(ctx.tx.field, ctx.channel, phase)
    v = adc_digitize(heterodyne_detect(rx, ctx.detector, seeds[1]), ctx.detector)
    return seeds, phase, v


def _detect_copy(ctx: RunContext, index: int):
    seeds, phase, v = adc_capture(ctx, index)
    return seeds, phase, AnalyticCapture.from_real(v, ctx.equalize_bw)


def simulate_copy(ctx: RunContext, index: int) -> CopyOutcome:
    s = ctx.cfg.system
    seeds, phase, cap = _detect_copy(ctx, index)
    est = _estimate(ctx.cfg, ctx.plan, cap)
    f_q = _quantum_freq(ctx.cfg, ctx.plan, est)
    _, y = _demod(ctx.cfg, ctx.rrc, cap, est, f_q, ctx.timing.offset, ctx.n_block)
    y = y * ctx.timing.rotation

    def process(w: ComplexWaveform):
        c = AnalyticCapture.from_real(w, ctx.equalize_bw)
        c = _quantum_band(ctx.cfg, c, f_q)
        out = demodulate_stationary(c, f_q, ctx.rrc, ctx.timing.offset, ctx.n_block)
        if out is None:
            _, out = _demod(ctx.cfg, ctx.rrc, c, PhaseEstimate.disabled(len(c)), f_q, ctx.timing.offset, ctx.n_block)
        return out[ctx.data_slice]

    cal = run_calibration(ctx.detector, len(ctx.tx.field), seeds[2:], s.sample_rate, process)
    bob = SymbolBlock.from_complex(y[ctx.data_slice] / np.sqrt(cal.v_shot), s.symbol_rate)
    alice = ctx.tx.alice[ctx.data_slice]
    stats = CopyStats.from_blocks(alice, bob, cal.v_en)
    if ctx.cfg.sync:
        pev, pcos = _phase_error(ctx, est, phase)
    else:
        pev, pcos = float("nan"), float("nan")
    return CopyOutcome(index, stats, cal, pev, pcos, est.pilot_snr_db)


# ------------------------------------------------------------ worker pool

_WORKER_CTX: RunContext | None = None


def _init_worker(ctx: RunContext):
    global _WORKER_CTX
    _WORKER_CTX = ctx


def _guarded(fn, ctx, index):
    try:
        return fn(ctx, index)
    except SimulationError as exc:
        raise CopyFailure(index, exc) from exc


def _pool_task(args):
    name, index = args
    return _guarded(_TASKS[name], _WORKER_CTX, index)


def _map_copies(ctx: RunContext, name: str, indices, n_workers: int):
    if n_workers <= 1:
        return [_guarded(_TASKS[name], ctx, i) for i in indices]
    chunk = max(1, len(indices) // (4 * n_workers))
    with ProcessPoolExecutor(max_workers=n_workers, initializer=_init_worker, initargs=(ctx,)) as pool:
        return list(pool.map(_pool_task, [(name, i) for i in indices], chunksize=chunk))


def run_single(cfg: RunConfig, ctx: RunContext | None = None) -> EstimationResult:
    """Full ensemble estimate for one configuration."""
    ctx = ctx or prepare(cfg)
    outcomes = _map_copies(ctx, "copy", list(range(cfg.k_copies)), cfg.n_workers)
    ens = EnsembleStats.from_mapping({o.index: o.stats for o in outcomes})
    pev = [o.phase_error_var for o in sorted(outcomes, key=lambda o: o.index)]
    return ens.estimate(
        ctx.tx.v_mod,
        cfg.system.eta,
        cfg.system.beta,
        cfg.system.symbol_rate,
        rho_measured_db=ctx.tx.rho_measured_db,
        phase_error_var=float(np.mean(pev)),
    )


def run_outcomes(cfg: RunConfig, ctx: RunContext | None = None):
    """Per-copy outcomes (for diagnostics and paired comparisons)."""
    ctx = ctx or prepare(cfg)
    outcomes = _map_copies(ctx, "copy", list(range(cfg.k_copies)), cfg.n_workers)
    return ctx, sorted(outcomes, key=lambda o: o.index)


# ------------------------------------------------------------ phase study


@dataclass(frozen=True)
class PhaseStudyResult:
    """Pilot phase-error statistics against the true channel phase.

    ``xi_phase`` maps the mean cosine ``c`` of the error to the excess noise a
    pure phase error would cause, ``V_mod (1 - c^2) / c^2``.
    """

    maf_values: tuple
    phase_error_var: np.ndarray
    mean_cos: np.ndarray
    v_mod: float
    per_copy_var: np.ndarray

    @property
    def xi_phase(self) -> np.ndarray:
        c = self.mean_cos
        return self.v_mod * (1.0 - c**2) / c**2


def _phase_copy(ctx: RunContext, index: int, maf_values):
    _, phase, cap = _detect_copy(ctx, index)
    out = []
    for M in maf_values:
        est = estimate_phase(cap, ctx.plan.rx_pilot_freq, ctx.cfg.system.pilot_bw, M)
        out.append(_phase_error(ctx, est, phase))
    return np.array(out)


def run_phase_study(cfg: RunConfig, maf_values) -> PhaseStudyResult:
    """Phase-error variance for several MAF lengths on shared captures."""
    ctx = prepare(cfg)
    maf_values = tuple(int(m) for m in maf_values)
    rows = [_guarded(lambda c, i: _phase_copy(c, i, maf_values), ctx, i) for i in range(cfg.k_copies)]
    arr = np.stack(rows)  # (K, len(M), 2)
    return PhaseStudyResult(
        maf_values,
        arr[:, :, 0].mean(axis=0),
        arr[:, :, 1].mean(axis=0),
        ctx.tx.v_mod,
        arr[:, :, 0],
    )


def calibrate(cfg: RunConfig, copy_index: int = 0) -> CalibrationRecord:
    """Calibration record of one copy, referred to the symbol domain."""
    return simulate_copy(prepare(cfg), copy_index).calibration


_TASKS = {"copy": simulate_copy}
