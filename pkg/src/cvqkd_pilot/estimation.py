"""Parameter estimation and asymptotic key rate for heterodyne GG02.

Reverse reconciliation, collective attacks, trusted detector noise (``eta``
and ``V_en`` are calibrated and not attributed to Eve). All variances are in
shot-noise units (SNU).

Ensemble estimates follow an average-then-plug order: the covariance and
conditional variance are averaged over the K copies first and only then
turned into ``T_ch`` and ``xi_A``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .errors import ChannelEstimationError, ParameterError, PhysicalityError
from .wavecore import SymbolBlock

__all__ = [
    "CopyStats",
    "EnsembleStats",
    "EstimationResult",
    "transmittance_from_covariance",
    "excess_noise_from_conditional",
    "conditional_variance",
    "estimate_transmittance",
    "estimate_excess_noise",
    "mutual_information",
    "holevo_bound",
    "symplectic_eigenvalues",
    "g_entropy",
    "secret_key_rate",
    "raw_secret_key_rate",
    "pe_indices",
]


def pe_indices(n: int) -> np.ndarray:
    """Parameter-estimation half of a block: the even symbol indices."""
    return np.arange(0, n, 2)


# ---------------------------------------------------------------- formulas


def transmittance_from_covariance(c_ab: float, v_mod: float, eta: float) -> float:
    """``T = (2/eta) (C_AB / V_mod)^2``."""
    if not c_ab > 0:
        raise ChannelEstimationError(f"mean covariance {c_ab:.3e} is not positive (sync lost?)")
    return 2.0 / eta * (c_ab / v_mod) ** 2


def excess_noise_from_conditional(v_b_a: float, t_ch: float, eta: float, v_en: float) -> float:
    """``xi_A = 2 (V_B|A - 1 - V_en) / (eta T)``."""
    if not t_ch > 0:
        raise ParameterError(f"t_ch must be positive, got {t_ch}")
    return 2.0 * (v_b_a - 1.0 - v_en) / (eta * t_ch)


def conditional_variance(var_a: float, var_b: float, cov: float, t_ch: float, eta: float) -> float:
    """``Var(B - t A)`` with ``t = sqrt(0.5 eta T)`` from second moments."""
    t = np.sqrt(0.5 * eta * t_ch)
    return var_b - 2.0 * t * cov + t * t * var_a


def mutual_information(v_mod: float, t_ch: float, eta: float, xi_a: float, v_en: float) -> float:
    """Heterodyne Alice-Bob information, bits per symbol (both quadratures)."""
    signal = 0.5 * eta * t_ch * v_mod
    noise = 1.0 + v_en + 0.5 * eta * t_ch * xi_a
    return float(np.log2(1.0 + signal / noise))


def g_entropy(lam) -> np.ndarray:
    """Von Neumann entropy of a thermal mode with symplectic eigenvalue ``lam``.

    ``G(x) = (x+1) log2(x+1) - x log2 x`` at ``x = (lam - 1)/2``.
    """
    x = np.maximum((np.asarray(lam, dtype=float) - 1.0) / 2.0, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        xlogx = np.where(x > 0, x * np.log2(np.where(x > 0, x, 1.0)), 0.0)
    return (x + 1.0) * np.log2(x + 1.0) - xlogx


def _pair(total, gap, product):
    # nu_+ from sum and gap; nu_- from the product so it keeps full precision
    big = 0.5 * (total + gap)
    return big, product / big


def symplectic_eigenvalues(v_mod, t_ch, eta, xi_a, v_en):
    """``(l1, l2, l3, l4)``: Eve-side eigenvalues before and after Bob's heterodyne.

    Each pair is formed from its sum ``sqrt(a + 2 sqrt(b))`` and its
    difference, which factorises exactly (``a - 2 sqrt(b)`` is a perfect
    square), so degenerate pairs stay degenerate to rounding.
    """
    v = v_mod + 1.0
    t = t_ch
    chi_line = 1.0 / t - 1.0 + xi_a
    chi_het = (2.0 - eta + 2.0 * v_en) / eta
    chi_tot = chi_line + chi_het / t
    a = v * v * (1.0 - 2.0 * t) + 2.0 * t + t * t * (v + chi_line) ** 2
    sqrt_b = t * (v * chi_line + 1.0)
    l1, l2 = _pair(np.sqrt(a + 2.0 * sqrt_b), abs(t * v + t * chi_line - v), sqrt_b)
    scale = t * v + t * chi_line + chi_het
    c = (
        a * chi_het**2
        + sqrt_b**2
        + 1.0
        + 2.0 * chi_het * (v * sqrt_b + t * (v + chi_line))
        + 2.0 * t * (v * v - 1.0)
    ) / scale**2
    sqrt_d = (v + sqrt_b * chi_het) / scale
    gap = (t * v * chi_het - t * v * chi_line + t * chi_het * chi_line - t - v * chi_het + 1.0) / scale
    l3, l4 = _pair(np.sqrt(c + 2.0 * sqrt_d), abs(gap), sqrt_d)
    return l1, l2, l3, l4


def holevo_bound(
    v_mod: float, t_ch: float, eta: float, xi_a: float, v_en: float, tol: float = 1e-9
) -> float:
    """Holevo information between Eve and Bob's heterodyne outcome, bits/symbol.

    ``tol`` is the slack on the physicality test ``lambda >= 1``.
    """
    if not 0 < t_ch <= 1 + tol or not 0 < eta <= 1 or v_mod < 0 or v_en < 0:
        raise ParameterError("holevo_bound needs 0 < T <= 1, 0 < eta <= 1, V_mod >= 0, V_en >= 0")
    with np.errstate(invalid="ignore"):
        lams = symplectic_eigenvalues(v_mod, t_ch, eta, xi_a, v_en)
    if not np.all(np.isfinite(lams)) or min(lams) < 1.0 - tol:
        raise PhysicalityError(
            f"unphysical covariance: smallest symplectic eigenvalue {min(lams):.12f}"
        )
    g = g_entropy(np.asarray(lams))
    return float(g[0] + g[1] - g[2] - g[3])


def raw_secret_key_rate(i_ab: float, chi_be: float, beta: float, R_s: float) -> float:
    """``0.5 (beta I_AB - chi_BE) R_s / 2`` without clamping."""
    if not 0 < beta <= 1:
        raise ParameterError(f"beta must be in (0, 1], got {beta}")
    return 0.5 * (beta * i_ab - chi_be) * R_s / 2.0


def secret_key_rate(i_ab: float, chi_be: float, beta: float, R_s: float) -> float:
    return max(0.0, raw_secret_key_rate(i_ab, chi_be, beta, R_s))


# ---------------------------------------------------------------- moments


@dataclass(frozen=True)
class CopyStats:
    """Second moments of one copy, quadrature-averaged, over the PE half.

    ``var_a``, ``var_b`` and ``cov`` are the means of the X and P sample
    (co)variances; ``v_en`` is this copy's electronic noise in SNU.
    """

    var_a: float
    var_b: float
    cov: float
    v_en: float
    n: int

    @classmethod
    def from_blocks(cls, tx: SymbolBlock, rx: SymbolBlock, v_en: float, use_pe_half: bool = True):
        if len(tx) != len(rx):
            raise ParameterError(f"tx/rx length mismatch: {len(tx)} vs {len(rx)}")
        if use_pe_half:
            idx = pe_indices(len(tx))
            tx, rx = tx[idx], rx[idx]
        var_a = 0.5 * (np.var(tx.X) + np.var(tx.P))
        var_b = 0.5 * (np.var(rx.X) + np.var(rx.P))
        cov_x = np.mean((tx.X - tx.X.mean()) * (rx.X - rx.X.mean()))
        cov_p = np.mean((tx.P - tx.P.mean()) * (rx.P - rx.P.mean()))
        return cls(float(var_a), float(var_b), float(0.5 * (cov_x + cov_p)), float(v_en), len(tx))


@dataclass(frozen=True)
class EstimationResult:
    v_mod: float
    t_ch: float
    v_en: float
    xi_a: float
    i_ab: float
    chi_be: float
    skr_bps: float
    skr_raw: float
    n_symbols_used: int
    n_copies: int
    xi_a_stderr: float = float("nan")
    rho_measured_db: float = float("nan")
    phase_error_var: float = float("nan")
    flags: tuple = ()
    status: str = "ok"

    @property
    def xi_a_msnu(self) -> float:
        return 1e3 * self.xi_a


@dataclass
class EnsembleStats:
    """Order-insensitive collection of per-copy moments keyed by copy index."""

    copies: dict = field(default_factory=dict)

    def add(self, index: int, stats: CopyStats):
        if index in self.copies:
            raise ParameterError(f"copy {index} already recorded")
        self.copies[int(index)] = stats

    def merge(self, other: "EnsembleStats") -> "EnsembleStats":
        overlap = self.copies.keys() & other.copies.keys()
        if overlap:
            raise ParameterError(f"copies recorded twice: {sorted(overlap)[:5]}")
        return EnsembleStats({**self.copies, **other.copies})

    @classmethod
    def from_mapping(cls, items: Mapping[int, CopyStats] | Iterable[tuple[int, CopyStats]]):
        out = cls()
        for k, v in dict(items).items():
            out.add(k, v)
        return out

    def __len__(self) -> int:
        return len(self.copies)

    def _ordered(self) -> list[CopyStats]:
        return [self.copies[k] for k in sorted(self.copies)]

    def means(self):
        rows = self._ordered()
        if not rows:
            raise ParameterError("no copies to estimate from")
        arr = np.array([[r.var_a, r.var_b, r.cov, r.v_en] for r in rows])
        return arr.mean(axis=0), arr

    def estimate(
        self,
        v_mod: float,
        eta: float,
        beta: float = 0.95,
        symbol_rate: float = 100e6,
        **extra,
    ) -> EstimationResult:
        (var_a, var_b, cov, v_en), arr = self.means()
        k = arr.shape[0]
        t_ch = transmittance_from_covariance(cov, v_mod, eta)
        v_ba_k = conditional_variance(arr[:, 0], arr[:, 1], arr[:, 2], t_ch, eta)
        xi = excess_noise_from_conditional(float(v_ba_k.mean()), t_ch, eta, v_en)
        xi_k = excess_noise_from_conditional(v_ba_k, t_ch, eta, arr[:, 3])
        stderr = float(np.std(xi_k, ddof=1) / np.sqrt(k)) if k > 1 else float("nan")

        flags = []
        t_eff = t_ch
        if t_ch > 1.0:
            flags.append("t_ch>1")
            t_eff = 1.0
        xi_eff = xi
        if xi < 0:
            flags.append("xi<0")
            xi_eff = 0.0
        status = "ok"
        i_ab = mutual_information(v_mod, t_eff, eta, xi_eff, v_en)
        try:
            chi = holevo_bound(v_mod, t_eff, eta, xi_eff, v_en)
        except PhysicalityError:
            chi = float("nan")
            status = "unphysical"
        raw = raw_secret_key_rate(i_ab, chi, beta, symbol_rate) if status == "ok" else float("nan")
        skr = max(0.0, raw) if status == "ok" else 0.0
        n_used = int(sum(r.n for r in self._ordered()))
        return EstimationResult(
            v_mod=float(v_mod),
            t_ch=float(t_ch),
            v_en=float(v_en),
            xi_a=float(xi),
            i_ab=i_ab,
            chi_be=chi,
            skr_bps=skr,
            skr_raw=raw,
            n_symbols_used=n_used,
            n_copies=k,
            xi_a_stderr=stderr,
            flags=tuple(flags),
            status=status,
            **extra,
        )


def _copies(tx, rx):
    if isinstance(tx, SymbolBlock):
        return [(tx, rx)]
    pairs = list(zip(tx, rx, strict=True))
    if not pairs:
        raise ParameterError("no copies given")
    return pairs


def estimate_transmittance(tx, rx, v_mod: float, eta: float) -> float:
    """``T_ch`` from one aligned block pair or from lists of copies (SNU, PE half)."""
    covs = [CopyStats.from_blocks(a, b, 0.0).cov for a, b in _copies(tx, rx)]
    return transmittance_from_covariance(float(np.mean(covs)), v_mod, eta)


def estimate_excess_noise(tx, rx, t_ch: float, eta: float, v_en: float) -> float:
    """``xi_A`` from one aligned block pair or from lists of copies (SNU, PE half)."""
    stats = [CopyStats.from_blocks(a, b, v_en) for a, b in _copies(tx, rx)]
    v_ba = np.mean([conditional_variance(s.var_a, s.var_b, s.cov, t_ch, eta) for s in stats])
    return excess_noise_from_conditional(float(v_ba), t_ch, eta, v_en)
