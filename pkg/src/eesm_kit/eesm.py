"""EESM link-to-system mapping, AWGN reference PER, and beta calibration.

The effective SINR compresses the post-processing SINR grid into one
scalar that predicts the same instantaneous PER as an AWGN-SISO
reference link. All SINRs here are linear; dB enters only at the AWGN
reference lookup (to_dB(x) = 10*log10(x)).
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_PER_EPS = 1e-12  # logit clamp for tabulated references


class UninformativeDatasetError(ValueError):
    """Calibration records carry a single error state everywhere."""


@dataclass
class EesmCalibration:
    """Calibrated EESM tuning parameter (alpha is tied to beta)."""

    beta: float
    objective_value: float
    search_range: tuple
    degenerate: bool = False
    n_records: int = 0
    objective_mode: str = "per_packet"

    @property
    def alpha(self):
        return self.beta


@dataclass
class AwgnPerReference:
    """AWGN-SISO instantaneous PER curve, parametric or tabulated.

    Parametric: PER = 0.5 * erfc((snr_dB - mid_dB) / slope_dB).
    Tabulated: monotone piecewise-linear interpolation in
    (snr_dB, logit PER) space, clamped to the table range.
    """

    mid_db: float | None = None
    slope_db: float | None = None
    table: np.ndarray | None = field(default=None)  # (n, 2) snr_db asc, per

    def __post_init__(self):
        if self.table is not None:
            t = np.asarray(self.table, dtype=float)
            if t.ndim != 2 or t.shape[1] != 2 or t.shape[0] == 0:
                raise ValueError("table must be a non-empty (n, 2) array")
            if np.any(np.diff(t[:, 0]) <= 0):
                raise ValueError("table snr_db must be strictly increasing")
            if np.any((t[:, 1] < 0) | (t[:, 1] > 1)):
                raise ValueError("table per values must lie in [0, 1]")
            if np.any(np.diff(t[:, 1]) > 0):
                raise ValueError("table per must be non-increasing in snr")
            self.table = t
        else:
            if self.mid_db is None or self.slope_db is None:
                raise ValueError("need either a table or (mid_db, slope_db)")
            if self.slope_db <= 0:
                raise ValueError("slope_db must be > 0")


def to_db(x):
    return 10.0 * np.log10(x)


def eesm_effective_sinr(gamma, beta):
    """EESM reduction of a linear SINR grid to one linear scalar.

    Gamma_eff = -beta * ln(mean(exp(-Gamma / beta))), computed with a
    log-sum-exp shift at min(Gamma) so large Gamma/beta cannot
    underflow the mean. A constant grid maps to that constant exactly.
    """
    if beta <= 0:
        raise ValueError("beta must be > 0")
    g = np.asarray(gamma, dtype=float)
    if g.size == 0:
        raise ValueError("empty SINR grid")
    if np.any(g <= 0) or not np.all(np.isfinite(g)):
        raise ValueError("SINR entries must be positive and finite")
    m = g.min()
    return float(m - beta * np.log(np.mean(np.exp(-(g - m) / beta))))


def _eesm_batch(gammas, beta):
    """eesm_effective_sinr over the trailing axes of a (n, ...) stack."""
    g = np.asarray(gammas, dtype=float)
    flat = g.reshape(g.shape[0], -1)
    m = flat.min(axis=1)
    return m - beta * np.log(np.mean(np.exp(-(flat - m[:, None]) / beta), axis=1))


_PHI_REGISTRY = ("eesm", "identity")


def generic_effective_sinr(gamma, phi, alpha, beta):
    """Generic L2S mapping alpha * Phi^-1(mean(Phi(Gamma / beta))).

    Registered mappings: "eesm" (Phi(x) = exp(-x); with alpha == beta
    this reproduces `eesm_effective_sinr` bit for bit) and "identity"
    (arithmetic mean, for diagnostics). "rbir" is reserved, not
    implemented.
    """
    if phi == "rbir":
        raise NotImplementedError("RBIR mapping is reserved but not implemented")
    if phi not in _PHI_REGISTRY:
        raise ValueError(f"unknown L2S mapping {phi!r}")
    if alpha <= 0 or beta <= 0:
        raise ValueError("alpha and beta must be > 0")
    if phi == "eesm":
        return (alpha / beta) * eesm_effective_sinr(gamma, beta)
    g = np.asarray(gamma, dtype=float)
    return float(alpha * np.mean(g / beta))


def _logit(p):
    p = np.clip(p, _PER_EPS, 1.0 - _PER_EPS)
    return np.log(p / (1.0 - p))


def awgn_per(ref: AwgnPerReference, snr_db):
    """Instantaneous PER of the AWGN-SISO reference at snr_db (scalar or array)."""
    snr_db = np.asarray(snr_db, dtype=float)
    if ref.table is None:
        per = 0.5 * erfc((snr_db - ref.mid_db) / ref.slope_db)
    else:
        snr = np.clip(snr_db, ref.table[0, 0], ref.table[-1, 0])
        logit = np.interp(snr, ref.table[:, 0], _logit(ref.table[:, 1]))
        per = 1.0 / (1.0 + np.exp(-logit))
    return per if per.ndim else float(per)


def _calibration_objective(gammas, errors, ref, betas, mode, n_bins=25):
    """MSE objective evaluated at each beta in `betas`."""
    out = np.empty(len(betas))
    for i, beta in enumerate(betas):
        eff_db = to_db(_eesm_batch(gammas, beta))
        if mode == "per_packet":
            out[i] = np.mean((awgn_per(ref, eff_db) - errors) ** 2)
        else:  # binned: empirical PER per effective-SINR bin
            edges = np.linspace(eff_db.min(), eff_db.max() + 1e-9, n_bins + 1)
            idx = np.digitize(eff_db, edges) - 1
            sq = []
            for b in range(n_bins):
                mask = idx == b
                if mask.sum() == 0:
                    continue
                center = 0.5 * (edges[b] + edges[b + 1])
                sq.append((awgn_per(ref, center) - errors[mask].mean()) ** 2)
            out[i] = float(np.mean(sq))
    return out


def calibrate_beta(records, ref: AwgnPerReference, search=(0.05, 100.0),
                   objective_mode="per_packet") -> EesmCalibration:
    """Fit beta by minimizing the PER mean-square error against the
    AWGN reference.

    Each record contributes its binary error state e_k against
    awgn_per(ref, to_dB(Gamma_eff(Gamma_k, beta))); a 32-point
    log-spaced coarse grid picks the basin and golden-section search on
    ln(beta) refines it to width 1e-4. `records` may be PacketRecord
    objects or any objects with `gamma` and `error` attributes.
    """
    if len(records) < 100:
        raise ValueError("need at least 100 records to calibrate beta")
    lo, hi = float(search[0]), float(search[1])
    if not 0 < lo < hi:
        raise ValueError("search range must satisfy 0 < lo < hi")
    if objective_mode not in ("per_packet", "binned"):
        raise ValueError(f"unknown objective mode {objective_mode!r}")

    gammas = np.stack([np.asarray(r.gamma, dtype=float) for r in records])
    errors = np.array([r.error for r in records], dtype=float)
    if np.all(errors == errors[0]):
        raise UninformativeDatasetError(
            "uninformative dataset: every record has the same error state"
        )

    def objective(ln_betas):
        return _calibration_objective(
            gammas, errors, ref, np.exp(np.atleast_1d(ln_betas)), objective_mode
        )

    ln_lo, ln_hi = math.log(lo), math.log(hi)
    grid = np.linspace(ln_lo, ln_hi, 32)
    vals = objective(grid)
    if vals.max() - vals.min() < 1e-12:
        return EesmCalibration(
            beta=lo, objective_value=float(vals[0]), search_range=(lo, hi),
            degenerate=True, n_records=len(records),
            objective_mode=objective_mode,
        )

    best = int(np.argmin(vals))
    a = grid[max(best - 1, 0)]
    b = grid[min(best + 1, len(grid) - 1)]
    # golden-section refinement on ln(beta)
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc = objective(c)[0]
    fd = objective(d)[0]
    while (b - a) > 1e-4:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = objective(c)[0]
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = objective(d)[0]
    ln_beta = 0.5 * (a + b)
    return EesmCalibration(
        beta=float(math.exp(ln_beta)),
        objective_value=float(objective(ln_beta)[0]),
        search_range=(lo, hi),
        n_records=len(records),
        objective_mode=objective_mode,
    )
