"""Per-packet frequency-selective channel generation and estimation error.

The channel is a tapped-delay-line Rayleigh model: ``n_taps`` i.i.d.
ZMCSCG tap matrices with an exponential power-delay profile, converted
to per-subcarrier frequency-domain matrices by a DFT over the delay
axis. Tap powers are normalized to sum to one so each entry of H_i has
unit average power. Channels are i.i.d. across packets (block fading)
and deterministic given (seed, packet_index).

Estimation error is modeled additively, H_hat = H + Delta_H, with
Delta_H entries i.i.d. ZMCSCG of per-entry variance sigma_e2. The
default variance rule is sigma_e2 = 1 / (n_t * SNR).
"""

from dataclasses import dataclass

import numpy as np

from eesm_kit import linalg
from eesm_kit.seeds import PURPOSE_CHANNEL, packet_rng


@dataclass(frozen=True)
class ChannelConfig:
    """Antenna/subcarrier geometry and delay-line shape of the link."""

    n_t: int = 2
    n_r: int = 2
    n_s: int = 2
    n_sc: int = 242
    n_taps: int = 8
    decay: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.n_s <= min(self.n_t, self.n_r):
            raise ValueError(
                f"need 1 <= n_s <= min(n_t, n_r), got n_s={self.n_s}, "
                f"n_t={self.n_t}, n_r={self.n_r}"
            )
        if self.n_sc < 1:
            raise ValueError("n_sc must be >= 1")
        if self.n_taps < 1:
            raise ValueError("n_taps must be >= 1")
        if self.decay < 0:
            raise ValueError("decay must be >= 0")


@dataclass(frozen=True)
class ErrorModel:
    """Estimation-error variance per complex channel entry."""

    sigma_e2: float

    def __post_init__(self):
        if self.sigma_e2 < 0:
            raise ValueError("sigma_e2 must be >= 0")


@dataclass
class ChannelRealization:
    """One packet's true channel and precoder.

    h: (n_sc, n_r, n_t) per-subcarrier channel matrices.
    f: (n_sc, n_t, n_s) per-subcarrier precoders with orthonormal columns.
    """

    h: np.ndarray
    f: np.ndarray
    packet_index: int
    seed: int


def default_sigma_e2(n_t, snr_linear):
    """Estimation-error variance rule 1 / (n_t * SNR)."""
    if snr_linear <= 0:
        raise ValueError("snr_linear must be > 0")
    return 1.0 / (n_t * snr_linear)


def tap_powers(n_taps, decay):
    """Exponential power-delay profile p_l ~ exp(-decay*l), sum = 1."""
    p = np.exp(-decay * np.arange(n_taps))
    return p / p.sum()


def zmcscg(rng, shape, variance=1.0):
    """ZMCSCG draws: real/imag i.i.d. normal with variance/2 each."""
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def svd_precoder(h, n_s):
    """Dominant right singular vectors of h, as precoder columns.

    Accepts stacked channels (..., n_r, n_t). Each singular vector is
    rotated so its largest-magnitude entry is real nonnegative, making
    the precoder deterministic regardless of SVD sign conventions.
    """
    h = linalg.as_cmatrix(h)
    if n_s > min(h.shape[-2], h.shape[-1]):
        raise ValueError(f"n_s={n_s} exceeds min channel dimension")
    u, s, v = linalg.svd(h)
    if np.any(s[..., 0] == 0.0):
        raise ValueError("cannot build a precoder for an all-zero channel")
    f = v[..., :, :n_s].copy()
    # fix per-column phase: largest-|.| entry rotated to the real axis
    pivot = np.argmax(np.abs(f), axis=-2)
    piv_val = np.take_along_axis(f, pivot[..., None, :], axis=-2)
    phase = piv_val / np.abs(piv_val)
    return f * phase.conj()


def generate_channel(cfg: ChannelConfig, packet_index: int) -> ChannelRealization:
    """Draw one packet's channel realization and SVD precoders.

    H_i = sum_l G_l * exp(-2j*pi*l*i/n_sc) with G_l i.i.d. ZMCSCG tap
    matrices of power p_l. Pure function of (cfg, packet_index).
    """
    rng = packet_rng(cfg.seed, packet_index, PURPOSE_CHANNEL)
    p = tap_powers(cfg.n_taps, cfg.decay)
    g = zmcscg(rng, (cfg.n_taps, cfg.n_r, cfg.n_t)) * np.sqrt(p)[:, None, None]
    # (n_sc, n_taps) DFT phases over the delay axis
    phases = np.exp(
        -2j
        * np.pi
        * np.outer(np.arange(cfg.n_sc), np.arange(cfg.n_taps))
        / cfg.n_sc
    )
    h = np.einsum("il,lrt->irt", phases, g)
    f = svd_precoder(h, cfg.n_s)
    return ChannelRealization(h=h, f=f, packet_index=packet_index, seed=cfg.seed)


def inject_error(h, em: ErrorModel, rng):
    """Additive ZMCSCG estimation error: returns (h_hat, delta_h).

    delta_h entries are i.i.d. across all axes of h (in particular,
    independent per subcarrier when h is a per-subcarrier stack).
    """
    h = linalg.as_cmatrix(h)
    if em.sigma_e2 == 0.0:
        delta = np.zeros_like(h)
    else:
        delta = zmcscg(rng, h.shape, em.sigma_e2)
    return h + delta, delta
