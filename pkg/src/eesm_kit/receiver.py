"""MMSE detection, post-processing SINR, and the closed-form
perturbation model of the detector under channel estimation error.

Conventions used throughout:

* W = [(HF)* HF + I/SNR]^-1 (HF)*  is the perfect-CSI MMSE detector.
* K = [F* H* H F + I/SNR]^-1, so W = K (HF)* exactly.
* The post-processing SINR is always evaluated with the TRUE H and F;
  an estimated channel influences the SINR only through the detector.
* First-order detector perturbation for H_hat = H + dH:
    dW = -K (F* H* dH F + F* dH* H F) K F* H*  +  K F* dH*.
* E  = E[dW (HF)(HF)* dW*] + SNR^-1 W W*   (closed form, term by term)
* N  = SNR^-1 (W W* + E[dW dW*])           (expected noise power)
  where the expectations over dH use E[dH A dH*] = sigma_e2 tr(A) I and
  E[dH A dH] = 0.

All functions accept stacked inputs (leading batch axes).
"""

from dataclasses import dataclass

import numpy as np

from eesm_kit import linalg
from eesm_kit.linalg import conj_transpose as ct

ANALYTICAL_MODES = ("paper_literal", "consistent")


@dataclass(frozen=True)
class LinkOperatingPoint:
    """Per-antenna SNR and the implied noise power (P_t fixed at 1)."""

    snr_linear: float
    p_t: float = 1.0

    def __post_init__(self):
        if self.snr_linear <= 0:
            raise ValueError("snr_linear must be > 0")

    @property
    def sigma2(self):
        return self.p_t / self.snr_linear

    @classmethod
    def from_db(cls, snr_db):
        return cls(snr_linear=10.0 ** (snr_db / 10.0))


@dataclass
class PerturbationTerms:
    """Closed-form perturbation matrices for one (stack of) subcarrier(s)."""

    k: np.ndarray
    e: np.ndarray
    n: np.ndarray


def _regularized_gram(h, f, op):
    g = linalg.matmul(h, f)
    n_s = g.shape[-1]
    return g, ct(g) @ g + np.eye(n_s, dtype=np.complex128) / op.snr_linear


def mmse_detector(h, f, op: LinkOperatingPoint):
    """MMSE detector W = [(HF)* HF + I/SNR]^-1 (HF)*, shape (..., n_s, n_r)."""
    g, gram = _regularized_gram(h, f, op)
    if np.all(g == 0):
        raise ValueError("HF is all-zero; detector undefined")
    return linalg.inverse(gram) @ ct(g)


def k_matrix(h, f, op: LinkOperatingPoint):
    """K = [F* H* H F + I/SNR]^-1, satisfying W = K (HF)*."""
    _, gram = _regularized_gram(h, f, op)
    return linalg.inverse(gram)


def post_sinr(w, h, f, op: LinkOperatingPoint):
    """Per-stream post-processing SINR for an arbitrary detector w.

    Gamma_j = S_j / (I_j + N_j) with
      S_j = P_t |(W H F)_{j,j}|^2,
      I_j = P_t sum_l |(W H F)_{j,l}|^2 - S_j,
      N_j = sigma^2 ||row j of W||^2.
    Evaluated with the true h, f regardless of how w was obtained.
    Returns a real array of shape (..., n_s).
    """
    w = linalg.as_cmatrix(w)
    rows = linalg.matmul(w, linalg.matmul(h, f))  # (..., n_s, n_s)
    w_row_power = np.sum(np.abs(w) ** 2, axis=-1)  # (..., n_s)
    if np.any(w_row_power == 0.0):
        raise ValueError("detector has an all-zero row; SINR undefined")
    powers = np.abs(rows) ** 2
    signal = op.p_t * np.einsum("...jj->...j", powers)
    total = op.p_t * np.sum(powers, axis=-1)
    interference = total - signal
    noise = op.sigma2 * w_row_power
    return signal / (interference + noise)


def perturbed_detector_first_order(h, f, delta_h, op: LinkOperatingPoint):
    """First-order expansion of the MMSE detector around the true channel.

    Returns (w_hat, delta_w) with w_hat = W + delta_w. Accuracy is
    second order in the error magnitude; the simulation flow uses the
    exact detector instead, this expansion only backs the closed forms.
    """
    h = linalg.as_cmatrix(h)
    f = linalg.as_cmatrix(f)
    delta_h = linalg.as_cmatrix(delta_h)
    g = h @ f
    k = k_matrix(h, f, op)
    w = k @ ct(g)
    inner = ct(g) @ (delta_h @ f) + ct(delta_h @ f) @ g
    # K F* dH* == K (dH F)*
    delta_w = -k @ inner @ k @ ct(g) + k @ ct(delta_h @ f)
    return w + delta_w, delta_w


def analytical_terms(h, f, op: LinkOperatingPoint, sigma_e2,
                     drop_duplicate_noise_term_in_e=False) -> PerturbationTerms:
    """Closed-form E and N matrices, evaluated term by term.

    E carries the expected signal/interference perturbation power and,
    as printed, an SNR^-1 W W* term that duplicates the first term of
    N; ``drop_duplicate_noise_term_in_e`` removes it.
    N is the expected post-detection noise power sigma^2 E[W_hat W_hat*]
    (first-order W_hat). The precoder must satisfy F* F = I, which the
    closed forms rely on silently.
    """
    if sigma_e2 < 0:
        raise ValueError("sigma_e2 must be >= 0")
    h = linalg.as_cmatrix(h)
    f = linalg.as_cmatrix(f)
    n_s = f.shape[-1]
    ff = ct(f) @ f
    if not np.allclose(ff, np.eye(n_s), atol=1e-10):
        raise ValueError("precoder columns must be orthonormal (F* F = I)")

    g = h @ f
    a = ct(g) @ g                      # F* H* H F
    k = k_matrix(h, f, op)
    kh = ct(k)
    w = k @ ct(g)
    ww = w @ ct(w)
    kk = k @ kh
    kak = k @ a @ kh                   # K F* H* H F K*
    n_r = h.shape[-2]
    inv_snr = 1.0 / op.snr_linear

    tr = linalg.trace
    # E, Eq.-(10)-shaped terms
    t1 = tr(k @ a @ a @ kh)                        # tr(K F*H*HF F*H*HF K*)
    t2 = tr(g @ k @ ct(g) @ g @ ct(g) @ g @ kh @ ct(g))
    t3 = tr(g @ k @ ct(g) @ g @ ct(g))
    t4 = tr(g @ ct(g) @ g @ kh @ ct(g))
    t5 = tr(g @ ct(g))
    e = sigma_e2 * (
        t1[..., None, None] * kak
        + (t2 - t3 - t4 + t5)[..., None, None] * kk
    )
    if not drop_duplicate_noise_term_in_e:
        e = e + inv_snr * ww

    # N, Eq.-(11)-shaped terms
    s1 = tr(kak)                                   # tr(K F*H*HF K*)
    s2 = tr(g @ k @ ct(g) @ g @ kh @ ct(g))
    s3 = tr(g @ k @ ct(g))
    s4 = tr(g @ kh @ ct(g))
    n = inv_snr * (
        ww
        + sigma_e2 * (s1[..., None, None] * kak
                      + (s2 - s3 - s4 + n_r)[..., None, None] * kk)
    )
    return PerturbationTerms(k=k, e=e, n=n)


def expected_detector_quadratic(h, f, op: LinkOperatingPoint, sigma_e2, a):
    """Closed form of E[dW A dW*] for a fixed (..., n_r, n_r) matrix A.

    Built from the same trace identities as `analytical_terms`; with
    A = (HF)(HF)* it equals E minus its SNR^-1 W W* term, and with
    A = I it equals SNR * N minus W W*.
    """
    h = linalg.as_cmatrix(h)
    f = linalg.as_cmatrix(f)
    a_mid = linalg.as_cmatrix(a)
    g = h @ f
    gram = ct(g) @ g
    k = k_matrix(h, f, op)
    kh = ct(k)
    kk = k @ kh
    kak = k @ gram @ kh
    p = g @ k @ ct(g)

    tr = linalg.trace
    t1 = tr(k @ ct(g) @ a_mid @ g @ kh)
    t2 = tr(p @ a_mid @ ct(p))
    t3 = tr(a_mid)
    t4 = tr(p @ a_mid)
    t5 = tr(a_mid @ ct(p))
    return sigma_e2 * (
        t1[..., None, None] * kak
        + (t2 + t3 - t4 - t5)[..., None, None] * kk
    )


def _expected_stream_powers(h, f, op: LinkOperatingPoint, sigma_e2):
    """E|(dW HF)_{j,l}|^2 as a real (..., n_s, n_s) grid.

    Entry (j, l) is [E[dW g_l g_l* dW*]]_{j,j} with g_l the l-th column
    of HF, evaluated in closed form (no Monte Carlo).
    """
    h = linalg.as_cmatrix(h)
    f = linalg.as_cmatrix(f)
    g = h @ f
    gram = ct(g) @ g
    k = k_matrix(h, f, op)
    kh = ct(k)
    w = k @ ct(g)
    p = g @ k @ ct(g)

    # per-column scalars; columns g_l indexed by the last axis of g
    wg = w @ g
    t1 = np.sum(np.abs(wg) ** 2, axis=-2)                 # ||W g_l||^2
    pg = p @ g
    t2 = np.sum(np.abs(pg) ** 2, axis=-2)                 # ||P g_l||^2
    t3 = np.sum(np.abs(g) ** 2, axis=-2)                  # ||g_l||^2
    t4 = np.real(np.einsum("...rl,...rl->...l", g.conj(), pg))  # Re g_l* P g_l

    diag_kak = np.real(np.einsum("...ij,...jk,...ik->...i", k, gram, k.conj()))
    diag_kk = np.sum(np.abs(k) ** 2, axis=-1)
    return sigma_e2 * (
        t1[..., None, :] * diag_kak[..., :, None]
        + (t2 + t3 - 2.0 * t4)[..., None, :] * diag_kk[..., :, None]
    )


def analytical_post_sinr(h, f, op: LinkOperatingPoint, sigma_e2,
                         mode="paper_literal",
                         drop_duplicate_noise_term_in_e=False):
    """Analytical per-stream SINR under estimation-error variance sigma_e2.

    mode="paper_literal": with M = W HF (HF)* W* + E,
        Gamma_j = |M_{j,j}|^2 / (sum_{l != j} |M_{j,l}|^2 + N_{j,j}),
    exactly as the closed form is printed.

    mode="consistent": expected signal/interference powers per entry,
        Gamma_j = E|(W_hat HF)_{j,j}|^2
                  / (sum_{l != j} E|(W_hat HF)_{j,l}|^2 + N_{j,j}),
    which reduces to `post_sinr` at sigma_e2 = 0 and is exactly
    invariant to sigma_e2 for n_r = 1 (the W-free MISO/SISO form).

    Returns a real array of shape (..., n_s).
    """
    if mode not in ANALYTICAL_MODES:
        raise ValueError(f"unknown analytical mode {mode!r}")
    terms = analytical_terms(
        h, f, op, sigma_e2,
        drop_duplicate_noise_term_in_e=drop_duplicate_noise_term_in_e,
    )
    g = linalg.matmul(h, f)
    w = terms.k @ ct(g)
    wg = w @ g
    noise = np.real(np.einsum("...jj->...j", terms.n))

    if mode == "paper_literal":
        m = wg @ ct(wg) + terms.e
        powers = np.abs(m) ** 2
        signal = np.einsum("...jj->...j", powers)
        interference = np.sum(powers, axis=-1) - signal
        return signal / (interference + noise)

    powers = np.abs(wg) ** 2 + _expected_stream_powers(h, f, op, sigma_e2)
    signal = op.p_t * np.einsum("...jj->...j", powers)
    total = op.p_t * np.sum(powers, axis=-1)
    return signal / (total - signal + noise)
