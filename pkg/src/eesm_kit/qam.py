"""Gray-mapped square QAM with unit average symbol energy."""

import numpy as np

SUPPORTED_ORDERS = (4, 16, 64)


def _gray_codes(m):
    """Gray label of each ascending PAM level index (m levels)."""
    idx = np.arange(m)
    return idx ^ (idx >> 1)


def _pam_levels(m):
    """Ascending PAM amplitudes {-(m-1), ..., m-3, m-1}."""
    return 2 * np.arange(m) - (m - 1)


def _norm(order):
    m = int(np.sqrt(order))
    return 1.0 / np.sqrt(2.0 * np.mean(_pam_levels(m) ** 2))


def constellation(order):
    """Complex constellation indexed by symbol label, E|s|^2 = 1.

    Label layout: label = i_label * sqrt(order) + q_label, with each
    axis Gray-coded so nearest-neighbor axis errors flip one bit.
    """
    if order not in SUPPORTED_ORDERS:
        raise ValueError(f"unsupported QAM order {order}, use one of {SUPPORTED_ORDERS}")
    m = int(np.sqrt(order))
    levels = _pam_levels(m)
    gray = _gray_codes(m)
    # amplitude indexed by gray label
    amp = np.empty(m)
    amp[gray] = levels
    points = (amp[:, None] + 1j * amp[None, :]).reshape(-1)
    return points * _norm(order)


def modulate(labels, order):
    return constellation(order)[np.asarray(labels)]


def demodulate(symbols, order):
    """Hard nearest-neighbor decisions, returned as symbol labels.

    Decided per I/Q axis (valid for square QAM), so the cost does not
    grow with the constellation size.
    """
    if order not in SUPPORTED_ORDERS:
        raise ValueError(f"unsupported QAM order {order}, use one of {SUPPORTED_ORDERS}")
    m = int(np.sqrt(order))
    gray = _gray_codes(m)
    sym = np.asarray(symbols) / _norm(order)

    def axis_labels(vals):
        idx = np.clip(np.round((vals + (m - 1)) / 2.0), 0, m - 1).astype(int)
        return gray[idx]

    return axis_labels(np.real(sym)) * m + axis_labels(np.imag(sym))
