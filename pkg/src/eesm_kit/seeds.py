"""Deterministic per-packet sub-seeding.

Each packet draws from independent RNG streams keyed by
(master_seed, packet_index, purpose). The mixing is delegated to
``numpy.random.SeedSequence``, which hashes the entropy tuple with a
documented 128-bit mix, so channel taps, estimation-error draws and
receiver noise are mutually independent and the results are identical
under any parallel packet schedule.
"""

import numpy as np

# Purpose tags. Adding a purpose must never renumber existing ones or
# previously generated datasets stop being reproducible.
PURPOSE_CHANNEL = 0   # tap matrices of the true channel
PURPOSE_ERROR = 1     # channel estimation error draws
PURPOSE_PHY = 2       # payload symbols and receiver noise
PURPOSE_MISC = 3      # anything not tied to a single packet


def packet_rng(master_seed, packet_index, purpose):
    """Independent Generator for one (packet, purpose) pair."""
    if packet_index < 0:
        raise ValueError("packet_index must be >= 0")
    ss = np.random.SeedSequence((int(master_seed), int(packet_index), int(purpose)))
    return np.random.default_rng(ss)
