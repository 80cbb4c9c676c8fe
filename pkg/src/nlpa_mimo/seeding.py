"""Deterministic seed mixing for sweeps and Monte Carlo blocks.

``derive_seed(base, *keys)`` feeds ``base`` as entropy and ``keys`` as the
spawn key of a ``numpy.random.SeedSequence`` and packs the first two
32-bit words of its state into one 63-bit integer. The mapping depends
only on its arguments, never on execution order or thread count.
"""

import numpy as np


def derive_seed(base: int, *keys: int) -> int:
    ss = np.random.SeedSequence(entropy=int(base), spawn_key=tuple(int(k) for k in keys))
    hi, lo = ss.generate_state(2, dtype=np.uint32)
    return int((int(hi) << 32 | int(lo)) & 0x7FFF_FFFF_FFFF_FFFF)


# stream identifiers used as the first spawn key
CHANNEL_STREAM = 1
CROSSTALK_STREAM = 2
SHADOWING_STREAM = 3
MC_BLOCK_STREAM = 4
