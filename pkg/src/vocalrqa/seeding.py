"""Seed splitting.

Every random draw in the package comes from a generator built by
:func:`substream`. A master seed is expanded into independent streams keyed
by ``(purpose, index)`` using :class:`numpy.random.SeedSequence` spawn keys,
so e.g. running more permutations never changes the fold assignment, and
permutation ``i`` sees the same labels whatever worker executes it.
"""

from __future__ import annotations

import numpy as np

FOLDS = 0
PERMUTATION = 1
BOOTSTRAP = 2
SYNTH_PARTICIPANT = 3
SYNTH_LABELS = 4
RR_GAP = 5


def substream(seed: int, purpose: int, *index: int) -> np.random.Generator:
    """Return the generator for ``(seed, purpose, *index)``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(purpose),) + tuple(int(i) for i in index))
    return np.random.default_rng(ss)
