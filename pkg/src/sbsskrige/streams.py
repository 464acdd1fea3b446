"""Deterministic random streams.

All sampling goes through the counter-based Philox generator keyed by
``numpy.random.SeedSequence``, so every ``(seed, path)`` pair names an
independent stream regardless of execution order, worker process, or
platform.  Gaussian variates come from numpy's own ziggurat code, so the
sampling path involves no platform math-library calls.

Path conventions used by the simulation and benchmark code::

    (seed, replicate-domain paths are built by bench.child_seed)
    (seed, STREAM_COORDS)                coordinate sampling
    (seed, STREAM_MIXING)                mixing-matrix entries
    (seed, STREAM_FIELD, c, copy)        Gaussian draws for latent component
                                         c; copy > 0 only for the Student-t
                                         construction
"""

import numpy as np

STREAM_COORDS = 0
STREAM_FIELD = 1
STREAM_MIXING = 2

_MASK64 = (1 << 64) - 1


def substream(seed, *path):
    """Independent Philox generator for the given base seed and integer path."""
    ss = np.random.SeedSequence(
        entropy=int(seed) & _MASK64,
        spawn_key=tuple(int(p) & _MASK64 for p in path),
    )
    return np.random.Generator(np.random.Philox(ss))


def child_seed(base_seed, index):
    """64-bit child seed for stream ``index``; pure function of its inputs."""
    ss = np.random.SeedSequence(entropy=int(base_seed) & _MASK64,
                                spawn_key=(int(index) & _MASK64,))
    return int(ss.generate_state(1, np.uint64)[0])
