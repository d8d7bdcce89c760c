"""Named random substreams derived from a single 64-bit seed."""
import numpy as np

# Fixed ids so that adding a stream never perturbs the existing ones.
STREAMS = {
    "data": 1,
    "init": 2,
    "shuffle": 3,
    "kmeans": 4,
    "probe": 5,
}


def substream(seed, name, *keys):
    """Return a Generator for ``name`` keyed by ``seed`` and optional integer keys.

    >>> a = substream(0, "shuffle", 3).integers(1 << 30)
    >>> b = substream(0, "shuffle", 3).integers(1 << 30)
    >>> a == b
    True
    """
    if name not in STREAMS:
        raise KeyError(f"unknown random stream {name!r}")
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF, STREAMS[name], *(int(k) for k in keys)]
    return np.random.default_rng(np.random.SeedSequence(entropy))
