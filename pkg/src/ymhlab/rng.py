"""SplitMix64 random streams.

The generator is deliberately tiny so that its output can be reproduced in
any language: the state advances by the golden-ratio increment and each
output is the standard SplitMix64 finalizer of the new state.  Doubles take
the top 53 bits; normals come from Box-Muller pairs.

Reference vector (seed 1234567, first five raw outputs)::

    6457827717110365317 3203168211198807973 9817491932198370423
    4593380528125082431 16408922859458223821
"""

import numpy as np

GOLDEN = 0x9E3779B97F4A7C15
MASK = (1 << 64) - 1

_G = np.uint64(GOLDEN)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


class SplitMix64:
    """Counter-style SplitMix64 stream; ``draws`` consumes ``n`` outputs at once."""

    def __init__(self, seed):
        self.state = int(seed) & MASK

    def next_u64(self):
        return int(self.raw(1)[0])

    def raw(self, n):
        n = int(n)
        k = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = np.uint64(self.state) + k * _G
            out = _mix(z)
        self.state = (self.state + n * GOLDEN) & MASK
        return out

    def uniform(self, shape=()):
        n = int(np.prod(shape, dtype=np.int64)) if shape != () else 1
        u = (self.raw(n) >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)
        return u.reshape(shape) if shape != () else float(u[0])

    def normal(self, shape=()):
        n = int(np.prod(shape, dtype=np.int64)) if shape != () else 1
        m = (n + 1) // 2
        u1 = self.uniform((m,))
        u2 = self.uniform((m,))
        r = np.sqrt(-2.0 * np.log(np.maximum(u1, 1e-300)))
        z = np.concatenate([r * np.cos(2 * np.pi * u2), r * np.sin(2 * np.pi * u2)])[:n]
        return z.reshape(shape) if shape != () else float(z[0])

    def spawn(self, salt):
        """Independent child stream derived from the current state and ``salt``."""
        child = SplitMix64(self.state ^ ((int(salt) * GOLDEN) & MASK))
        child.next_u64()
        return child
