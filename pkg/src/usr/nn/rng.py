"""Seeded splitmix64 generator with Box-Muller normals.

A stream is identified by ``(seed, sample_index, purpose)``. The initial
64-bit state is derived as::

    s = mix(seed + GOLDEN)
    s = mix(s ^ sample_index)
    s = mix(s ^ fnv1a64(purpose))

where ``mix`` is the splitmix64 finalizer. Uniforms take the top 53 bits of
each output. Normals are produced in pairs from two consecutive uniforms
(u1 in (0, 1], u2 in [0, 1))::

    r = sqrt(-2 ln u1);  g0 = r cos(2 pi u2);  g1 = r sin(2 pi u2)

so one normal consumes one output on average. Scalar and block draws consume
the stream identically.
"""
import numpy as np

from .. import kernels

GOLDEN = 0x9E3779B97F4A7C15
MASK64 = (1 << 64) - 1
_INV53 = 1.0 / (1 << 53)


def mix64(z):
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def fnv1a64(text):
    h = 0xCBF29CE484222325
    for b in text.encode("utf-8"):
        h = ((h ^ b) * 0x100000001B3) & MASK64
    return h


def stream_state(seed, sample_index=0, purpose=""):
    s = mix64(seed + GOLDEN)
    s = mix64(s ^ (sample_index & MASK64))
    return mix64(s ^ fnv1a64(purpose))


class DeterministicRng:
    def __init__(self, seed, sample_index=0, purpose=""):
        self.key = (int(seed), int(sample_index), str(purpose))
        self.state = stream_state(*self.key)
        self._spare = None

    def __repr__(self):
        return f"DeterministicRng(seed={self.key[0]}, sample_index={self.key[1]}, purpose={self.key[2]!r})"

    def next_u64_block(self, n):
        out = kernels.splitmix64_block(self.state, n)
        self.state = (self.state + n * GOLDEN) & MASK64
        return out

    def next_u64(self):
        self.state = (self.state + GOLDEN) & MASK64
        return mix64(self.state)

    def uniform(self, size=None):
        """Uniform draws in [0, 1)."""
        if size is None:
            return (self.next_u64() >> 11) * _INV53
        n = int(np.prod(size))
        u = (self.next_u64_block(n) >> np.uint64(11)).astype(np.float64) * _INV53
        return u.reshape(size)

    def uniform_range(self, lo, hi):
        return lo + (hi - lo) * self.uniform()

    def randint(self, lo, hi):
        """Integer in [lo, hi] inclusive."""
        span = hi - lo + 1
        return lo + min(int(self.uniform() * span), span - 1)

    def choice(self, options):
        return options[self.randint(0, len(options) - 1)]

    def next_gaussian(self):
        return float(self.normal(1)[0])

    def normal(self, size):
        """Block of standard normals; identical to repeated next_gaussian()."""
        n = int(np.prod(size))
        out = np.empty(n, dtype=np.float64)
        i = 0
        if self._spare is not None and n > 0:
            out[0], self._spare = self._spare, None
            i = 1
        rest = n - i
        pairs = (rest + 1) // 2
        if pairs:
            raw = self.next_u64_block(2 * pairs) >> np.uint64(11)
            u1 = (raw[0::2] + np.uint64(1)).astype(np.float64) * _INV53
            u2 = raw[1::2].astype(np.float64) * _INV53
            r = np.sqrt(-2.0 * np.log(u1))
            g = np.empty(2 * pairs)
            g[0::2] = r * np.cos(2.0 * np.pi * u2)
            g[1::2] = r * np.sin(2.0 * np.pi * u2)
            out[i:] = g[:rest]
            if rest % 2:
                self._spare = float(g[-1])
        return out.reshape(size)


def rng_next_gaussian(rng):
    return rng.next_gaussian()
