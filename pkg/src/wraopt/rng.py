"""Seedable deterministic random numbers (xoshiro256++).

The generator state is four 64-bit words seeded from a single 64-bit seed
through the splitmix64 mixer, so an identical seed reproduces an identical
stream on every platform and under both JIT backends.

Stream discipline (part of the determinism contract):

* one uniform double consumes exactly one 64-bit output,
  mapped to [0, 1) via the top 53 bits;
* one standard normal consumes exactly two uniforms through the
  Box-Muller transform, keeping the cosine branch and discarding the
  sine companion (no spare is cached);
* substreams are derived with :func:`derive_seed`, which folds integer
  identifiers into the parent seed one splitmix64 round per identifier.
"""

import numpy as np

from ._jit import kernel

U64 = np.uint64

_SM64_GAMMA = U64(0x9E3779B97F4A7C15)
_SM64_MIX1 = U64(0xBF58476D1CE4E5B9)
_SM64_MIX2 = U64(0x94D049BB133111EB)
_DOUBLE_SCALE = 1.0 / 9007199254740992.0  # 2**-53


@kernel
def _splitmix64(x):
    """One splitmix64 round: returns (advanced state, mixed output)."""
    x = U64(x + _SM64_GAMMA)
    z = x
    z = U64((z ^ (z >> U64(30))) * _SM64_MIX1)
    z = U64((z ^ (z >> U64(27))) * _SM64_MIX2)
    return x, U64(z ^ (z >> U64(31)))


@kernel
def _seed_state(seed, state):
    s = U64(seed)
    for i in range(4):
        s, z = _splitmix64(s)
        state[i] = z


@kernel
def _rotl(x, k):
    return U64((x << U64(k)) | (x >> U64(64 - k)))


@kernel
def _next_u64(state):
    s0 = state[0]
    s1 = state[1]
    s2 = state[2]
    s3 = state[3]
    result = U64(_rotl(U64(s0 + s3), 23) + s0)
    t = U64(s1 << U64(17))
    s2 = U64(s2 ^ s0)
    s3 = U64(s3 ^ s1)
    s1 = U64(s1 ^ s2)
    s0 = U64(s0 ^ s3)
    s2 = U64(s2 ^ t)
    s3 = _rotl(s3, 45)
    state[0] = s0
    state[1] = s1
    state[2] = s2
    state[3] = s3
    return result


@kernel
def _next_double(state):
    return float(_next_u64(state) >> U64(11)) * _DOUBLE_SCALE


@kernel
def _next_normal(state):
    u1 = _next_double(state)
    u2 = _next_double(state)
    r = np.sqrt(-2.0 * np.log(1.0 - u1))
    return r * np.cos(2.0 * np.pi * u2)


@kernel
def _fill_normals(state, out):
    for i in range(out.shape[0]):
        out[i] = _next_normal(state)


@kernel
def _fill_uniform(state, lo, hi, out):
    for i in range(out.shape[0]):
        out[i] = lo[i] + (hi[i] - lo[i]) * _next_double(state)


@kernel
def _derive(seed, ident):
    _, z = _splitmix64(U64(seed) ^ U64(ident * _SM64_GAMMA))
    return z


def derive_seed(seed, *idents):
    """Deterministically derive a child seed from integer identifiers.

    Each identifier is folded in with one splitmix64 round:
    ``child = mix(parent ^ ident * GAMMA)``, applied left to right.
    """
    s = U64(int(seed) & 0xFFFFFFFFFFFFFFFF)
    for ident in idents:
        s = _derive(s, U64(int(ident) & 0xFFFFFFFFFFFFFFFF))
    return int(s)


class Rng:
    """Single-owner deterministic RNG stream.

    Parameters
    ----------
    seed : int
        64-bit seed; identical seeds reproduce identical streams.
    """

    __slots__ = ("seed", "_state")

    def __init__(self, seed):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._state = np.empty(4, dtype=np.uint64)
        _seed_state(U64(self.seed), self._state)

    @property
    def state(self):
        """The raw four-word generator state (mutated by draws)."""
        return self._state

    def u64(self):
        return int(_next_u64(self._state))

    def random(self):
        """One uniform double in [0, 1)."""
        return float(_next_double(self._state))

    def uniform(self, lo, hi, size=None):
        """Uniform draw(s) on [lo, hi); vector bounds give a vector draw."""
        lo = np.asarray(lo, dtype=np.float64)
        hi = np.asarray(hi, dtype=np.float64)
        if lo.ndim == 0:
            n = 1 if size is None else int(size)
            out = np.empty(n, dtype=np.float64)
            _fill_uniform(self._state, np.full(n, float(lo)), np.full(n, float(hi)), out)
            return float(out[0]) if size is None else out
        out = np.empty(lo.shape[0], dtype=np.float64)
        _fill_uniform(self._state, lo, hi, out)
        return out

    def normal(self):
        """One standard normal (consumes exactly two uniforms)."""
        return float(_next_normal(self._state))

    def normals(self, n):
        out = np.empty(int(n), dtype=np.float64)
        _fill_normals(self._state, out)
        return out

    def spawn(self, *idents):
        """A fresh independent stream keyed by (seed, *idents).

        Spawning does not consume draws from this stream.
        """
        return Rng(derive_seed(self.seed, *idents))

    def clone(self):
        """An exact copy, including the current stream position."""
        other = Rng.__new__(Rng)
        other.seed = self.seed
        other._state = self._state.copy()
        return other
