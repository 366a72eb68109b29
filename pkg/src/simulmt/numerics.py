"""Deterministic numerical kernels shared by every other module.

Everything is 64-bit float. The RNG is a fixed xorshift-family generator
implemented in plain integer arithmetic so that a seed produces the same
stream on every platform; numpy is used for array math only, never for
random numbers.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

_U64 = (1 << 64) - 1


def softmax(v: Sequence[float] | np.ndarray) -> np.ndarray:
    """Stable softmax: exp(v - max(v)) normalized to sum 1."""
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise ValueError("empty vector")
    shifted = v - v.max()
    e = np.exp(shifted)
    return e / e.sum()


def log_softmax(v: Sequence[float] | np.ndarray) -> np.ndarray:
    """log(softmax(v)) computed as v - max(v) - log(sum(exp(v - max(v))))."""
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise ValueError("empty vector")
    shifted = v - v.max()
    return shifted - np.log(np.exp(shifted).sum())


def entropy(p: Sequence[float] | np.ndarray) -> float:
    """Shannon entropy -sum(p * ln p) in nats, with 0*ln(0) = 0.

    `p` must be a probability vector: nonnegative, summing to 1 within 1e-6.
    """
    p = np.asarray(p, dtype=np.float64)
    if p.size == 0:
        raise ValueError("empty vector")
    if np.any(p < 0):
        raise ValueError("negative probability")
    total = p.sum()
    if abs(total - 1.0) > 1e-6:
        raise ValueError(f"probabilities sum to {total!r}, not 1")
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def fd_gradient(
    f: Callable[[np.ndarray], float],
    x: np.ndarray,
    h: float = 1e-5,
) -> np.ndarray:
    """Central-difference gradient of a scalar function of a vector.

    Per coordinate: (f(x + h*e_i) - f(x - h*e_i)) / (2h). This is the
    independent oracle the analytic gradients are checked against; it must
    never share code with them.
    """
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for i in range(x.size):
        orig = x[i]
        x[i] = orig + h
        hi = f(x)
        x[i] = orig - h
        lo = f(x)
        x[i] = orig
        grad[i] = (hi - lo) / (2.0 * h)
    return grad


def _splitmix64(z: int) -> int:
    """One splitmix64 step; used to derive the initial state from a seed."""
    z = (z + 0x9E3779B97F4A7C15) & _U64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _U64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _U64
    return z ^ (z >> 31)


class Rng:
    """xorshift64* generator with splitmix64 seeding.

    State is a single 64-bit word. The update is the classic 12/25/27
    xorshift followed by multiplication with 2685821657736338717; the seed
    is passed through splitmix64 so that seed 0 is usable and nearby seeds
    give unrelated streams. Identical seeds produce identical streams on
    every platform.
    """

    def __init__(self, seed: int):
        state = _splitmix64(seed & _U64)
        if state == 0:  # xorshift state must be nonzero
            state = 0x9E3779B97F4A7C15
        self._state = state

    def next_u64(self) -> int:
        """Next raw 64-bit output."""
        s = self._state
        s ^= (s >> 12)
        s ^= (s << 25) & _U64
        s ^= (s >> 27)
        self._state = s
        return (s * 2685821657736338717) & _U64

    def uniform(self) -> float:
        """Uniform in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def gauss(self, mu: float = 0.0, sigma: float = 1.0) -> float:
        """Gaussian via Box-Muller; consumes exactly two uniforms per call.

        u1 is shifted into (0, 1] so log(u1) is finite.
        """
        u1 = ((self.next_u64() >> 11) + 1) * (2.0 ** -53)
        u2 = (self.next_u64() >> 11) * (2.0 ** -53)
        z = math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)
        return mu + sigma * z

    def below(self, n: int) -> int:
        """Uniform integer in [0, n) by rejection, free of modulo bias."""
        if n <= 0:
            raise ValueError("bound must be positive")
        limit = _U64 - ((_U64 + 1) % n)
        while True:
            x = self.next_u64()
            if x <= limit:
                return x % n

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi] inclusive."""
        return lo + self.below(hi - lo + 1)

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]

    def gauss_matrix(self, rows: int, cols: int, sigma: float) -> np.ndarray:
        """(rows, cols) array of independent N(0, sigma^2) draws, row-major."""
        out = np.empty(rows * cols, dtype=np.float64)
        for i in range(out.size):
            out[i] = self.gauss(0.0, sigma)
        return out.reshape(rows, cols)
