"""Reproducible cylindrical-Wiener increments in the truncated sine basis.

Each (macro step n, micro step m, replica j) owns a disjoint block of a
counter-based Philox stream, so increments are pure functions of the key:
identical keys give bit-identical Gaussians, distinct keys give independent
ones, and trajectories are reproducible regardless of evaluation order.

Gaussian sampling is pinned project-wide: each mode takes one raw 64-bit
Philox word, keeps the top 53 bits, centers to a uniform in (0, 1) and maps
it through the inverse normal CDF.  Regression files depend on this choice;
do not swap in a different normal generator.

Within a replica stream the draws are laid out by a global step position.
When the steps-per-macro count m0 is known the position is n*m0 + m (the
micro chains of consecutive macro steps read one concatenated noise process);
otherwise macro and micro indices occupy disjoint bit ranges.  Steps are
padded to whole 4-word Philox blocks, which makes a batched draw of many
consecutive steps bit-identical to per-step draws.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.special import ndtri

__all__ = [
    "NoiseStreamKey",
    "NoiseIncrement",
    "derive_key",
    "draw_increment",
    "draw_increments",
    "standard_normals",
    "mix_seed",
]

_U64 = np.uint64
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class NoiseStreamKey:
    """Address of one micro-step noise block.

    ``steps_per_macro`` (m0) selects the concatenated layout; ``stream_tag``
    separates logically distinct consumers (e.g. the direct solver) that share
    one master seed.
    """

    master_seed: int
    replica: int
    macro_step: int
    micro_step: int
    steps_per_macro: int | None = None
    stream_tag: int = 0

    def __post_init__(self):
        if self.replica < 0 or self.replica >= 1 << 32:
            raise ValueError(f"replica index out of range: {self.replica}")
        if self.macro_step < 0 or self.micro_step < 0:
            raise ValueError("macro_step and micro_step must be nonnegative")
        if self.steps_per_macro is not None and self.micro_step >= self.steps_per_macro:
            raise ValueError(
                f"micro_step {self.micro_step} outside macro block of "
                f"{self.steps_per_macro} steps"
            )

    def position(self) -> int:
        """Global step index of this key inside its replica stream."""
        if self.steps_per_macro is not None:
            return self.macro_step * self.steps_per_macro + self.micro_step
        return (self.macro_step << 64) | self.micro_step

    def advanced(self, steps: int) -> "NoiseStreamKey":
        """Key of the block ``steps`` micro steps later in the same stream."""
        return replace(self, micro_step=self.micro_step + steps)


@dataclass(frozen=True)
class NoiseIncrement:
    """One Wiener increment over a step of length dt: K iid N(0, dt) modes."""

    coeffs: np.ndarray
    dt: float


def derive_key(
    master_seed: int,
    macro_step: int,
    micro_step: int,
    replica: int,
    steps_per_macro: int | None = None,
    stream_tag: int = 0,
) -> NoiseStreamKey:
    """Build the stream key for (macro step, micro step, replica)."""
    return NoiseStreamKey(
        master_seed=master_seed,
        replica=replica,
        macro_step=macro_step,
        micro_step=micro_step,
        steps_per_macro=steps_per_macro,
        stream_tag=stream_tag,
    )


def _philox_words(key: NoiseStreamKey) -> np.ndarray:
    k0 = key.master_seed & _MASK64
    k1 = ((key.stream_tag & 0xFFFFFFFF) << 32) | (key.replica & 0xFFFFFFFF)
    return np.array([k0, k1], dtype=_U64)


def _blocks_per_step(K: int) -> int:
    # one Philox counter block yields 4 raw 64-bit words
    return (K + 3) // 4


def standard_normals(key: NoiseStreamKey, K: int, count: int = 1) -> np.ndarray:
    """Standard-normal blocks for ``count`` consecutive steps from ``key``.

    Returns shape (count, K) (or (K,) when count == 1).  Batched and
    step-by-step generation agree bit for bit.
    """
    if K < 1:
        raise ValueError(f"mode count must be >= 1, got {K}")
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    blocks = _blocks_per_step(K)
    words_per_step = 4 * blocks
    bg = np.random.Philox(key=_philox_words(key), counter=key.position() * blocks)
    raw = bg.random_raw(count * words_per_step).reshape(count, words_per_step)[:, :K]
    u = ((raw >> _U64(11)).astype(np.float64) + 0.5) * 2.0**-53
    z = ndtri(u)
    return z[0] if count == 1 else z


def draw_increment(key: NoiseStreamKey, dt: float, K: int) -> NoiseIncrement:
    """Wiener increment over one step: K iid N(0, dt) mode coefficients."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    z = standard_normals(key, K)
    return NoiseIncrement(coeffs=np.sqrt(dt) * z, dt=dt)


def draw_increments(key: NoiseStreamKey, dt: float, K: int, count: int) -> np.ndarray:
    """Increments for ``count`` consecutive steps, shape (count, K).

    Row i equals ``draw_increment(key.advanced(i), dt, K).coeffs`` exactly.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    z = standard_normals(key, K, count=count)
    return np.sqrt(dt) * z.reshape(count, K)


def mix_seed(master_seed: int, *indices: int) -> int:
    """Derive a 63-bit sub-seed from a master seed and index tuple.

    Splitmix64 finalizer applied per index; used by the experiment harness to
    hand independent master seeds to independent runs deterministically.
    """
    x = master_seed & _MASK64
    for idx in indices:
        x = (x + 0x9E3779B97F4A7C15 + (idx & _MASK64)) & _MASK64
        z = x
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        x = z ^ (z >> 31)
    return x >> 1
