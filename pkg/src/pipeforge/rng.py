"""splitmix64-based shuffling, shared by fold assignment and SGD epochs.

This generator is deliberately tiny and portable: the external evaluator
re-implements it bit-for-bit (BigInt in TypeScript, uint64 in the compiled
kernel) so fold assignments agree across processes and languages.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1


def splitmix64_next(state: int) -> tuple[int, int]:
    """Return (random uint64, advanced state)."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    z ^= z >> 31
    return z, state


def shuffle_in_place(items, state: int) -> int:
    """Fisher-Yates driven by splitmix64; returns the advanced state."""
    state &= _MASK64
    for i in range(len(items) - 1, 0, -1):
        z, state = splitmix64_next(state)
        j = z % (i + 1)
        items[i], items[j] = items[j], items[i]
    return state


def mix_seed(*parts: int) -> int:
    """Derive one uint64 stream seed from several integer components."""
    state = 0x243F6A8885A308D3
    for part in parts:
        state = (state ^ (part & _MASK64)) & _MASK64
        _, state = splitmix64_next(state)
        z, state = splitmix64_next(state)
        state = z
    return state & _MASK64
