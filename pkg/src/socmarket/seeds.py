"""Deterministic seed derivation for ensemble runs.

Run i of an ensemble gets splitmix64(master, i), so member streams are
independent, reproducible from the master seed alone, and need no seed
files. The same mixer breaks argmax ties under the random tie policy.
"""

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    """One splitmix64 output for the 64-bit state x."""
    z = (x + _GAMMA) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return (z ^ (z >> 31)) & _MASK


def derive_seed(master_seed: int, index: int) -> int:
    """Seed for ensemble member `index` under `master_seed`."""
    return splitmix64((master_seed + (index + 1) * _GAMMA) & _MASK)


def derive_seeds(master_seed: int, n: int) -> list[int]:
    return [derive_seed(master_seed, i) for i in range(n)]
